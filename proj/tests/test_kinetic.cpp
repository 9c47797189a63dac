#include <doctest.h>

#include "hsl/collision_quadrature.hpp"
#include "hsl/dsmc.hpp"
#include "hsl/fluctuation_ldp.hpp"
#include "hsl/kac.hpp"
#include "hsl/linearized.hpp"
#include "hsl/rng.hpp"
#include "hsl/velocity_grid.hpp"

using namespace hsl;
using namespace hsl::kinetic;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::ok;
}

double m_inner(const VelocityGridField& a, const VelocityGridField& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i)
    s += maxwellian(a.grid.node(i), a.grid.d) * a.values[i] * b.values[i];
  return s * a.grid.weight();
}

}  // namespace

TEST_CASE("grid basics") {
  const auto g = make_grid(2, 6.0, 41);
  CHECK(g.size() == 41 * 41);
  CHECK(g.coordinate(20) == doctest::Approx(0.0));
  CHECK(integrate(maxwellian_field(g)) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(code_of([] { make_grid(2, 6.0, 40); }) == ErrorCode::malformed_spec);
  CHECK(code_of([] { make_grid(4, 6.0, 41); }) == ErrorCode::invalid_dimension);
}

TEST_CASE("cubic interpolation reproduces tensor cubics") {
  const auto g = make_grid(2, 4.0, 17);
  auto poly = [](const Vec& v) { return v[0] * v[0] * v[0] - 2.0 * v[0] * v[1] * v[1] + 0.5 * v[1] + 1.0; };
  const auto f = sample_field(g, poly);
  Engine rng = make_engine(1);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  for (int k = 0; k < 200; ++k) {
    const Vec v{u(rng), u(rng), 0.0};
    CHECK(interpolate(f, v, Extension::zero) == doctest::Approx(poly(v)).epsilon(1e-10));
  }
  CHECK(interpolate(f, {5.0, 0.0, 0.0}, Extension::zero) == 0.0);
  CHECK(interpolate(f, {4.5, 0.0, 0.0}, Extension::extrapolate) == doctest::Approx(poly({4.5, 0.0, 0.0})));
  CHECK(interpolation_error_estimate(f) < 1e-10);
}

TEST_CASE("entropy and relative entropy") {
  const auto g = make_grid(2, 6.0, 41);
  const auto m = maxwellian_field(g);
  // Entropy of the standard Gaussian in d = 2 is 1 + log(2 pi).
  CHECK(entropy(m) == doctest::Approx(1.0 + std::log(2 * kPi)).epsilon(1e-6));
  CHECK(relative_entropy(m, m) == 0.0);
  auto two = m;
  for (auto& x : two.values) x *= 2.0;
  CHECK(relative_entropy(two, m) == doctest::Approx(2 * std::log(2.0) - 1.0).epsilon(1e-6));
  auto shifted = sample_field(g, [](const Vec& v) { return maxwellian(v - Vec{0.5, 0, 0}, 2); });
  CHECK(relative_entropy(shifted, m) == doctest::Approx(0.125).epsilon(1e-4));
  auto holes = m;
  holes.values[0] = 0.0;
  CHECK(code_of([&] { relative_entropy(m, holes); }) == ErrorCode::support_violation);
  auto neg = m;
  neg.values[5] = -1.0;
  CHECK(code_of([&] { entropy(neg); }) == ErrorCode::negative_mass);
}

TEST_CASE("sphere areas") {
  CHECK(sphere_area(2) == doctest::Approx(2 * kPi));
  CHECK(sphere_area(3) == doctest::Approx(4 * kPi));
}

TEST_CASE("equilibrium collision rate") {
  // |g| has a conical kink at 0, so the trapezoid error decays like a power of the spacing.
  const double e241 = std::abs(equilibrium_collision_rate(2) - 2 * std::sqrt(kPi));
  const double e481 = std::abs(equilibrium_collision_rate(2, 481) - 2 * std::sqrt(kPi));
  CHECK(e241 < 1e-4 * 2 * std::sqrt(kPi));
  CHECK(e481 < e241 / 4);
  CHECK(equilibrium_collision_rate(3, 121) == doctest::Approx(4 * std::sqrt(kPi)).epsilon(1e-3));
  CHECK(equilibrium_mean_free_time(2) == doctest::Approx(1.0 / (2 * std::sqrt(kPi))));
}

TEST_CASE("collision operator vanishes on the Maxwellian") {
  const auto g = make_grid(2, 6.0, 31);
  QuadratureOptions o;
  o.samples = 20000;
  const auto c = collision_operator_apply(maxwellian_field(g), o);
  CHECK(c.max_abs() <= c.max_tolerance());
}

TEST_CASE("noise covariance against deterministic product quadrature") {
  const auto g = make_grid(2, 6.0, 41);
  const auto M = maxwellian_field(g);
  const VelocityFunction h1 = [](const Vec& v) { return v[0] * v[0]; };
  const VelocityFunction h2 = [](const Vec& v) { return v[0] * v[1]; };
  QuadratureOptions o;
  o.samples = 200000;
  const auto a = ldp::noise_covariance(h1, h1, M, o);
  const auto b = ldp::noise_covariance(h1, h2, M, o);

  // Trapezoid on [-6, 6]^2 per velocity with midpoint angles.
  const int n = 25, na = 64;
  const double h = 12.0 / (n - 1);
  std::vector<double> xs(n);
  for (int i = 0; i < n; ++i) xs[i] = -6.0 + i * h;
  double ra = 0.0, rb = 0.0;
  for (double a0 : xs)
    for (double a1 : xs)
      for (double b0 : xs)
        for (double b1 : xs) {
          const Vec v{a0, a1, 0}, w{b0, b1, 0};
          const double mm = maxwellian(v, 2) * maxwellian(w, 2) * h * h * h * h;
          if (mm < 1e-18) continue;
          for (int k = 0; k < na; ++k) {
            const double th = 2 * kPi * (k + 0.5) / na;
            const Vec om{std::cos(th), std::sin(th), 0};
            const double c = dot(v - w, om);
            if (c <= 0.0) continue;
            const auto [vp, wp] = scatter(v, w, om);
            const double d1 = h1(vp) + h1(wp) - h1(v) - h1(w);
            const double d2 = h2(vp) + h2(wp) - h2(v) - h2(w);
            const double base = 0.5 * mm * c * (2 * kPi / na);
            ra += base * d1 * d1;
            rb += base * d1 * d2;
          }
        }
  CHECK(std::abs(a.value - ra) <= a.tolerance + 0.01 * std::abs(ra));
  CHECK(std::abs(b.value - rb) <= b.tolerance + 0.01 * std::abs(ra));
}

TEST_CASE("linearized operator: invariants, sign, semigroup, tau = 0 prediction") {
  const auto g = make_grid(2, 6.0, 21);
  LinearizedOptions o;
  o.samples = 100000;
  const auto L = build_linearized_matrix(g, o);
  CHECK(L.invariant_residual <= L.tol_L);
  CHECK(L.antisymmetry() < 1e-10);

  Engine rng = make_engine(8);
  std::normal_distribution<double> n01;
  for (int k = 0; k < 5; ++k) {
    VelocityGridField h{g, std::vector<double>(g.size())};
    for (auto& x : h.values) x = n01(rng);
    const auto Kh = L.apply(h);
    CHECK(m_inner(h, Kh) <= 1e-10 * m_inner(h, h));
  }

  for (const auto& inv : invariant_fields(g)) {
    const auto e = semigroup_apply(L, inv, 0.5);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(e.values[i] - inv.values[i]) < 1e-6);
  }

  const auto v2 = sample_field(g, [](const Vec& v) { return v[0] * v[0] - 1.0; });
  const auto p0 = ldp::predict_equilibrium_covariance(L, v2, v2, 0.3, 0.3);
  CHECK(p0.value == doctest::Approx(ldp::initial_field_covariance(v2, v2, maxwellian_field(g))));
  // He2 relaxes: the correlation decreases in tau.
  const auto p1 = ldp::predict_equilibrium_covariance(L, v2, v2, 0.0, 0.5);
  CHECK(p1.value < p0.value);
  CHECK(code_of([&] { ldp::predict_equilibrium_covariance(L, v2, v2, 0.5, 0.0); }) == ErrorCode::malformed_spec);
  CHECK(code_of([] { build_linearized_matrix(make_grid(3, 6.0, 41)); }) == ErrorCode::size_guard);
}

TEST_CASE("DSMC without collisions is free transport") {
  DsmcConfig c;
  c.f0.spatial = ensembles::SpatialProfile::cosine;
  c.f0.cos_amplitude = 0.3;
  c.T = 0.2;
  c.particles = 100000;
  c.collisions = false;
  c.output_times = {0.0, 0.1, 0.2};
  c.observables = {make_fourier_hermite({1, 0, 0}, {0, 0, 0})};
  const auto r = dsmc_solve(c);
  REQUIRE(r.outputs.size() == 3);
  CHECK(r.collisions == 0);
  const double sd = 0.71 / std::sqrt(static_cast<double>(c.particles));
  for (const auto& o : r.outputs) {
    const double w = 2 * kPi * o.time;
    CHECK(std::abs(o.means[0] - 0.15 * std::exp(-w * w / 2)) < 5 * sd);
  }
}

TEST_CASE("DSMC collisions conserve momentum and energy") {
  DsmcConfig c;
  c.f0.velocity = ensembles::VelocityLaw::bimodal;
  c.T = 0.5;
  c.particles = 20000;
  c.output_times = {0.0, 0.5};
  const auto r = dsmc_solve(c);
  CHECK(r.collisions > 0);
  const auto& a = r.outputs.front();
  const auto& b = r.outputs.back();
  CHECK(std::abs(b.energy - a.energy) <= 1e-9 * a.energy);
  for (int k = 0; k < 2; ++k) CHECK(std::abs(b.momentum[k] - a.momentum[k]) <= 1e-9);

  auto bad = c;
  bad.dt = 0.1;
  CHECK(code_of([&] { dsmc_solve(bad); }) == ErrorCode::malformed_spec);
  bad = c;
  bad.particles = 100;
  CHECK(code_of([&] { dsmc_solve(bad); }) == ErrorCode::malformed_spec);
}

TEST_CASE("Kac process conserves invariants") {
  KacConfig c;
  c.particles = 2000;
  c.output_times = {0.0, 0.5, 1.0};
  const auto r = kac_homogeneous(c);
  CHECK(r.collisions > 0);
  const auto& a = r.outputs.front();
  for (const auto& o : r.outputs) {
    CHECK(std::abs(o.energy - a.energy) <= 1e-9 * a.energy);
    for (int k = 0; k < 2; ++k) CHECK(std::abs(o.momentum[k] - a.momentum[k]) <= 1e-9 * c.particles);
  }
  auto bad = c;
  bad.particles = 10;
  CHECK(code_of([&] { kac_homogeneous(bad); }) == ErrorCode::malformed_spec);
  bad = c;
  bad.observables = {make_fourier_hermite({1, 0, 0}, {0, 0, 0})};
  CHECK(code_of([&] { kac_homogeneous(bad); }) == ErrorCode::malformed_spec);
}

TEST_CASE("Hamiltonian: zero bias, overflow guard, Legendre integrand") {
  const auto g = make_grid(2, 6.0, 31);
  const auto M = maxwellian_field(g);
  VelocityGridField zero{g, std::vector<double>(g.size(), 0.0)};
  QuadratureOptions o;
  o.samples = 5000;
  CHECK(ldp::hamiltonian({M, zero}, o).value == 0.0);
  CHECK(ldp::legendre_integrand(M, zero, zero, o).value == 0.0);
  VelocityGridField big{g, std::vector<double>(g.size(), 0.0)};
  big.values[g.size() / 2] = 6.0;
  CHECK(code_of([&] { ldp::hamiltonian({M, big}, o); }) == ErrorCode::exp_overflow);
  // Collision invariants leave exp(Delta p) = 1.
  const auto energy = sample_field(g, [](const Vec& v) { return 0.05 * norm2(v); });
  const auto h = ldp::hamiltonian({M, energy}, o);
  CHECK(std::abs(h.value) <= h.tolerance);
}
