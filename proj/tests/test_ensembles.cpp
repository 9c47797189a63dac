#include <doctest.h>

#include "hsl/ensembles.hpp"
#include "hsl/rng.hpp"
#include "hsl/stats.hpp"

using namespace hsl;
using namespace hsl::ensembles;

namespace {

bool brute_overlap(const std::vector<Vec>& xs, int d, double eps) {
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = i + 1; j < xs.size(); ++j)
      if (torus_distance(xs[i], xs[j], d) < eps) return true;
  return false;
}

}  // namespace

TEST_CASE("overlap detection agrees with the all-pairs scan") {
  Engine rng = make_engine(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = trial % 2 ? 3 : 2;
    std::vector<Vec> xs(40);
    for (auto& x : xs) x = {u(rng), u(rng), d == 3 ? u(rng) : 0.0};
    const double eps = 0.01 + 0.05 * u(rng);
    CHECK(has_overlap(xs, d, eps) == brute_overlap(xs, d, eps));
  }
}

TEST_CASE("grand-canonical sampler: Poisson count, exclusion, velocity law") {
  const auto scaling = validate_scaling(2, 1e-2);
  std::vector<double> counts, v1;
  for (std::uint64_t s = 0; s < 400; ++s) {
    const auto [sys, rep] = sample_equilibrium(scaling, derive_seed(5, s));
    CHECK_FALSE(brute_overlap(sys.positions, 2, scaling.eps));
    CHECK(rep.realized_n == sys.size());
    counts.push_back(static_cast<double>(sys.size()));
    for (const auto& v : sys.velocities) v1.push_back(v[0]);
  }
  const auto m = stats::moments(counts);
  // Exclusion conditions on an event of probability close to one, so the count
  // stays Poisson(mu) to within sampling error.
  CHECK(std::abs(m.mean - scaling.mu) < 4.0 * std::sqrt(scaling.mu / 400.0) + 1.0);
  const auto chi = stats::chi_square_equiprobable(v1, stats::normal_cdf, 20, 0.001);
  CHECK(chi.passed);
}

TEST_CASE("cosine profile: mean of cos(2 pi x) is a / 2") {
  GrandCanonicalSpec spec;
  spec.scaling = validate_scaling(2, 1e-3);
  spec.f0.spatial = SpatialProfile::cosine;
  spec.f0.cos_amplitude = 0.3;
  SamplerOptions o;
  o.exclusion = false;
  double acc = 0.0;
  std::size_t n = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    spec.seed = s;
    const auto sys = sample_grand_canonical(spec, o).first;
    for (const auto& x : sys.positions) acc += std::cos(2 * kPi * x[0]);
    n += sys.size();
  }
  // sd of cos under the profile is about 0.7; n is about 5e4
  CHECK(std::abs(acc / n - 0.15) < 4.0 * 0.71 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("bimodal velocity law moments") {
  InitialDensitySpec f0;
  f0.velocity = VelocityLaw::bimodal;
  f0.bimodal_shift = 1.5;
  f0.bimodal_sigma = 0.5;
  CHECK(f0.mean_velocity(2)[0] == doctest::Approx(0.0));
  CHECK(f0.mean_energy(2) == doctest::Approx(1.5 * 1.5 + 2 * 0.25));
  Engine rng = make_engine(2);
  double e = 0.0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) e += norm2(f0.sample_velocity(rng, 2));
  CHECK(e / n == doctest::Approx(f0.mean_energy(2)).epsilon(0.01));
}

TEST_CASE("density spec validation and json round trip") {
  InitialDensitySpec f0;
  f0.spatial = SpatialProfile::cosine;
  f0.cos_amplitude = 0.8;
  CHECK_THROWS_AS(f0.validate(2), Error);
  f0.cos_amplitude = 0.2;
  f0.cos_axis = 1;
  const auto back = initial_density_from_json(to_json(f0));
  CHECK(back.cos_amplitude == doctest::Approx(0.2));
  CHECK(back.cos_axis == 1);
  CHECK(back.spatial_density({0.0, 0.0, 0.0}) == doctest::Approx(1.2));
}

TEST_CASE("rejection budget") {
  GrandCanonicalSpec spec;
  // mu = 150, eps = 0.02: about 14 expected close pairs, so one attempt almost never succeeds.
  spec.scaling = validate_scaling(2, 0.02, 1.0 / 3.0);
  SamplerOptions o;
  o.max_attempts = 1;
  bool threw = false;
  for (std::uint64_t s = 0; s < 20 && !threw; ++s) {
    spec.seed = s;
    try {
      sample_grand_canonical(spec, o);
    } catch (const Error& e) {
      threw = e.code() == ErrorCode::rejection_budget_exhausted;
    }
  }
  CHECK(threw);
}
