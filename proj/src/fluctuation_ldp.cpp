#include "hsl/fluctuation_ldp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hsl/core_model.hpp"
#include "hsl/stats.hpp"

namespace hsl::ldp {

using kinetic::Extension;
using kinetic::interpolate;
using kinetic::PairSampler;

namespace {

double x_factor(const TestFunctionSpec& s, const Vec& x, int d) {
  switch (s.kind) {
    case TestFunctionKind::fourier_hermite: {
      double phase = 0.0;
      for (int a = 0; a < d; ++a) phase += s.modes[a] * x[a];
      phase *= 2.0 * kPi;
      return s.sine ? std::sin(phase) : std::cos(phase);
    }
    case TestFunctionKind::gaussian_bump:
      if (s.width_x > 0.0) return std::exp(-norm2(minimal_image(s.center_x, x, d)) / (2.0 * s.width_x * s.width_x));
      return 1.0;
    default:
      return 1.0;
  }
}

double v_factor(const TestFunctionSpec& s, const Vec& v, int d) {
  switch (s.kind) {
    case TestFunctionKind::fourier_hermite: {
      double h = s.amplitude;
      for (int a = 0; a < d; ++a) h *= hermite_he(s.hermite[a], v[a]);
      return h;
    }
    case TestFunctionKind::gaussian_bump:
      return s.amplitude * std::exp(-norm2(v - s.center_v) / (2.0 * s.width_v * s.width_v));
    default:
      return eval_test_function(s, Vec{0.0, 0.0, 0.0}, v, d);
  }
}

template <class F>
double tensor_sum(int d, int n, double lo, double step, F&& f) {
  double acc = 0.0;
  Vec p{0.0, 0.0, 0.0};
  if (d == 2) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        p = {lo + i * step, lo + j * step, 0.0};
        acc += f(p);
      }
  } else {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          p = {lo + i * step, lo + j * step, lo + k * step};
          acc += f(p);
        }
  }
  return acc * std::pow(step, d);
}

double tail_mass(const kinetic::LinearizedOperatorMatrix& L, const VelocityGridField& h1, const VelocityGridField& h2) {
  std::vector<bool> active(L.grid.size(), false);
  for (std::size_t i : L.active) active[i] = true;
  double s = 0.0;
  for (std::size_t i = 0; i < L.grid.size(); ++i)
    if (!active[i]) s += maxwellian(L.grid.node(i), L.grid.d) * std::abs(h1.values[i] * h2.values[i]);
  return 2.0 * s * L.grid.weight();
}

double pairing_M(const VelocityGridField& a, const VelocityGridField& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i)
    s += maxwellian(a.grid.node(i), a.grid.d) * a.values[i] * b.values[i];
  return s * a.grid.weight();
}

}  // namespace

VelocityFunction velocity_function(const TestFunctionSpec& h, int d) {
  if (h.depends_on_x()) throw Error(ErrorCode::malformed_spec, "velocity-only test function required");
  return [h, d](const Vec& v) { return eval_test_function(h, Vec{0.0, 0.0, 0.0}, v, d); };
}

QuadratureValue noise_covariance(const VelocityFunction& h1, const VelocityFunction& h2, const VelocityGridField& f,
                                 const QuadratureOptions& opt) {
  for (double x : f.values)
    if (x < 0.0) throw Error(ErrorCode::negative_mass, "noise covariance needs f >= 0");
  PairSampler sampler(f.grid.d, opt.proposal_sigma, opt.seed);
  double s1 = 0.0, s2 = 0.0, leak = 0.0, mass = 0.0;
  for (std::size_t k = 0; k < opt.samples; ++k) {
    const auto p = sampler.next();
    double x = 0.0;
    if (p.weight > 0.0) {
      const double ff = p.weight * interpolate(f, p.v, Extension::zero) * interpolate(f, p.v1, Extension::zero);
      const double d1 = h1(p.vp) + h1(p.v1p) - h1(p.v) - h1(p.v1);
      const double d2 = h2(p.vp) + h2(p.v1p) - h2(p.v) - h2(p.v1);
      x = 0.5 * ff * d1 * d2;
      mass += std::abs(ff);
      if (!f.grid.contains(p.vp) || !f.grid.contains(p.v1p)) leak += std::abs(ff);
    }
    s1 += x;
    s2 += x * x;
  }
  if (mass > 0.0 && leak / mass > opt.max_leak)
    throw Error(ErrorCode::cutoff_leak, "scattered velocities leave the grid");
  const double n = static_cast<double>(opt.samples);
  QuadratureValue r;
  r.value = s1 / n;
  r.tolerance = stats::kConfidenceZ * std::sqrt(std::max(0.0, s2 / n - r.value * r.value) / n);
  return r;
}

double initial_field_covariance(const TestFunctionSpec& h, const TestFunctionSpec& g,
                                const ensembles::InitialDensitySpec& f0, int d) {
  validate(h, d);
  validate(g, d);
  f0.validate(d);
  const int nx = 64;
  const double ix = tensor_sum(d, nx, 0.0, 1.0 / nx, [&](const Vec& x) {
    return f0.spatial_density(x) * x_factor(h, x, d) * x_factor(g, x, d);
  });
  const int nv = d == 2 ? 401 : 201;
  const double step = 20.0 / (nv - 1);
  const double iv = tensor_sum(d, nv, -10.0, step, [&](const Vec& v) {
    return f0.velocity_density(v, d) * v_factor(h, v, d) * v_factor(g, v, d);
  });
  return ix * iv;
}

double initial_field_covariance(const VelocityGridField& h, const VelocityGridField& g, const VelocityGridField& f) {
  if (h.values.size() != f.values.size() || g.values.size() != f.values.size())
    throw Error(ErrorCode::malformed_spec, "grid mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < f.values.size(); ++i) s += f.values[i] * h.values[i] * g.values[i];
  return s * f.grid.weight();
}

CovariancePrediction predict_equilibrium_covariance(const kinetic::LinearizedOperatorMatrix& L,
                                                    const VelocityGridField& h1, const VelocityGridField& h2,
                                                    double theta1, double theta2,
                                                    const kinetic::SemigroupOptions& opt) {
  const double tau = theta2 - theta1;
  if (!(tau >= 0.0)) throw Error(ErrorCode::malformed_spec, "predictions need theta2 >= theta1");
  CovariancePrediction p;
  p.theta1 = theta1;
  p.theta2 = theta2;
  if (tau == 0.0) {
    p.value = initial_field_covariance(h1, h2, kinetic::maxwellian_field(L.grid));
  } else {
    using V = kinetic::LinearizedOperatorMatrix::Variant;
    p.value = pairing_M(h1, kinetic::semigroup_apply(L, h2, tau, opt));
    const double a = pairing_M(h1, kinetic::semigroup_apply(L, h2, tau, opt, V::half_a));
    const double b = pairing_M(h1, kinetic::semigroup_apply(L, h2, tau, opt, V::half_b));
    p.quadrature_error = stats::kConfidenceZ * 0.5 * std::abs(a - b);
    auto fine = opt;
    fine.rel_tol *= 0.5;
    fine.abs_tol *= 0.5;
    const double c = pairing_M(h1, kinetic::semigroup_apply(L, h2, tau, fine));
    p.semigroup_error = std::abs(c - p.value);
    p.grid_error = tail_mass(L, h1, h2);
  }
  p.error_budget = p.quadrature_error + p.semigroup_error + p.grid_error;
  return p;
}

CovariancePrediction predict_equilibrium_covariance(const kinetic::LinearizedOperatorMatrix& L,
                                                    const TestFunctionSpec& h1, const TestFunctionSpec& h2,
                                                    double theta1, double theta2,
                                                    const kinetic::SemigroupOptions& opt) {
  const int d = L.grid.d;
  const auto f1 = kinetic::sample_field(L.grid, velocity_function(h1, d));
  const auto f2 = kinetic::sample_field(L.grid, velocity_function(h2, d));
  auto p = predict_equilibrium_covariance(L, f1, f2, theta1, theta2, opt);
  p.h1 = h1.name;
  p.h2 = h2.name;
  ensembles::InitialDensitySpec eq;
  const double exact0 = initial_field_covariance(h1, h2, eq, d);
  const double grid0 = initial_field_covariance(f1, f2, kinetic::maxwellian_field(L.grid));
  p.grid_error += std::abs(exact0 - grid0);
  p.error_budget = p.quadrature_error + p.semigroup_error + p.grid_error;
  return p;
}

void RateFunctionalInput::validate() const {
  if (phi.values.size() != p.values.size()) throw Error(ErrorCode::malformed_spec, "phi and p live on different grids");
  for (double x : phi.values)
    if (x < 0.0 || !std::isfinite(x)) throw Error(ErrorCode::negative_mass, "phi must be nonnegative and finite");
  for (double x : p.values)
    if (!std::isfinite(x)) throw Error(ErrorCode::malformed_spec, "bias field not finite");
}

namespace {

double no_rounding(const kinetic::PairSample&) { return 0.0; }

// `rounding` bounds the floating-point error of the integrand at a sample; it is
// integrated against the kernel and added to the statistical tolerance.
template <class F, class G = decltype(&no_rounding)>
QuadratureValue pair_average(const VelocityGridField& phi, const QuadratureOptions& opt, F&& integrand,
                             G&& rounding = &no_rounding) {
  PairSampler sampler(phi.grid.d, opt.proposal_sigma, opt.seed);
  double s1 = 0.0, s2 = 0.0, err = 0.0;
  for (std::size_t k = 0; k < opt.samples; ++k) {
    const auto p = sampler.next();
    double x = 0.0;
    if (p.weight > 0.0) {
      const double ff = interpolate(phi, p.v, Extension::zero) * interpolate(phi, p.v1, Extension::zero);
      if (ff != 0.0) {
        x = 0.5 * p.weight * ff * integrand(p);
        err += 0.5 * p.weight * ff * rounding(p);
      }
    }
    s1 += x;
    s2 += x * x;
  }
  const double n = static_cast<double>(opt.samples);
  QuadratureValue r;
  r.value = s1 / n;
  r.tolerance = stats::kConfidenceZ * std::sqrt(std::max(0.0, s2 / n - r.value * r.value) / n) + err / n;
  return r;
}

double delta(const VelocityGridField& p, const kinetic::PairSample& s) {
  return interpolate(p, s.vp, Extension::extrapolate) + interpolate(p, s.v1p, Extension::extrapolate) -
         interpolate(p, s.v, Extension::extrapolate) - interpolate(p, s.v1, Extension::extrapolate);
}

void guard_bias(const VelocityGridField& p, double scale = 1.0) {
  for (double x : p.values)
    if (std::abs(scale * x) > kMaxBias) throw Error(ErrorCode::exp_overflow, "bias field exceeds the sup-norm guard 5");
}

}  // namespace

QuadratureValue hamiltonian(const RateFunctionalInput& in, const QuadratureOptions& opt) {
  in.validate();
  guard_bias(in.p);
  double pmax = 0.0;
  for (double x : in.p.values) pmax = std::max(pmax, std::abs(x));
  // Four interpolations of 4^d-term stencils: a generous bound on the rounding of Delta p.
  const double dp_err = 256.0 * std::numeric_limits<double>::epsilon() * pmax;
  return pair_average(
      in.phi, opt, [&](const kinetic::PairSample& s) { return std::expm1(delta(in.p, s)); },
      [&](const kinetic::PairSample& s) { return std::exp(delta(in.p, s)) * dp_err; });
}

GradientCheck hamiltonian_gradient_check(const VelocityGridField& phi, const VelocityGridField& q, double s,
                                         const QuadratureOptions& opt) {
  RateFunctionalInput probe{phi, q};
  probe.validate();
  guard_bias(q, s);
  const auto est = pair_average(phi, opt, [&](const kinetic::PairSample& ps) {
    const double dq = delta(q, ps);
    return 2.0 * std::expm1(0.5 * s * dq) / (0.5 * s) - std::expm1(s * dq) / s;
  });
  const auto c = kinetic::collision_operator_apply(phi, opt);
  double ref = 0.0, ref_tol = 0.0;
  const double w = phi.grid.weight();
  for (std::size_t i = 0; i < phi.values.size(); ++i) {
    ref += w * q.values[i] * c.value.values[i];
    ref_tol += w * std::abs(q.values[i]) * c.tolerance[i];
  }
  GradientCheck g;
  g.richardson = est.value;
  g.reference = ref;
  g.tolerance = 1e-3 * std::abs(ref) + est.tolerance + ref_tol;
  g.passed = std::abs(g.richardson - g.reference) <= g.tolerance;
  return g;
}

QuadratureValue legendre_integrand(const VelocityGridField& phi, const VelocityGridField& dphi_dt,
                                   const VelocityGridField& p, const QuadratureOptions& opt) {
  const auto h = hamiltonian(RateFunctionalInput{phi, p}, opt);
  double pairing = 0.0;
  for (std::size_t i = 0; i < p.values.size(); ++i) pairing += p.values[i] * dphi_dt.values[i];
  pairing *= p.grid.weight();
  return {pairing - h.value, h.tolerance};
}

}  // namespace hsl::ldp
