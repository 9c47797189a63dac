#include "hsl/linearized.hpp"

#include <algorithm>
#include <cmath>

#include <boost/numeric/odeint.hpp>

#include "hsl/collision_quadrature.hpp"
#include "hsl/core_model.hpp"
#include "hsl/rng.hpp"

namespace hsl::kinetic {

const Eigen::MatrixXd& LinearizedOperatorMatrix::matrix(Variant v) const {
  switch (v) {
    case Variant::half_a: return half_a;
    case Variant::half_b: return half_b;
    default: return K;
  }
}

Eigen::VectorXd LinearizedOperatorMatrix::restrict(const VelocityGridField& h) const {
  if (h.values.size() != grid.size()) throw Error(ErrorCode::malformed_spec, "field grid does not match operator");
  Eigen::VectorXd x(active.size());
  for (std::size_t p = 0; p < active.size(); ++p) x[p] = h.values[active[p]];
  return x;
}

VelocityGridField LinearizedOperatorMatrix::extend(const Eigen::VectorXd& x, const VelocityGridField& fallback) const {
  VelocityGridField out = fallback;
  for (std::size_t p = 0; p < active.size(); ++p) out.values[active[p]] = x[p];
  return out;
}

VelocityGridField LinearizedOperatorMatrix::apply(const VelocityGridField& h, Variant v) const {
  VelocityGridField zero{grid, std::vector<double>(grid.size(), 0.0)};
  return extend(matrix(v) * restrict(h), zero);
}

VelocityGridField LinearizedOperatorMatrix::apply_density(const VelocityGridField& g) const {
  Eigen::VectorXd x = restrict(g);
  Eigen::VectorXd m(active.size());
  for (std::size_t p = 0; p < active.size(); ++p) m[p] = maxwellian(grid.node(active[p]), grid.d);
  Eigen::VectorXd y = (K * x.cwiseQuotient(m)).cwiseProduct(m);
  VelocityGridField zero{grid, std::vector<double>(grid.size(), 0.0)};
  return extend(y, zero);
}

double LinearizedOperatorMatrix::antisymmetry() const {
  const double w = grid.weight();
  Eigen::VectorXd dm(active.size());
  for (std::size_t p = 0; p < active.size(); ++p) dm[p] = w * maxwellian(grid.node(active[p]), grid.d);
  const Eigen::MatrixXd A = dm.asDiagonal() * K;
  const double scale = A.cwiseAbs().maxCoeff();
  if (!(scale > 0.0)) return 0.0;
  return (A - A.transpose()).cwiseAbs().maxCoeff() / scale;
}

std::vector<VelocityGridField> invariant_fields(const VelocityGrid& grid) {
  std::vector<VelocityGridField> out;
  out.push_back(sample_field(grid, [](const Vec&) { return 1.0; }));
  for (int a = 0; a < grid.d; ++a) out.push_back(sample_field(grid, [a](const Vec& v) { return v[a]; }));
  out.push_back(sample_field(grid, [](const Vec& v) { return norm2(v); }));
  return out;
}

LinearizedOperatorMatrix build_linearized_matrix(const VelocityGrid& grid, const LinearizedOptions& opt) {
  grid.validate();
  if (grid.v_max < 5.0) throw Error(ErrorCode::malformed_spec, "linearized operator needs a velocity cutoff >= 5");
  if (grid.size() > kMaxLinearizedNodes)
    throw Error(ErrorCode::size_guard, "dense linearized matrix limited to " + std::to_string(kMaxLinearizedNodes) +
                                           " nodes");
  if (opt.samples < 2) throw Error(ErrorCode::malformed_spec, "linearized quadrature needs samples");
  const int d = grid.d;
  const double w = grid.weight();
  const double sigma = opt.proposal_sigma;
  const double n_samples = static_cast<double>(opt.samples);

  LinearizedOperatorMatrix L;
  L.grid = grid;
  L.samples = opt.samples;
  L.seed = opt.seed;
  L.min_expected_samples = opt.min_expected_samples;

  std::vector<long> compact(grid.size(), -1);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (n_samples * w * proposal_density(grid.node(i), d, sigma) >= opt.min_expected_samples) {
      compact[i] = static_cast<long>(L.active.size());
      L.active.push_back(i);
    }
  }
  const std::size_t n = L.active.size();
  Eigen::MatrixXd GA = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd GB = Eigen::MatrixXd::Zero(n, n);

  PairSampler sampler(d, sigma, opt.seed);
  std::vector<double> coef(n, 0.0);
  std::vector<std::size_t> touched;
  touched.reserve(256);
  std::size_t dropped = 0;
  const double half = 0.5 * n_samples;

  for (std::size_t k = 0; k < opt.samples; ++k) {
    const auto s = sampler.next();
    if (!(s.weight > 0.0)) continue;
    const Vec vs[4] = {s.vp, s.v1p, s.v, s.v1};
    const double sign[4] = {1.0, 1.0, -1.0, -1.0};
    bool cold = false;
    touched.clear();
    for (int q = 0; q < 4 && !cold; ++q) {
      const auto st = interpolation_stencil(grid, vs[q], Extension::extrapolate);
      for (int m = 0; m < st.count; ++m) {
        const long c = compact[st.index[m]];
        if (c < 0) {
          cold = true;
          break;
        }
        if (coef[c] == 0.0) touched.push_back(static_cast<std::size_t>(c));
        coef[c] += sign[q] * st.weight[m];
      }
    }
    if (cold) {
      ++dropped;
      for (std::size_t c : touched) coef[c] = 0.0;
      continue;
    }
    const double f = -0.25 * s.weight * maxwellian(s.v, d) * maxwellian(s.v1, d) / half;
    Eigen::MatrixXd& G = (k % 2 == 0) ? GA : GB;
    for (std::size_t p : touched) {
      const double ap = f * coef[p];
      if (ap == 0.0) continue;
      for (std::size_t q : touched) G(p, q) += ap * coef[q];
    }
    for (std::size_t c : touched) coef[c] = 0.0;
  }
  L.dropped_fraction = static_cast<double>(dropped) / n_samples;

  Eigen::VectorXd inv_wm(n);
  for (std::size_t p = 0; p < n; ++p) inv_wm[p] = 1.0 / (w * maxwellian(grid.node(L.active[p]), d));
  L.half_a = inv_wm.asDiagonal() * GA;
  L.half_b = inv_wm.asDiagonal() * GB;
  L.K = 0.5 * (L.half_a + L.half_b);

  double residual = 0.0, scale = 0.0;
  for (const auto& inv : invariant_fields(grid)) {
    const Eigen::VectorXd x = L.restrict(inv);
    for (const auto* M : {&L.K, &L.half_a, &L.half_b}) residual = std::max(residual, ((*M) * x).cwiseAbs().maxCoeff());
    scale = std::max(scale, (L.K.cwiseAbs() * x.cwiseAbs()).maxCoeff());
  }
  L.invariant_residual = residual;
  L.tol_L = std::max(4.0 * residual, 1e-12 * scale);
  return L;
}

VelocityGridField semigroup_apply(const LinearizedOperatorMatrix& L, const VelocityGridField& h, double tau,
                                  const SemigroupOptions& opt, LinearizedOperatorMatrix::Variant variant) {
  if (!(tau >= 0.0)) throw Error(ErrorCode::malformed_spec, "semigroup time must be nonnegative");
  if (tau == 0.0) return h;
  using State = std::vector<double>;
  namespace odeint = boost::numeric::odeint;
  const Eigen::MatrixXd& K = L.matrix(variant);
  const Eigen::VectorXd x0 = L.restrict(h);
  State x(x0.data(), x0.data() + x0.size());
  const double amp = std::max(1.0, x0.cwiseAbs().maxCoeff());

  std::size_t evaluations = 0;
  const std::size_t budget = 12 * opt.max_steps;
  auto rhs = [&](const State& y, State& dydt, double) {
    if (++evaluations > budget) throw Error(ErrorCode::integrator_failure, "step budget exhausted");
    dydt.resize(y.size());
    Eigen::Map<const Eigen::VectorXd> ym(y.data(), static_cast<Eigen::Index>(y.size()));
    Eigen::Map<Eigen::VectorXd> dm(dydt.data(), static_cast<Eigen::Index>(dydt.size()));
    dm.noalias() = K * ym;
  };
  try {
    auto stepper = odeint::make_controlled<odeint::runge_kutta_dopri5<State>>(opt.abs_tol * amp, opt.rel_tol);
    odeint::integrate_adaptive(stepper, rhs, x, 0.0, tau, std::min(tau, 1e-3));
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::integrator_failure, e.what());
  }
  for (double v : x)
    if (!std::isfinite(v)) throw Error(ErrorCode::integrator_failure, "non-finite semigroup state");
  return L.extend(Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size())), h);
}

}  // namespace hsl::kinetic
