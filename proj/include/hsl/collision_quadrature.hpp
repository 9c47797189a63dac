#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "hsl/rng.hpp"
#include "hsl/velocity_grid.hpp"

namespace hsl::kinetic {

using VelocityFunction = std::function<double(const Vec&)>;

/// Surface area of the unit sphere S^{d-1}.
double sphere_area(int d);

Vec uniform_direction(Engine& rng, int d);

/// Post-collisional pair for contact direction omega (|omega| = 1).
inline std::pair<Vec, Vec> scatter(const Vec& v, const Vec& v1, const Vec& omega) {
  const double c = dot(v - v1, omega);
  return {v - c * omega, v1 + c * omega};
}

struct QuadratureOptions {
  std::size_t samples = 20000;
  std::uint64_t seed = 1;
  /// Standard deviation of the isotropic Gaussian importance density for v1.
  double proposal_sigma = 1.25;
  /// cutoff-leak fires above this fraction of quadrature mass.
  double max_leak = 0.01;
};

double proposal_density(const Vec& v, int d, double sigma);
Vec sample_proposal(Engine& rng, int d, double sigma);

/// (v, v1) drawn independently from the proposal, omega uniform; `weight`
/// is |S^{d-1}| ((v - v1).omega)_+ / (g(v) g(v1)), so that
/// E[weight * F] = iint int F(v, v1, omega) ((v - v1).omega)_+ domega dv dv1.
struct PairSample {
  Vec v, v1, vp, v1p;
  double weight = 0.0;
};

class PairSampler {
 public:
  PairSampler(int d, double sigma, std::uint64_t seed);
  PairSample next();

 private:
  int d_;
  double sigma_;
  Engine rng_;
};

struct CollisionResult {
  VelocityGridField value;
  /// Per-node tolerance: 3 standard errors, the dropped off-grid gain (estimated
  /// by the matching loss), and a Richardson estimate of the interpolation error
  /// (comparison with the every-second-node interpolant).
  std::vector<double> tolerance;
  double leak_fraction = 0.0;
  double interpolation_error = 0.0;

  double max_abs() const;
  double max_tolerance() const;
};

/// Monte Carlo C(phi, psi)(v) at every node:
/// iint [phi(v') psi(v1') - phi(v) psi(v1)] ((v - v1).omega)_+ domega dv1,
/// with common (v1, omega) samples across nodes. Off-grid values are zero.
CollisionResult collision_operator_apply(const VelocityGridField& phi, const VelocityGridField& psi,
                                         const QuadratureOptions& options = {});

inline CollisionResult collision_operator_apply(const VelocityGridField& phi, const QuadratureOptions& options = {}) {
  return collision_operator_apply(phi, phi, options);
}

struct WeakFormCheck {
  double lhs = 0.0;
  double lhs_tolerance = 0.0;
  double rhs = 0.0;
  double rhs_tolerance = 0.0;

  bool agree() const;
};

/// lhs = int q C(phi, phi) dv from the node quadrature; rhs = 1/2 iiint phi phi1 b (q' + q1' - q - q1)
/// from an independent pair quadrature.
WeakFormCheck weak_form_check(const VelocityGridField& phi, const VelocityFunction& q,
                              const QuadratureOptions& options = {});

}  // namespace hsl::kinetic
