#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "hsl/velocity_grid.hpp"

namespace hsl::kinetic {

/// Homogeneous linearized collision operator acting on fluctuations h with
/// f = M (1 + h):
///   (K h)(v) = iint M(v1) ((v - v1).omega)_+ [h(v') + h(v1') - h(v) - h(v1)] domega dv1.
///
/// Assembled from the symmetric weak form
///   <a, K b>_M = -1/4 iiint M M1 b (Delta a)(Delta b),
/// with the test functions represented by cubic interpolation of node values.
/// Each quadrature sample contributes a rank-one term whose Delta vector
/// annihilates 1, v and |v|^2 exactly, so invariants are killed up to rounding
/// and K is self-adjoint and nonpositive in the M-weighted product.
///
/// Pairs (v, v1) are drawn from a Gaussian proposal wider than M. Nodes where
/// fewer than `min_expected_samples` proposal points are expected per cell carry
/// no rows (K h = 0 there); samples whose stencils touch them are dropped. This
/// keeps every entry of K bounded, so the semigroup stays non-stiff.
struct LinearizedOperatorMatrix {
  VelocityGrid grid;
  /// Node indices of the active block, ascending.
  std::vector<std::size_t> active;
  Eigen::MatrixXd K;
  /// Same operator from the two disjoint halves of the samples; K = (half_a + half_b) / 2.
  Eigen::MatrixXd half_a;
  Eigen::MatrixXd half_b;

  std::size_t samples = 0;
  std::uint64_t seed = 0;
  double min_expected_samples = 0.0;
  double dropped_fraction = 0.0;
  /// Declared bound on |K . invariant| at every node.
  double tol_L = 0.0;
  /// Largest measured |K . invariant| over 1, v_j, |v|^2.
  double invariant_residual = 0.0;

  enum class Variant { mean, half_a, half_b };

  const Eigen::MatrixXd& matrix(Variant v) const;
  VelocityGridField apply(const VelocityGridField& h, Variant v = Variant::mean) const;
  /// Density form: g -> M K (g / M), i.e. C(g, M) + C(M, g), on active nodes.
  VelocityGridField apply_density(const VelocityGridField& g) const;
  /// Largest entry of the antisymmetric part of diag(wM) K, relative scale of K.
  double antisymmetry() const;

  Eigen::VectorXd restrict(const VelocityGridField& h) const;
  VelocityGridField extend(const Eigen::VectorXd& x, const VelocityGridField& fallback) const;
};

struct LinearizedOptions {
  std::size_t samples = 600000;
  std::uint64_t seed = 7;
  double proposal_sigma = 1.5;
  double min_expected_samples = 4.0;
};

inline constexpr std::size_t kMaxLinearizedNodes = 5000;

LinearizedOperatorMatrix build_linearized_matrix(const VelocityGrid& grid, const LinearizedOptions& options = {});

struct SemigroupOptions {
  double rel_tol = 1e-8;
  double abs_tol = 1e-12;
  std::size_t max_steps = 200000;
};

/// e^{tau K} h by an adaptive Dormand-Prince integrator.
VelocityGridField semigroup_apply(const LinearizedOperatorMatrix& L, const VelocityGridField& h, double tau,
                                  const SemigroupOptions& options = {},
                                  LinearizedOperatorMatrix::Variant variant = LinearizedOperatorMatrix::Variant::mean);

/// Node values of 1, v_1..v_d and |v|^2.
std::vector<VelocityGridField> invariant_fields(const VelocityGrid& grid);

}  // namespace hsl::kinetic
