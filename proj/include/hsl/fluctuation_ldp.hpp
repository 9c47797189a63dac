#pragma once

#include <cstdint>
#include <string>

#include "hsl/collision_quadrature.hpp"
#include "hsl/ensembles.hpp"
#include "hsl/linearized.hpp"
#include "hsl/test_functions.hpp"

namespace hsl::ldp {

using kinetic::QuadratureOptions;
using kinetic::VelocityFunction;
using kinetic::VelocityGridField;

struct QuadratureValue {
  double value = 0.0;
  /// 3 standard errors of the Monte Carlo estimate; the Hamiltonian adds a rounding bound.
  double tolerance = 0.0;
};

/// Velocity-only view of an x-independent test function.
VelocityFunction velocity_function(const TestFunctionSpec& h, int d);

/// 1/2 iiint f f1 ((v - v1).omega)_+ (Delta h1)(Delta h2), Delta h = h' + h1' - h - h1.
QuadratureValue noise_covariance(const VelocityFunction& h1, const VelocityFunction& h2, const VelocityGridField& f,
                                 const QuadratureOptions& options = {});

/// int f0 h g dx dv by separable quadrature (periodic trapezoid in x, trapezoid on [-10, 10]^d in v).
double initial_field_covariance(const TestFunctionSpec& h, const TestFunctionSpec& g,
                                const ensembles::InitialDensitySpec& f0, int d);

/// Grid version: weight * sum f h g.
double initial_field_covariance(const VelocityGridField& h, const VelocityGridField& g, const VelocityGridField& f);

struct CovariancePrediction {
  double theta1 = 0.0;
  double theta2 = 0.0;
  std::string h1;
  std::string h2;
  double value = 0.0;
  /// Sum of the three parts below.
  double error_budget = 0.0;
  double quadrature_error = 0.0;
  double semigroup_error = 0.0;
  double grid_error = 0.0;
};

/// int M h1 (e^{tau K} h2) dv, tau = theta2 - theta1, on the operator's grid.
/// At tau = 0 this is exactly initial_field_covariance(h1, h2, M) on the grid.
CovariancePrediction predict_equilibrium_covariance(const kinetic::LinearizedOperatorMatrix& L,
                                                    const VelocityGridField& h1, const VelocityGridField& h2,
                                                    double theta1, double theta2,
                                                    const kinetic::SemigroupOptions& options = {});

CovariancePrediction predict_equilibrium_covariance(const kinetic::LinearizedOperatorMatrix& L,
                                                    const TestFunctionSpec& h1, const TestFunctionSpec& h2,
                                                    double theta1, double theta2,
                                                    const kinetic::SemigroupOptions& options = {});

/// Nonnegative homogeneous density phi and bias field p on a common grid.
struct RateFunctionalInput {
  VelocityGridField phi;
  VelocityGridField p;

  void validate() const;
};

inline constexpr double kMaxBias = 5.0;

/// 1/2 iiint phi phi1 ((v - v1).omega)_+ (e^{Delta p} - 1). Throws exp-overflow when |p| > 5 somewhere.
QuadratureValue hamiltonian(const RateFunctionalInput& input, const QuadratureOptions& options = {});

struct GradientCheck {
  double richardson = 0.0;
  double reference = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

/// Richardson-extrapolated 2 G(s/2) - G(s) with G(s) = H(phi, s q) / s, against int q C(phi, phi)
/// from collision_operator_apply. Tolerance: 1e-3 relative plus both quadrature errors.
GradientCheck hamiltonian_gradient_check(const VelocityGridField& phi, const VelocityGridField& q, double s = 1e-4,
                                         const QuadratureOptions& options = {});

/// <p, dphi_dt> - H(phi, p).
QuadratureValue legendre_integrand(const VelocityGridField& phi, const VelocityGridField& dphi_dt,
                                   const VelocityGridField& p, const QuadratureOptions& options = {});

using kinetic::relative_entropy;

}  // namespace hsl::ldp
