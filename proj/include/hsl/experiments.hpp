#pragma once

#include <string>

#include "hsl/harness.hpp"

namespace hsl::harness {

/// Criterion ids reported by each kind:
///   reversibility             C1 microdynamics-exactness, C2 reversibility
///   equilibrium-fluctuations  C3 equilibrium-stationarity, C7 equilibrium-covariance
///   lanford-lln               C4 lanford-lln
///   wick                      C5 initial-gaussian-field
///   variance-scaling          C6 variance-scaling
///   h-theorem                 C8 h-theorem
///   hamiltonian-checks        C9 collision-identities, C10 ldp-identities
///   cgf                       C11 cgf-consistency
KindRunner experiment_runner(const std::string& kind);

/// Intensity for a given Boltzmann-Grad parameter set: eps = (alpha mu)^(-1/(d-1)).
ScalingParams scaling_for_intensity(int d, double mu, double alpha = 1.0);

}  // namespace hsl::harness
