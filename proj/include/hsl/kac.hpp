#pragma once

#include <cstdint>
#include <vector>

#include "hsl/ensembles.hpp"
#include "hsl/test_functions.hpp"

namespace hsl::kinetic {

struct KacConfig {
  int d = 2;
  /// Only the velocity law is used.
  ensembles::InitialDensitySpec f0;
  std::size_t particles = 1000;
  std::vector<double> output_times;
  std::uint64_t seed = 1;
  /// Velocity-only observables (x is fixed at 0 when evaluating).
  std::vector<TestFunctionSpec> observables;
  bool keep_velocities = false;
};

struct KacOutput {
  double time = 0.0;
  /// sum_i h(v_i) per registered observable.
  std::vector<double> sums;
  Vec momentum{0.0, 0.0, 0.0};
  double energy = 0.0;
  std::vector<Vec> velocities;
};

struct KacResult {
  std::vector<KacOutput> outputs;
  std::uint64_t collisions = 0;
  std::uint64_t candidates = 0;
  std::uint64_t majorant_doublings = 0;
};

/// Event-by-event simulation of the homogeneous Kac process with the hard-sphere
/// kernel: each unordered pair jumps at rate (1/M_s) int ((v_i - v_j).omega)_+ domega,
/// realized by a uniform-omega majorant clock with thinning.
KacResult kac_homogeneous(const KacConfig& config);

}  // namespace hsl::kinetic
