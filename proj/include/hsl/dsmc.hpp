#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "hsl/ensembles.hpp"
#include "hsl/test_functions.hpp"
#include "hsl/velocity_grid.hpp"

namespace hsl::kinetic {

struct DsmcConfig {
  int d = 2;
  ensembles::InitialDensitySpec f0;
  double T = 1.0;
  double dt = 0.005;
  /// Cells per axis; unused axes must be 1.
  std::array<int, 3> cells{20, 1, 1};
  std::size_t particles = 100000;
  std::uint64_t seed = 1;
  bool collisions = true;
  /// Strictly increasing output times in [0, T]; each is rounded to the step grid.
  std::vector<double> output_times;
  std::vector<TestFunctionSpec> observables;
  /// Per-cell velocity histograms on this grid at every output time.
  std::optional<VelocityGrid> histogram_grid;
  /// Keep the full velocity list at each output time.
  bool keep_velocities = false;
  double initial_majorant = 0.0;
};

struct DsmcOutput {
  double time = 0.0;
  /// (1/M_s) sum_i h(x_i, v_i) per registered observable.
  std::vector<double> means;
  std::vector<std::size_t> cell_counts;
  /// Per-cell normalized velocity densities (only with a histogram grid).
  std::vector<VelocityGridField> cell_histograms;
  std::vector<Vec> velocities;
  Vec momentum{0.0, 0.0, 0.0};
  double energy = 0.0;
};

struct DsmcResult {
  std::vector<DsmcOutput> outputs;
  std::uint64_t collisions = 0;
  std::uint64_t candidates = 0;
  std::uint64_t majorant_doublings = 0;
  /// Collision steps in which some cell held fewer than two particles.
  std::uint64_t underflow_cells = 0;
  double final_majorant = 0.0;
};

/// Mean free time of the unit-variance Maxwellian gas at unit density: 1 / (2 sqrt(pi)) for d = 2.
double equilibrium_mean_free_time(int d);

/// Per-particle collision rate of the equilibrium gas, mu eps^(d-1) iint M M1 int ((v - v1).omega)_+ domega,
/// by tensor trapezoid quadrature over the relative velocity (law N(0, 2 I)) on [-12, 12]^d.
double equilibrium_collision_rate(int d, int nodes = 241);

/// Transport / collide splitting for the Boltzmann equation with the hard-sphere kernel.
/// Each simulated particle carries mass 1/M_s; the total mass on the torus is 1.
DsmcResult dsmc_solve(const DsmcConfig& config);

/// JSON lines {"t":..,"cell":..,"count":..,"values":[..]} for every stored histogram.
void write_cell_histograms_jsonl(std::ostream& os, const DsmcResult& result);

}  // namespace hsl::kinetic
