#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "hsl/types.hpp"

namespace hsl {

/// Boltzmann-Grad scaling of a hard-sphere gas on the unit torus.
///
/// The intensity satisfies mu * eps^(d-1) * alpha = 1, so a typical particle
/// travels a distance of order one between collisions.
struct ScalingParams {
  int d = 2;
  double eps = 1e-3;
  double mu = 1000.0;
  double alpha = 1.0;

  bool operator==(const ScalingParams&) const = default;
};

/// Largest admissible expected packing fraction.
inline constexpr double kMaxPackingFraction = 0.05;

double unit_ball_volume(int d);

/// Expected fraction of the torus covered by spheres of diameter eps at intensity mu.
double packing_fraction(int d, double eps, double mu);

/// mu = 1 / (alpha * eps^(d-1)); no regime checks.
double boltzmann_grad_intensity(int d, double eps, double alpha);

ScalingParams validate_scaling(int d, double eps, double alpha = 1.0);

// --- torus geometry ---------------------------------------------------------

/// Maps a coordinate to [0, 1).
double wrap(double x);
Vec wrap(const Vec& x, int d);

/// Representative of b - a with every component in [-0.5, 0.5).
Vec minimal_image(const Vec& a, const Vec& b, int d);

double torus_distance(const Vec& a, const Vec& b, int d);

// --- equilibrium ------------------------------------------------------------

/// Standard Maxwellian (2 pi)^(-d/2) exp(-|v|^2 / 2).
double maxwellian(const Vec& v, int d);

// --- microscopic state ------------------------------------------------------

struct ParticleSystem {
  double time = 0.0;
  std::vector<Vec> positions;
  std::vector<Vec> velocities;
  ScalingParams scaling;

  std::size_t size() const { return positions.size(); }
  int dim() const { return scaling.d; }

  Vec total_momentum() const;
  double kinetic_energy() const;
  /// Smallest pairwise torus distance (O(N^2); +inf for N < 2).
  double min_pair_distance() const;
};

/// Throws inconsistent_state if array sizes, coordinate ranges or finiteness are off.
void check_consistency(const ParticleSystem& system);

/// Snapshot CSV: a `# time=... d=... eps=... mu=... alpha=...` line followed by
/// the header `x1,..,xd,v1,..,vd` and one row per particle.
void write_snapshot_csv(std::ostream& os, const ParticleSystem& system);
ParticleSystem read_snapshot_csv(std::istream& is);

}  // namespace hsl
