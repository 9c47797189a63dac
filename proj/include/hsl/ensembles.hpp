#pragma once

#include <cstdint>
#include <utility>

#include <json.hpp>

#include "hsl/core_model.hpp"
#include "hsl/rng.hpp"

namespace hsl::ensembles {

enum class SpatialProfile { uniform, cosine };
enum class VelocityLaw { maxwellian, bimodal };

/// Product density f0(x, v) = rho(x) g(v) on the torus times R^d.
///
/// rho: uniform, or 1 + a cos(2 pi x_axis) with |a| <= 0.5.
/// g:   standard Maxwellian, or the mixture 1/2 N(+u e1, s^2) + 1/2 N(-u e1, s^2).
struct InitialDensitySpec {
  SpatialProfile spatial = SpatialProfile::uniform;
  double cos_amplitude = 0.0;
  int cos_axis = 0;

  VelocityLaw velocity = VelocityLaw::maxwellian;
  double bimodal_shift = 1.5;
  double bimodal_sigma = 0.5;

  double spatial_density(const Vec& x) const;
  double velocity_density(const Vec& v, int d) const;
  double density(const Vec& x, const Vec& v, int d) const { return spatial_density(x) * velocity_density(v, d); }

  Vec sample_position(Engine& rng, int d) const;
  Vec sample_velocity(Engine& rng, int d) const;

  /// Velocity moments of g: mean and mean of |v|^2.
  Vec mean_velocity(int d) const;
  double mean_energy(int d) const;

  /// Throws invalid_density on out-of-range parameters.
  void validate(int d) const;
};

nlohmann::json to_json(const InitialDensitySpec& f0);
InitialDensitySpec initial_density_from_json(const nlohmann::json& j);

struct GrandCanonicalSpec {
  ScalingParams scaling;
  InitialDensitySpec f0;
  std::uint64_t seed = 0;
};

nlohmann::json to_json(const GrandCanonicalSpec& spec);
GrandCanonicalSpec grand_canonical_from_json(const nlohmann::json& j);

struct SamplerOptions {
  /// false draws the eps = 0 (Poisson, iid) configuration without exclusion.
  bool exclusion = true;
  std::size_t max_attempts = 100000;
};

struct SamplerReport {
  std::size_t realized_n = 0;
  std::size_t rejections = 0;
  std::size_t attempts = 0;
  double acceptance_rate = 1.0;
};

/// Exact draw from the grand-canonical hard-sphere measure by whole-configuration
/// rejection: N ~ Poisson(mu), N iid points from f0, accept iff no pair is closer than eps.
std::pair<ParticleSystem, SamplerReport> sample_grand_canonical(const GrandCanonicalSpec& spec,
                                                                const SamplerOptions& options = {});

std::pair<ParticleSystem, SamplerReport> sample_equilibrium(const ScalingParams& scaling, std::uint64_t seed,
                                                            const SamplerOptions& options = {});

/// True iff some pair of the given points is closer than eps on the torus.
bool has_overlap(const std::vector<Vec>& positions, int d, double eps);

}  // namespace hsl::ensembles
