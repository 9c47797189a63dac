#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include "hsl/core_model.hpp"

namespace hsl::md {

inline constexpr double kOverlapTolerance = 1e-9;
/// Approach speeds (v_i - v_j).omega at or below this are tangencies, not collisions.
inline constexpr double kGrazingTolerance = 1e-12;

struct PairContact {
  double time;  ///< time until contact, relative to the supplied state
  Vec omega;    ///< (x_j - x_i) / eps at contact
};

struct CollisionEvent {
  double time = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  Vec omega{0.0, 0.0, 0.0};
  std::uint64_t stamp_i = 0;
  std::uint64_t stamp_j = 0;
};

struct EventRecord {
  CollisionEvent event;
  Vec v_pre_i, v_pre_j;
  Vec v_post_i, v_post_j;
};

struct EventLog {
  std::vector<EventRecord> entries;
};

/// One JSON object per line: {t, i, j, omega, v_pre: [v_i, v_j], v_post: [v_i', v_j']}.
void write_event_log_jsonl(std::ostream& os, const EventLog& log, int d);

/// Earliest s in (0, horizon] at which some periodic image of particle j touches
/// particle i while approaching. Positions are torus points (any representative).
std::optional<PairContact> predict_pair_collision(const Vec& x_i, const Vec& v_i, const Vec& x_j, const Vec& v_j,
                                                  int d, double eps, double horizon);

/// Elastic hard-sphere scattering with contact direction omega (|omega| = 1).
std::pair<Vec, Vec> apply_scattering(const Vec& v_i, const Vec& v_j, const Vec& omega);

struct AdvanceOptions {
  /// event-cascade-overflow fires beyond this many collisions per particle per unit time.
  double max_events_per_particle_per_time = 1e4;
  bool record_log = true;
};

struct AdvanceResult {
  ParticleSystem system;
  EventLog log;
  std::uint64_t collisions = 0;
  std::uint64_t cell_crossings = 0;
};

/// Exact event-driven evolution over `duration` using a cell grid and lazy
/// invalidation of stale predictions.
AdvanceResult advance(const ParticleSystem& system, double duration, const AdvanceOptions& options = {});

/// Same contract as advance, rescanning every pair after each event. N <= 256.
AdvanceResult brute_force_advance(const ParticleSystem& system, double duration,
                                  const AdvanceOptions& options = {});

inline constexpr std::size_t kBruteForceMaxParticles = 256;

ParticleSystem reverse_velocities(ParticleSystem system);

}  // namespace hsl::md
