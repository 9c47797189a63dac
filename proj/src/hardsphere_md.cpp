#include "hsl/hardsphere_md.hpp"

#include <algorithm>
#include <limits>
#include <ostream>
#include <queue>

#include <json.hpp>

namespace hsl::md {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Earliest approaching contact among the periodic images dx + k of the
// separation, k in Z^d, visited shell by shell (max |k_a| = r). Every image in
// shell r is at distance >= r - 1/2 because dx lies in [-1/2, 1/2)^d, so the
// scan stops once that bound exceeds what |dv| can close within the limit.
std::optional<PairContact> earliest_contact(const Vec& dx, const Vec& dv, int d, double eps, double horizon) {
  const double a = norm2(dv);
  if (!(a > 0.0) || !(horizon > 0.0)) return std::nullopt;
  const double speed = std::sqrt(a);
  const double eps2 = eps * eps;

  double best = kInf;
  Vec best_r{0.0, 0.0, 0.0};
  double limit = horizon;

  auto try_image = [&](const Vec& k) {
    const Vec r0 = dx + k;
    const double b = dot(r0, dv);
    if (b >= 0.0) return;
    const double c = norm2(r0) - eps2;
    double s;
    if (c <= 0.0) {
      // Touching or within rounding of contact, and approaching.
      if (-b / std::sqrt(norm2(r0)) <= kGrazingTolerance) return;
      s = 0.0;
    } else {
      const double disc = b * b - a * c;
      if (disc <= 0.0) return;
      const double root = std::sqrt(disc);
      if (root / eps <= kGrazingTolerance) return;
      s = c / (-b + root);
    }
    if (s > horizon) return;
    if (s < best) {
      best = s;
      best_r = r0 + s * dv;
    }
  };

  for (int r = 0;; ++r) {
    if (r > 0 && static_cast<double>(r) - 0.5 > eps + speed * limit) break;
    if (r == 0) {
      try_image(Vec{0.0, 0.0, 0.0});
    } else if (d == 2) {
      for (int k0 = -r; k0 <= r; ++k0)
        for (int k1 = -r; k1 <= r; ++k1)
          if (std::max(std::abs(k0), std::abs(k1)) == r)
            try_image(Vec{static_cast<double>(k0), static_cast<double>(k1), 0.0});
    } else {
      for (int k0 = -r; k0 <= r; ++k0)
        for (int k1 = -r; k1 <= r; ++k1)
          for (int k2 = -r; k2 <= r; ++k2)
            if (std::max({std::abs(k0), std::abs(k1), std::abs(k2)}) == r)
              try_image(Vec{static_cast<double>(k0), static_cast<double>(k1), static_cast<double>(k2)});
    }
    limit = std::min(limit, best);
  }
  if (best == kInf) return std::nullopt;
  return PairContact{best, (1.0 / norm(best_r)) * best_r};
}

// Free-flight state of one particle: position x_ref (on the torus) at time
// t_ref, constant velocity until the next collision involving it.
struct Particle {
  Vec x_ref{0.0, 0.0, 0.0};
  double t_ref = 0.0;
  Vec v{0.0, 0.0, 0.0};
  std::uint64_t stamp = 0;
};

Vec position_at(const Particle& p, double t) { return p.x_ref + (t - p.t_ref) * p.v; }

// Shared by both engines so that identical pair states give bit-identical
// predictions. Returns the absolute contact time.
std::optional<CollisionEvent> predict_pair(const std::vector<Particle>& ps, std::size_t i, std::size_t j, int d,
                                           double eps, double t_limit) {
  const Particle& pi = ps[i];
  const Particle& pj = ps[j];
  const double t0 = std::max(pi.t_ref, pj.t_ref);
  const Vec dx = minimal_image(position_at(pi, t0), position_at(pj, t0), d);
  const auto c = earliest_contact(dx, pj.v - pi.v, d, eps, t_limit - t0);
  if (!c) return std::nullopt;
  return CollisionEvent{t0 + c->time, i, j, c->omega, pi.stamp, pj.stamp};
}

void check_inputs(const ParticleSystem& s, double duration) {
  check_consistency(s);
  if (!(duration >= 0.0) || !std::isfinite(duration))
    throw Error(ErrorCode::inconsistent_state, "duration must be finite and >= 0");
  if (s.size() > 1) {
    const double dmin = s.min_pair_distance();
    if (dmin < s.scaling.eps - kOverlapTolerance)
      throw Error(ErrorCode::overlap_input, "initial configuration overlaps (min distance " + std::to_string(dmin) + ")");
  }
}

std::uint64_t event_cap(const ParticleSystem& s, double duration, const AdvanceOptions& opt) {
  const double cap = opt.max_events_per_particle_per_time * static_cast<double>(s.size()) * duration;
  return static_cast<std::uint64_t>(std::max(1000.0, cap));
}

// Executes a collision on the particle table; shared by both engines.
void execute_collision(std::vector<Particle>& ps, const CollisionEvent& ev, int d, EventLog* log) {
  Particle& pi = ps[ev.i];
  Particle& pj = ps[ev.j];
  if (std::abs(norm(ev.omega) - 1.0) > 1e-12) throw Error(ErrorCode::non_unit_omega, "predicted contact direction");
  pi.x_ref = wrap(position_at(pi, ev.time), d);
  pj.x_ref = wrap(position_at(pj, ev.time), d);
  pi.t_ref = ev.time;
  pj.t_ref = ev.time;
  const Vec vi = pi.v, vj = pj.v;
  auto [vi2, vj2] = apply_scattering(vi, vj, ev.omega);
  pi.v = vi2;
  pj.v = vj2;
  ++pi.stamp;
  ++pj.stamp;
  if (log) log->entries.push_back(EventRecord{ev, vi, vj, vi2, vj2});
}

ParticleSystem finish(const ParticleSystem& start, const std::vector<Particle>& ps, double t_end) {
  ParticleSystem out;
  out.scaling = start.scaling;
  out.time = t_end;
  const int d = start.dim();
  out.positions.reserve(ps.size());
  out.velocities.reserve(ps.size());
  for (const auto& p : ps) {
    out.positions.push_back(wrap(position_at(p, t_end), d));
    out.velocities.push_back(p.v);
  }
  return out;
}

std::vector<Particle> load(const ParticleSystem& s) {
  std::vector<Particle> ps(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    ps[i].x_ref = s.positions[i];
    ps[i].t_ref = s.time;
    ps[i].v = s.velocities[i];
  }
  return ps;
}

bool earlier(const CollisionEvent& a, const CollisionEvent& b) {
  if (a.time != b.time) return a.time < b.time;
  if (a.i != b.i) return a.i < b.i;
  return a.j < b.j;
}

// --- event-driven engine ------------------------------------------------------

class CellEngine {
 public:
  CellEngine(const ParticleSystem& s, double duration, const AdvanceOptions& opt)
      : start_(s), d_(s.dim()), eps_(s.scaling.eps), t_end_(s.time + duration), cap_(event_cap(s, duration, opt)),
        record_(opt.record_log), ps_(load(s)) {
    const auto n = static_cast<double>(s.size());
    const int by_density = static_cast<int>(std::floor(std::pow(std::max(n, 1.0) / 2.0, 1.0 / d_)));
    const int by_size = static_cast<int>(std::floor(1.0 / (eps_ * (1.0 + 1e-6))));
    nc_ = std::min(by_density, by_size);
    if (nc_ < 3) nc_ = 1;
    build_cells();
  }

  AdvanceResult run() {
    AdvanceResult res;
    for (std::size_t p = 0; p < ps_.size(); ++p) schedule_crossing(p, start_.time);
    for (std::size_t p = 0; p < ps_.size(); ++p) predict_against_neighbors(p, /*only_higher=*/true);

    while (!queue_.empty()) {
      const QEvent ev = queue_.top();
      if (ev.ev.time > t_end_) break;
      queue_.pop();
      if (ev.crossing_axis >= 0) {
        if (ev.ev.stamp_i != ps_[ev.ev.i].stamp) continue;
        ++res.cell_crossings;
        apply_crossing(ev.ev.i, ev.crossing_axis, ev.crossing_dir, ev.ev.time);
        continue;
      }
      if (ev.ev.stamp_i != ps_[ev.ev.i].stamp || ev.ev.stamp_j != ps_[ev.ev.j].stamp) continue;
      if (++res.collisions > cap_)
        throw Error(ErrorCode::event_cascade_overflow, "collision count exceeded cap " + std::to_string(cap_));
      execute_collision(ps_, ev.ev, d_, record_ ? &res.log : nullptr);
      for (std::size_t p : {ev.ev.i, ev.ev.j}) {
        relocate(p);
        schedule_crossing(p, ev.ev.time);
      }
      predict_against_neighbors(ev.ev.i, false);
      predict_against_neighbors(ev.ev.j, false);
    }
    res.system = finish(start_, ps_, t_end_);
    return res;
  }

 private:
  struct QEvent {
    CollisionEvent ev;
    int crossing_axis = -1;
    int crossing_dir = 0;
  };
  struct Later {
    bool operator()(const QEvent& a, const QEvent& b) const { return earlier(b.ev, a.ev); }
  };

  int cell_index(const std::array<long, 3>& u) const {
    int idx = 0;
    for (int a = 0; a < d_; ++a) {
      long c = u[a] % nc_;
      if (c < 0) c += nc_;
      idx = idx * nc_ + static_cast<int>(c);
    }
    return idx;
  }

  void build_cells() {
    int ncell = 1;
    for (int a = 0; a < d_; ++a) ncell *= nc_;
    cells_.assign(ncell, {});
    neighbors_.assign(ncell, {});
    for (int c = 0; c < ncell; ++c) {
      std::array<long, 3> u{0, 0, 0};
      int r = c;
      for (int a = d_ - 1; a >= 0; --a) {
        u[a] = r % nc_;
        r /= nc_;
      }
      auto& nb = neighbors_[c];
      const int span = (d_ == 2) ? 9 : 27;
      for (int k = 0; k < span; ++k) {
        std::array<long, 3> w = u;
        int q = k;
        for (int a = 0; a < d_; ++a) {
          w[a] += (q % 3) - 1;
          q /= 3;
        }
        nb.push_back(cell_index(w));
      }
      std::sort(nb.begin(), nb.end());
      nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    }
    ucell_.assign(ps_.size(), {0, 0, 0});
    cell_.assign(ps_.size(), 0);
    slot_.assign(ps_.size(), 0);
    next_cross_.assign(ps_.size(), kInf);
    for (std::size_t p = 0; p < ps_.size(); ++p) {
      ucell_[p] = fresh_ucell(ps_[p].x_ref);
      insert(p, cell_index(ucell_[p]));
    }
  }

  std::array<long, 3> fresh_ucell(const Vec& x) const {
    std::array<long, 3> u{0, 0, 0};
    for (int a = 0; a < d_; ++a) u[a] = std::min<long>(nc_ - 1, static_cast<long>(std::floor(x[a] * nc_)));
    return u;
  }

  void insert(std::size_t p, int c) {
    cell_[p] = c;
    slot_[p] = cells_[c].size();
    cells_[c].push_back(p);
  }

  void remove(std::size_t p) {
    auto& list = cells_[cell_[p]];
    const std::size_t last = list.back();
    list[slot_[p]] = last;
    slot_[last] = slot_[p];
    list.pop_back();
  }

  // After a collision x_ref is re-wrapped; restart the unwrapped cell frame.
  void relocate(std::size_t p) {
    ucell_[p] = fresh_ucell(ps_[p].x_ref);
    const int c = cell_index(ucell_[p]);
    if (c != cell_[p]) {
      remove(p);
      insert(p, c);
    }
  }

  void schedule_crossing(std::size_t p, double now) {
    next_cross_[p] = kInf;
    if (nc_ == 1) return;
    const Particle& P = ps_[p];
    const double w = 1.0 / nc_;
    double best = kInf;
    int axis = -1, dir = 0;
    for (int a = 0; a < d_; ++a) {
      if (P.v[a] == 0.0) continue;
      const int s = P.v[a] > 0.0 ? 1 : -1;
      const double boundary = static_cast<double>(ucell_[p][a] + (s > 0 ? 1 : 0)) * w;
      double t = P.t_ref + (boundary - P.x_ref[a]) / P.v[a];
      if (t < now) t = now;
      if (t < best) {
        best = t;
        axis = a;
        dir = s;
      }
    }
    if (axis < 0) return;
    next_cross_[p] = best;
    if (best <= t_end_) {
      QEvent q;
      q.ev = CollisionEvent{best, p, std::numeric_limits<std::size_t>::max(), Vec{0, 0, 0}, P.stamp, 0};
      q.crossing_axis = axis;
      q.crossing_dir = dir;
      queue_.push(q);
    }
  }

  void apply_crossing(std::size_t p, int axis, int dir, double now) {
    ucell_[p][axis] += dir;
    const int c = cell_index(ucell_[p]);
    remove(p);
    insert(p, c);
    schedule_crossing(p, now);
    predict_against_neighbors(p, false);
  }

  void predict_against_neighbors(std::size_t p, bool only_higher) {
    for (int c : neighbors_[cell_[p]]) {
      for (std::size_t q : cells_[c]) {
        if (q == p || (only_higher && q < p)) continue;
        const std::size_t i = std::min(p, q), j = std::max(p, q);
        // A pair can only meet while both stay in their current cells, or after
        // one of them crosses, at which point it is predicted again.
        const double limit = std::min({t_end_, next_cross_[i], next_cross_[j]}) + 1e-9;
        if (auto ev = predict_pair(ps_, i, j, d_, eps_, std::min(limit, t_end_))) queue_.push(QEvent{*ev, -1, 0});
      }
    }
  }

  const ParticleSystem& start_;
  int d_;
  double eps_;
  double t_end_;
  std::uint64_t cap_;
  bool record_;
  std::vector<Particle> ps_;
  int nc_ = 1;
  std::vector<std::vector<std::size_t>> cells_;
  std::vector<std::vector<int>> neighbors_;
  std::vector<std::array<long, 3>> ucell_;
  std::vector<int> cell_;
  std::vector<std::size_t> slot_;
  std::vector<double> next_cross_;
  std::priority_queue<QEvent, std::vector<QEvent>, Later> queue_;
};

}  // namespace

std::optional<PairContact> predict_pair_collision(const Vec& x_i, const Vec& v_i, const Vec& x_j, const Vec& v_j,
                                                  int d, double eps, double horizon) {
  if (d != 2 && d != 3) throw Error(ErrorCode::invalid_dimension, "predict_pair_collision");
  const Vec dx = minimal_image(x_i, x_j, d);
  if (norm(dx) < eps - kOverlapTolerance) throw Error(ErrorCode::overlap_input, "pair separation below eps");
  return earliest_contact(dx, v_j - v_i, d, eps, horizon);
}

std::pair<Vec, Vec> apply_scattering(const Vec& v_i, const Vec& v_j, const Vec& omega) {
  if (std::abs(norm(omega) - 1.0) > 1e-12) throw Error(ErrorCode::non_unit_omega, "|omega| != 1");
  const double k = dot(v_i - v_j, omega);
  return {v_i - k * omega, v_j + k * omega};
}

AdvanceResult advance(const ParticleSystem& system, double duration, const AdvanceOptions& options) {
  check_inputs(system, duration);
  CellEngine engine(system, duration, options);
  return engine.run();
}

AdvanceResult brute_force_advance(const ParticleSystem& system, double duration, const AdvanceOptions& options) {
  if (system.size() > kBruteForceMaxParticles)
    throw Error(ErrorCode::size_guard, "brute_force_advance is limited to 256 particles");
  check_inputs(system, duration);
  const int d = system.dim();
  const double eps = system.scaling.eps;
  const double t_end = system.time + duration;
  const std::uint64_t cap = event_cap(system, duration, options);
  std::vector<Particle> ps = load(system);
  const std::size_t n = ps.size();

  // Upper-triangular table of current predictions.
  std::vector<std::optional<CollisionEvent>> table(n * n);
  auto refresh = [&](std::size_t i, std::size_t j) {
    if (i > j) std::swap(i, j);
    table[i * n + j] = predict_pair(ps, i, j, d, eps, t_end);
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) refresh(i, j);

  AdvanceResult res;
  for (;;) {
    const CollisionEvent* next = nullptr;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const auto& e = table[i * n + j];
        if (e && e->time <= t_end && (!next || earlier(*e, *next))) next = &*e;
      }
    if (!next) break;
    const CollisionEvent ev = *next;
    if (++res.collisions > cap)
      throw Error(ErrorCode::event_cascade_overflow, "collision count exceeded cap " + std::to_string(cap));
    execute_collision(ps, ev, d, options.record_log ? &res.log : nullptr);
    for (std::size_t k = 0; k < n; ++k) {
      if (k != ev.i) refresh(ev.i, k);
      if (k != ev.j) refresh(ev.j, k);
    }
  }
  res.system = finish(system, ps, t_end);
  return res;
}

ParticleSystem reverse_velocities(ParticleSystem system) {
  for (auto& v : system.velocities) v = -v;
  return system;
}

void write_event_log_jsonl(std::ostream& os, const EventLog& log, int d) {
  auto vec = [d](const Vec& v) {
    auto a = nlohmann::json::array();
    for (int k = 0; k < d; ++k) a.push_back(v[k]);
    return a;
  };
  for (const auto& r : log.entries) {
    nlohmann::json j;
    j["t"] = r.event.time;
    j["i"] = r.event.i;
    j["j"] = r.event.j;
    j["omega"] = vec(r.event.omega);
    j["v_pre"] = {vec(r.v_pre_i), vec(r.v_pre_j)};
    j["v_post"] = {vec(r.v_post_i), vec(r.v_post_j)};
    os << j.dump() << "\n";
  }
}

}  // namespace hsl::md
