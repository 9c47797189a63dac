#include "hsl/core_model.hpp"

#include <algorithm>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace hsl {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ok: return "ok";
    case ErrorCode::invalid_dimension: return "invalid-dimension";
    case ErrorCode::scaling_violation: return "scaling-violation";
    case ErrorCode::malformed_spec: return "malformed-spec";
    case ErrorCode::overlap_input: return "overlap-input";
    case ErrorCode::non_unit_omega: return "non-unit-omega";
    case ErrorCode::event_cascade_overflow: return "event-cascade-overflow";
    case ErrorCode::inconsistent_state: return "inconsistent-state";
    case ErrorCode::size_guard: return "size-guard";
    case ErrorCode::rejection_budget_exhausted: return "rejection-budget-exhausted";
    case ErrorCode::invalid_density: return "invalid-density";
    case ErrorCode::k_too_large: return "k-too-large";
    case ErrorCode::missing_sample_time: return "missing-sample-time";
    case ErrorCode::insufficient_replicas: return "insufficient-replicas";
    case ErrorCode::amplitude_guard: return "amplitude-guard";
    case ErrorCode::overflow: return "overflow";
    case ErrorCode::cutoff_leak: return "cutoff-leak";
    case ErrorCode::majorant_breach: return "majorant-breach";
    case ErrorCode::cell_underflow: return "cell-underflow";
    case ErrorCode::negative_mass: return "negative-mass";
    case ErrorCode::integrator_failure: return "integrator-failure";
    case ErrorCode::support_violation: return "support-violation";
    case ErrorCode::exp_overflow: return "exp-overflow";
    case ErrorCode::config_invalid: return "config-invalid";
    case ErrorCode::resource_budget_exceeded: return "resource-budget-exceeded";
    case ErrorCode::config_hash_mismatch: return "config-hash-mismatch";
    case ErrorCode::io_error: return "io-error";
  }
  return "unknown";
}

double unit_ball_volume(int d) {
  return std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
}

double packing_fraction(int d, double eps, double mu) {
  return mu * std::pow(eps, d) * unit_ball_volume(d) * std::pow(2.0, -d);
}

double boltzmann_grad_intensity(int d, double eps, double alpha) {
  return 1.0 / (alpha * std::pow(eps, d - 1));
}

ScalingParams validate_scaling(int d, double eps, double alpha) {
  if (d != 2 && d != 3) throw Error(ErrorCode::invalid_dimension, "d must be 2 or 3, got " + std::to_string(d));
  if (!(eps > 0.0 && eps < 0.5)) throw Error(ErrorCode::scaling_violation, "eps must lie in (0, 0.5)");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw Error(ErrorCode::scaling_violation, "alpha must be positive");
  ScalingParams p{d, eps, boltzmann_grad_intensity(d, eps, alpha), alpha};
  const double phi = packing_fraction(d, eps, p.mu);
  if (!(phi < kMaxPackingFraction)) {
    std::ostringstream msg;
    msg << "packing fraction " << phi << " exceeds dilute cap " << kMaxPackingFraction;
    throw Error(ErrorCode::scaling_violation, msg.str());
  }
  return p;
}

double wrap(double x) {
  double y = x - std::floor(x);
  // x slightly below an integer can round up to exactly 1.
  if (y >= 1.0) y = 0.0;
  return y;
}

Vec wrap(const Vec& x, int d) {
  Vec y{0.0, 0.0, 0.0};
  for (int a = 0; a < d; ++a) y[a] = wrap(x[a]);
  return y;
}

Vec minimal_image(const Vec& a, const Vec& b, int d) {
  Vec r{0.0, 0.0, 0.0};
  for (int k = 0; k < d; ++k) {
    double dx = b[k] - a[k];
    dx -= std::floor(dx + 0.5);
    if (dx >= 0.5) dx -= 1.0;
    r[k] = dx;
  }
  return r;
}

double torus_distance(const Vec& a, const Vec& b, int d) { return norm(minimal_image(a, b, d)); }

double maxwellian(const Vec& v, int d) {
  return std::pow(2.0 * kPi, -0.5 * d) * std::exp(-0.5 * norm2(v));
}

Vec ParticleSystem::total_momentum() const {
  Vec p{0.0, 0.0, 0.0};
  for (const auto& v : velocities) p += v;
  return p;
}

double ParticleSystem::kinetic_energy() const {
  double e = 0.0;
  for (const auto& v : velocities) e += 0.5 * norm2(v);
  return e;
}

double ParticleSystem::min_pair_distance() const {
  double best = std::numeric_limits<double>::infinity();
  const int d = dim();
  for (std::size_t i = 0; i < positions.size(); ++i)
    for (std::size_t j = i + 1; j < positions.size(); ++j)
      best = std::min(best, torus_distance(positions[i], positions[j], d));
  return best;
}

void check_consistency(const ParticleSystem& s) {
  if (s.positions.size() != s.velocities.size())
    throw Error(ErrorCode::inconsistent_state, "positions/velocities size mismatch");
  const int d = s.dim();
  if (d != 2 && d != 3) throw Error(ErrorCode::invalid_dimension, "system dimension");
  if (!std::isfinite(s.time)) throw Error(ErrorCode::inconsistent_state, "non-finite time");
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (int a = 0; a < 3; ++a) {
      const double x = s.positions[i][a];
      const double v = s.velocities[i][a];
      if (!std::isfinite(x) || !std::isfinite(v))
        throw Error(ErrorCode::inconsistent_state, "non-finite coordinate for particle " + std::to_string(i));
      if (a < d && (x < 0.0 || x >= 1.0))
        throw Error(ErrorCode::inconsistent_state, "position outside [0,1) for particle " + std::to_string(i));
      if (a >= d && (x != 0.0 || v != 0.0))
        throw Error(ErrorCode::inconsistent_state, "unused coordinate slot is nonzero");
    }
  }
}

void write_snapshot_csv(std::ostream& os, const ParticleSystem& s) {
  const int d = s.dim();
  os << std::setprecision(17);
  os << "# time=" << s.time << " d=" << d << " eps=" << s.scaling.eps << " mu=" << s.scaling.mu
     << " alpha=" << s.scaling.alpha << "\n";
  for (int a = 0; a < d; ++a) os << "x" << a + 1 << ",";
  for (int a = 0; a < d; ++a) os << "v" << a + 1 << (a + 1 < d ? "," : "\n");
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (int a = 0; a < d; ++a) os << s.positions[i][a] << ",";
    for (int a = 0; a < d; ++a) os << s.velocities[i][a] << (a + 1 < d ? "," : "\n");
  }
}

ParticleSystem read_snapshot_csv(std::istream& is) {
  ParticleSystem s;
  std::string line;
  if (!std::getline(is, line) || line.rfind("#", 0) != 0)
    throw Error(ErrorCode::io_error, "snapshot: missing metadata line");
  {
    std::istringstream meta(line.substr(1));
    std::string tok;
    while (meta >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = tok.substr(0, eq);
      const double val = std::stod(tok.substr(eq + 1));
      if (key == "time") s.time = val;
      else if (key == "d") s.scaling.d = static_cast<int>(val);
      else if (key == "eps") s.scaling.eps = val;
      else if (key == "mu") s.scaling.mu = val;
      else if (key == "alpha") s.scaling.alpha = val;
    }
  }
  const int d = s.scaling.d;
  if (d != 2 && d != 3) throw Error(ErrorCode::invalid_dimension, "snapshot dimension");
  if (!std::getline(is, line)) throw Error(ErrorCode::io_error, "snapshot: missing header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    Vec x{0, 0, 0}, v{0, 0, 0};
    for (int k = 0; k < 2 * d; ++k) {
      if (!std::getline(row, cell, ',')) throw Error(ErrorCode::io_error, "snapshot: short row");
      (k < d ? x[k] : v[k - d]) = std::stod(cell);
    }
    s.positions.push_back(x);
    s.velocities.push_back(v);
  }
  return s;
}

}  // namespace hsl
