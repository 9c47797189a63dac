#include "hsl/observables.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "hsl/stats.hpp"

namespace hsl::observables {

namespace {

bool same_time(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)); }

void require_replicas(const Ensemble& ensemble, std::size_t minimum) {
  if (ensemble.size() < minimum)
    throw Error(ErrorCode::insufficient_replicas,
                std::to_string(ensemble.size()) + " replicas, need " + std::to_string(minimum));
}

std::vector<double> pairings(const Ensemble& ensemble, const FieldRef& f) {
  std::vector<double> out;
  out.reserve(ensemble.size());
  for (const auto& r : ensemble) out.push_back(r.pairing(r.field_index(f.observable, f.time)));
  return out;
}

}  // namespace

std::size_t ReplicaRecord::field_index(const std::string& observable, double time) const {
  std::size_t t = times.size();
  for (std::size_t k = 0; k < times.size(); ++k)
    if (same_time(times[k], time)) t = k;
  if (t == times.size()) throw Error(ErrorCode::missing_sample_time, "time " + std::to_string(time) + " not sampled");
  const auto it = std::find(observables.begin(), observables.end(), observable);
  if (it == observables.end()) throw Error(ErrorCode::malformed_spec, "observable '" + observable + "' not registered");
  return t * observables.size() + static_cast<std::size_t>(it - observables.begin());
}

void ReplicaRecord::validate() const {
  for (std::size_t k = 1; k < times.size(); ++k)
    if (!(times[k] > times[k - 1])) throw Error(ErrorCode::inconsistent_state, "sample times not increasing");
  if (sums.size() != num_fields()) throw Error(ErrorCode::inconsistent_state, "sum table size mismatch");
  if (collisions.size() != times.size()) throw Error(ErrorCode::inconsistent_state, "collision count size mismatch");
  if (!cross.empty() && cross.size() != num_fields() * num_fields())
    throw Error(ErrorCode::inconsistent_state, "cross table size mismatch");
}

nlohmann::json to_json(const ReplicaRecord& r) {
  nlohmann::json j;
  j["seed"] = r.seed;
  j["label"] = r.label;
  j["config_hash"] = r.config_hash;
  j["scaling"] = {{"d", r.scaling.d}, {"eps", r.scaling.eps}, {"mu", r.scaling.mu}, {"alpha", r.scaling.alpha}};
  j["times"] = r.times;
  j["observables"] = r.observables;
  j["n"] = r.n;
  j["sums"] = r.sums;
  j["collisions"] = r.collisions;
  if (!r.cross.empty()) j["cross"] = r.cross;
  if (!r.extra.empty()) j["extra"] = r.extra;
  return j;
}

ReplicaRecord replica_record_from_json(const nlohmann::json& j) {
  ReplicaRecord r;
  try {
    r.seed = j.at("seed").get<std::uint64_t>();
    r.label = j.value("label", std::string());
    r.config_hash = j.value("config_hash", std::string());
    const auto& s = j.at("scaling");
    r.scaling = ScalingParams{s.at("d").get<int>(), s.at("eps").get<double>(), s.at("mu").get<double>(),
                              s.at("alpha").get<double>()};
    r.times = j.at("times").get<std::vector<double>>();
    r.observables = j.at("observables").get<std::vector<std::string>>();
    r.n = j.at("n").get<std::size_t>();
    r.sums = j.at("sums").get<std::vector<double>>();
    r.collisions = j.at("collisions").get<std::vector<std::uint64_t>>();
    if (j.contains("cross")) r.cross = j.at("cross").get<std::vector<double>>();
    if (j.contains("extra")) r.extra = j.at("extra");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::inconsistent_state, std::string("replica record: ") + e.what());
  }
  r.validate();
  return r;
}

ReplicaRecorder::ReplicaRecorder(std::vector<double> times, std::vector<TestFunctionSpec> observables,
                                 bool keep_cross)
    : times_(std::move(times)), specs_(std::move(observables)), keep_cross_(keep_cross) {
  for (std::size_t k = 1; k < times_.size(); ++k)
    if (!(times_[k] > times_[k - 1])) throw Error(ErrorCode::inconsistent_state, "sample times not increasing");
  sums_.assign(times_.size() * specs_.size(), 0.0);
  collisions_.assign(times_.size(), 0);
  if (keep_cross_) values_.resize(sums_.size());
}

void ReplicaRecorder::observe(std::size_t t, const ParticleSystem& system, std::uint64_t collisions) {
  if (t >= times_.size()) throw Error(ErrorCode::missing_sample_time, "sample index out of range");
  if (have_n_ && system.size() != n_) throw Error(ErrorCode::inconsistent_state, "particle number changed");
  n_ = system.size();
  have_n_ = true;
  scaling_ = system.scaling;
  collisions_[t] = collisions;
  const int d = system.dim();
  const std::size_t K = specs_.size();
  for (std::size_t o = 0; o < K; ++o) {
    const std::size_t f = t * K + o;
    double s = 0.0;
    if (keep_cross_) values_[f].resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      const double h = eval_test_function(specs_[o], system.positions[i], system.velocities[i], d);
      s += h;
      if (keep_cross_) values_[f][i] = h;
    }
    sums_[f] = s;
  }
}

ReplicaRecord ReplicaRecorder::finish(std::uint64_t seed, std::string label) const {
  ReplicaRecord r;
  r.seed = seed;
  r.label = std::move(label);
  r.scaling = scaling_;
  r.times = times_;
  for (const auto& s : specs_) r.observables.push_back(s.name);
  r.n = n_;
  r.sums = sums_;
  r.collisions = collisions_;
  if (keep_cross_) {
    const std::size_t F = sums_.size();
    r.cross.assign(F * F, 0.0);
    for (std::size_t a = 0; a < F; ++a) {
      for (std::size_t b = a; b < F; ++b) {
        double acc = 0.0;
        const auto& va = values_[a];
        const auto& vb = values_[b];
        for (std::size_t i = 0; i < va.size() && i < vb.size(); ++i) acc += va[i] * vb[i];
        r.cross[a * F + b] = acc;
        r.cross[b * F + a] = acc;
      }
    }
  }
  return r;
}

double empirical_pairing(const ParticleSystem& system, const TestFunctionSpec& h) {
  double s = 0.0;
  for (std::size_t i = 0; i < system.size(); ++i)
    s += eval_test_function(h, system.positions[i], system.velocities[i], system.dim());
  return s / system.scaling.mu;
}

double k_particle_pairing(const ParticleSystem& system, const KParticleFunction& hk, int k) {
  if (k < 1 || k > kMaxTupleOrder)
    throw Error(ErrorCode::k_too_large, "tuple order " + std::to_string(k) + " outside 1..3");
  const std::size_t n = system.size();
  std::vector<Phase> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = {system.positions[i], system.velocities[i]};
  std::array<Phase, 3> tuple{};
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    tuple[0] = z[i];
    if (k == 1) {
      acc += hk(std::span<const Phase>(tuple.data(), 1));
      continue;
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      tuple[1] = z[j];
      if (k == 2) {
        acc += hk(std::span<const Phase>(tuple.data(), 2));
        continue;
      }
      for (std::size_t l = 0; l < n; ++l) {
        if (l == i || l == j) continue;
        tuple[2] = z[l];
        acc += hk(std::span<const Phase>(tuple.data(), 3));
      }
    }
  }
  return acc / std::pow(system.scaling.mu, k);
}

const StatEntry& EnsembleStats::find(const std::string& observable, double time) const {
  for (const auto& e : entries)
    if (e.observable == observable && same_time(e.time, time)) return e;
  throw Error(ErrorCode::missing_sample_time, "no statistics for '" + observable + "' at " + std::to_string(time));
}

EnsembleStats compute_stats(const Ensemble& ensemble) {
  EnsembleStats out;
  if (ensemble.empty()) return out;
  const auto& first = ensemble.front();
  for (std::size_t t = 0; t < first.times.size(); ++t) {
    for (std::size_t o = 0; o < first.observables.size(); ++o) {
      const FieldRef f{first.observables[o], first.times[t]};
      const auto xs = pairings(ensemble, f);
      const auto m = stats::moments(xs);
      out.entries.push_back({f.observable, f.time, m.mean, m.var, m.m3, m.m4, m.n, stats::half_width(m)});
    }
  }
  return out;
}

void write_stats_csv(std::ostream& os, const EnsembleStats& s) {
  const auto old = os.precision(17);
  os << "observable,time,mean,var,m3,m4,R,ci\n";
  for (const auto& e : s.entries)
    os << e.observable << ',' << e.time << ',' << e.mean << ',' << e.var << ',' << e.m3 << ',' << e.m4 << ','
       << e.R << ',' << e.ci << '\n';
  os.precision(old);
}

double fluctuation_field(const ReplicaRecord& record, const FieldRef& field, double ensemble_mean) {
  const double pi = record.pairing(record.field_index(field.observable, field.time));
  return std::sqrt(record.scaling.mu) * (pi - ensemble_mean);
}

std::vector<double> fluctuation_fields(const Ensemble& ensemble, const FieldRef& field) {
  const auto xs = pairings(ensemble, field);
  const double m = stats::mean(xs);
  std::vector<double> out;
  out.reserve(xs.size());
  for (std::size_t r = 0; r < xs.size(); ++r) out.push_back(std::sqrt(ensemble[r].scaling.mu) * (xs[r] - m));
  return out;
}

CumulantEstimate estimate_F2_and_cumulant(const Ensemble& ensemble, const FieldRef& a, const FieldRef& b,
                                          std::uint64_t bootstrap_seed) {
  require_replicas(ensemble, kMinReplicasCumulant);
  const std::size_t R = ensemble.size();
  std::vector<double> s1(R), s2(R), diag(R), mu(R);
  for (std::size_t r = 0; r < R; ++r) {
    const auto& rec = ensemble[r];
    if (!rec.has_cross()) throw Error(ErrorCode::inconsistent_state, "replica lacks cross sums");
    const std::size_t ia = rec.field_index(a.observable, a.time);
    const std::size_t ib = rec.field_index(b.observable, b.time);
    s1[r] = rec.sum(ia);
    s2[r] = rec.sum(ib);
    diag[r] = rec.cross_sum(ia, ib);
    mu[r] = rec.scaling.mu;
  }

  struct Parts {
    double F2, F1a, F1b, f2, cov, diag_term;
  };
  auto evaluate = [&](const std::vector<std::size_t>& idx) {
    double F2 = 0.0, F1a = 0.0, F1b = 0.0, P = 0.0, D = 0.0, m = 0.0;
    for (std::size_t r : idx) {
      const double u = mu[r];
      F2 += (s1[r] * s2[r] - diag[r]) / (u * u);
      F1a += s1[r] / u;
      F1b += s2[r] / u;
      P += s1[r] * s2[r] / (u * u);
      D += diag[r] / u;
      m += u;
    }
    const double n = static_cast<double>(idx.size());
    F2 /= n;
    F1a /= n;
    F1b /= n;
    P /= n;
    D /= n;
    m /= n;
    return Parts{F2, F1a, F1b, m * (F2 - F1a * F1b), m * (P - F1a * F1b), D};
  };

  std::vector<std::size_t> all(R);
  for (std::size_t r = 0; r < R; ++r) all[r] = r;
  const auto p = evaluate(all);
  CumulantEstimate e;
  e.F2 = p.F2;
  e.F1_a = p.F1a;
  e.F1_b = p.F1b;
  e.f2 = p.f2;
  e.field_covariance = p.cov;
  e.diagonal_term = p.diag_term;
  e.f2_ci = stats::kConfidenceZ *
            stats::bootstrap_sd(R, [&](const auto& idx) { return evaluate(idx).f2; }, stats::kBootstrapResamples,
                                bootstrap_seed);
  e.field_covariance_ci =
      stats::kConfidenceZ * stats::bootstrap_sd(R, [&](const auto& idx) { return evaluate(idx).cov; },
                                                stats::kBootstrapResamples, bootstrap_seed + 1);
  return e;
}

CovarianceEstimate field_covariance(const Ensemble& ensemble, const FieldRef& a, const FieldRef& b,
                                    std::uint64_t bootstrap_seed) {
  require_replicas(ensemble, kMinReplicasCumulant);
  const std::size_t R = ensemble.size();
  const auto xa = pairings(ensemble, a);
  const auto xb = pairings(ensemble, b);
  auto evaluate = [&](const std::vector<std::size_t>& idx) {
    const double n = static_cast<double>(idx.size());
    double ma = 0.0, mb = 0.0, mu = 0.0;
    for (std::size_t r : idx) {
      ma += xa[r];
      mb += xb[r];
      mu += ensemble[r].scaling.mu;
    }
    ma /= n;
    mb /= n;
    mu /= n;
    double c = 0.0;
    for (std::size_t r : idx) c += (xa[r] - ma) * (xb[r] - mb);
    return mu * c / n;
  };
  std::vector<std::size_t> all(R);
  for (std::size_t r = 0; r < R; ++r) all[r] = r;
  CovarianceEstimate e;
  e.value = evaluate(all);
  e.ci = stats::kConfidenceZ * stats::bootstrap_sd(R, evaluate, stats::kBootstrapResamples, bootstrap_seed);
  return e;
}

double log_mean_exp(std::span<const double> exponents) {
  if (exponents.empty()) throw Error(ErrorCode::insufficient_replicas, "empty ensemble");
  const double top = *std::max_element(exponents.begin(), exponents.end());
  if (!std::isfinite(top)) throw Error(ErrorCode::overflow, "non-finite exponent");
  double s = 0.0;
  for (double x : exponents) s += std::exp(x - top);
  return top + std::log(s / static_cast<double>(exponents.size()));
}

CgfEstimate estimate_cgf(const Ensemble& ensemble, const TestFunctionSpec& h, const FieldRef& field,
                         double amplitude, std::uint64_t bootstrap_seed) {
  if (!h.decay) throw Error(ErrorCode::amplitude_guard, "observable carries no velocity-decay bound");
  if (h.decay->C * std::abs(amplitude) > 1.0 + 1e-12)
    throw Error(ErrorCode::amplitude_guard, "sup norm bound exceeds 1");
  require_replicas(ensemble, 1);
  const std::size_t R = ensemble.size();
  const double mu = ensemble.front().scaling.mu;
  std::vector<double> ex(R);
  for (std::size_t r = 0; r < R; ++r)
    ex[r] = amplitude * ensemble[r].sum(ensemble[r].field_index(field.observable, field.time));

  CgfEstimate e;
  e.value = log_mean_exp(ex) / mu;

  const double top = *std::max_element(ex.begin(), ex.end());
  std::vector<double> w(R);
  double total = 0.0;
  for (std::size_t r = 0; r < R; ++r) total += (w[r] = std::exp(ex[r] - top));
  std::sort(w.begin(), w.end(), std::greater<>());
  const std::size_t k = std::max<std::size_t>(1, (R + 99) / 100);
  double head = 0.0;
  for (std::size_t r = 0; r < k; ++r) head += w[r];
  e.top_mass_fraction = head / total;
  e.heavy_tail_warning = e.top_mass_fraction > 0.5;

  if (R > 1) {
    std::vector<double> buf(R);
    e.ci = stats::kConfidenceZ * stats::bootstrap_sd(
                                     R,
                                     [&](const auto& idx) {
                                       for (std::size_t q = 0; q < idx.size(); ++q) buf[q] = ex[idx[q]];
                                       return log_mean_exp(buf) / mu;
                                     },
                                     stats::kBootstrapResamples, bootstrap_seed);
  }
  return e;
}

std::vector<std::vector<std::pair<int, int>>> pair_partitions(int p) {
  std::vector<std::vector<std::pair<int, int>>> out;
  if (p <= 0 || p % 2 != 0) return out;
  std::vector<std::pair<int, int>> current;
  std::vector<bool> used(p, false);
  std::function<void()> rec = [&]() {
    int first = -1;
    for (int k = 0; k < p; ++k)
      if (!used[k]) {
        first = k;
        break;
      }
    if (first < 0) {
      out.push_back(current);
      return;
    }
    used[first] = true;
    for (int k = first + 1; k < p; ++k) {
      if (used[k]) continue;
      used[k] = true;
      current.emplace_back(first, k);
      rec();
      current.pop_back();
      used[k] = false;
    }
    used[first] = false;
  };
  rec();
  return out;
}

WickResult wick_check(const Ensemble& ensemble, const std::vector<FieldRef>& fields, std::uint64_t bootstrap_seed) {
  const int p = static_cast<int>(fields.size());
  if (p < 2 || p > 4) throw Error(ErrorCode::k_too_large, "Wick checks cover 2 <= p <= 4");
  require_replicas(ensemble, p == 4 ? kMinReplicasWick4 : kMinReplicasCumulant);
  const std::size_t R = ensemble.size();
  std::vector<std::vector<double>> z;
  for (const auto& f : fields) z.push_back(fluctuation_fields(ensemble, f));
  const auto partitions = pair_partitions(p);

  auto evaluate = [&](const std::vector<std::size_t>& idx) {
    const double n = static_cast<double>(idx.size());
    double moment = 0.0;
    for (std::size_t r : idx) {
      double prod = 1.0;
      for (int l = 0; l < p; ++l) prod *= z[l][r];
      moment += prod;
    }
    moment /= n;
    double pairing = 0.0;
    for (const auto& part : partitions) {
      double prod = 1.0;
      for (const auto& [a, b] : part) {
        double c = 0.0;
        for (std::size_t r : idx) c += z[a][r] * z[b][r];
        prod *= c / n;
      }
      pairing += prod;
    }
    return std::pair{moment, pairing};
  };

  std::vector<std::size_t> all(R);
  for (std::size_t r = 0; r < R; ++r) all[r] = r;
  const auto [m, ps] = evaluate(all);
  WickResult w;
  w.moment = m;
  w.pairing_sum = ps;
  w.discrepancy = p == 2 ? 0.0 : m - ps;
  if (p != 2) {
    w.ci = stats::kConfidenceZ * stats::bootstrap_sd(
                                     R,
                                     [&](const auto& idx) {
                                       const auto [mb, pb] = evaluate(idx);
                                       return mb - pb;
                                     },
                                     stats::kBootstrapResamples, bootstrap_seed);
  }
  return w;
}

}  // namespace hsl::observables
