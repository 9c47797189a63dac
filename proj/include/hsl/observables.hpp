#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hsl/core_model.hpp"
#include "hsl/test_functions.hpp"

namespace hsl::observables {

/// Raw per-replica sums of registered observables at the sample times.
///
/// sums[t * K + o] = sum_i h_o(z_i(theta_t)). When cross sums are kept,
/// cross[p * (mK) + q] = sum_i h_a(z_i(theta_a)) h_b(z_i(theta_b)) for the
/// flattened pairs p = (t_a, o_a), q = (t_b, o_b): the diagonal that separates
/// distinct-index tuple sums from products of one-particle sums.
struct ReplicaRecord {
  std::uint64_t seed = 0;
  std::string label;
  std::string config_hash;
  ScalingParams scaling;
  std::vector<double> times;
  std::vector<std::string> observables;
  std::size_t n = 0;
  std::vector<double> sums;
  std::vector<std::uint64_t> collisions;
  std::vector<double> cross;
  nlohmann::json extra = nlohmann::json::object();

  std::size_t num_fields() const { return times.size() * observables.size(); }
  std::size_t field_index(const std::string& observable, double time) const;
  double sum(std::size_t field) const { return sums.at(field); }
  double pairing(std::size_t field) const { return sums.at(field) / scaling.mu; }
  bool has_cross() const { return !cross.empty(); }
  double cross_sum(std::size_t a, std::size_t b) const { return cross.at(a * num_fields() + b); }

  /// Throws inconsistent_state unless times increase strictly and array sizes agree.
  void validate() const;
};

nlohmann::json to_json(const ReplicaRecord& record);
ReplicaRecord replica_record_from_json(const nlohmann::json& j);

/// Accumulates a ReplicaRecord while a system is advanced through the sample times.
class ReplicaRecorder {
 public:
  ReplicaRecorder(std::vector<double> times, std::vector<TestFunctionSpec> observables, bool keep_cross);

  /// Evaluates every observable on `system` at sample time index t.
  void observe(std::size_t t, const ParticleSystem& system, std::uint64_t collisions = 0);

  ReplicaRecord finish(std::uint64_t seed, std::string label = {}) const;

 private:
  std::vector<double> times_;
  std::vector<TestFunctionSpec> specs_;
  bool keep_cross_;
  ScalingParams scaling_;
  std::size_t n_ = 0;
  bool have_n_ = false;
  std::vector<double> sums_;
  std::vector<std::uint64_t> collisions_;
  std::vector<std::vector<double>> values_;
};

// --- single-configuration pairings -------------------------------------------

/// (1/mu) sum_i h(x_i, v_i).
double empirical_pairing(const ParticleSystem& system, const TestFunctionSpec& h);

struct Phase {
  Vec x;
  Vec v;
};

using KParticleFunction = std::function<double(std::span<const Phase>)>;

inline constexpr int kMaxTupleOrder = 3;

/// (1/mu^k) sum over ordered k-tuples of distinct indices of h_k. k <= 3.
double k_particle_pairing(const ParticleSystem& system, const KParticleFunction& hk, int k);

// --- ensemble estimators ----------------------------------------------------

using Ensemble = std::vector<ReplicaRecord>;

struct FieldRef {
  std::string observable;
  double time = 0.0;
};

struct StatEntry {
  std::string observable;
  double time = 0.0;
  double mean = 0.0;
  double var = 0.0;
  double m3 = 0.0;
  double m4 = 0.0;
  std::size_t R = 0;
  double ci = 0.0;
};

/// Statistics of <pi_theta, h> over replicas for every (observable, time).
struct EnsembleStats {
  std::vector<StatEntry> entries;

  const StatEntry& find(const std::string& observable, double time) const;
};

EnsembleStats compute_stats(const Ensemble& ensemble);

/// Columns observable,time,mean,var,m3,m4,R,ci.
void write_stats_csv(std::ostream& os, const EnsembleStats& stats);

/// sqrt(mu) (<pi_theta, h> - ensemble_mean).
double fluctuation_field(const ReplicaRecord& record, const FieldRef& field, double ensemble_mean);

/// Replica-wise fluctuation fields, centred at the ensemble mean.
std::vector<double> fluctuation_fields(const Ensemble& ensemble, const FieldRef& field);

inline constexpr std::size_t kMinReplicasCumulant = 100;
inline constexpr std::size_t kMinReplicasWick4 = 1000;

struct CumulantEstimate {
  double F2 = 0.0;
  double F1_a = 0.0;
  double F1_b = 0.0;
  double f2 = 0.0;
  double f2_ci = 0.0;
  /// mu * Cov(<pi,h_a>, <pi,h_b>) with 1/R normalization, i.e. E[zeta_a zeta_b].
  double field_covariance = 0.0;
  double field_covariance_ci = 0.0;
  /// E[diagonal] / mu; field_covariance = f2 + diagonal_term up to rounding.
  double diagonal_term = 0.0;
};

/// Requires cross sums; two-time tuple sums with the diagonal removed.
CumulantEstimate estimate_F2_and_cumulant(const Ensemble& ensemble, const FieldRef& a, const FieldRef& b,
                                          std::uint64_t bootstrap_seed = 1);

struct CovarianceEstimate {
  double value = 0.0;
  double ci = 0.0;
};

/// mean_r zeta_a zeta_b from one-particle sums alone (no cross sums needed).
CovarianceEstimate field_covariance(const Ensemble& ensemble, const FieldRef& a, const FieldRef& b,
                                    std::uint64_t bootstrap_seed = 4);

struct CgfEstimate {
  double value = 0.0;
  double ci = 0.0;
  bool heavy_tail_warning = false;
  double top_mass_fraction = 0.0;
};

/// (1/mu) log mean_r exp(s * S_h). The product s*h must carry a decay bound with C <= 1.
CgfEstimate estimate_cgf(const Ensemble& ensemble, const TestFunctionSpec& h, const FieldRef& field,
                         double amplitude = 1.0, std::uint64_t bootstrap_seed = 2);

/// Log-mean-exp on raw exponents with max shifting; shared by the CGF estimator and its oracles.
double log_mean_exp(std::span<const double> exponents);

struct WickResult {
  double moment = 0.0;
  double pairing_sum = 0.0;
  double discrepancy = 0.0;
  double ci = 0.0;
};

/// Compares E[prod zeta] with the sum over pair partitions of estimated covariances.
WickResult wick_check(const Ensemble& ensemble, const std::vector<FieldRef>& fields,
                      std::uint64_t bootstrap_seed = 3);

/// All pair partitions of {0..p-1}; empty for odd p.
std::vector<std::vector<std::pair<int, int>>> pair_partitions(int p);

}  // namespace hsl::observables
