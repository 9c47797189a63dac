#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hsl/ensembles.hpp"
#include "hsl/observables.hpp"
#include "hsl/test_functions.hpp"

namespace hsl::harness {

const char* version();

/// lanford-lln, equilibrium-fluctuations, wick, variance-scaling, reversibility,
/// h-theorem, cgf, hamiltonian-checks.
const std::vector<std::string>& experiment_kinds();

/// Complete configuration document for `kind` at desk scale.
nlohmann::json default_config(const std::string& kind);

struct ExperimentConfig {
  std::string kind;
  nlohmann::json doc;
  ScalingParams scaling;
  ensembles::InitialDensitySpec f0;
  std::vector<TestFunctionSpec> observables;
  std::vector<double> times;
  std::size_t replicas = 1;
  std::uint64_t seed = 1;
  std::string out;

  const nlohmann::json& params() const { return doc.at("params"); }
};

/// Merges `user` over the defaults of its kind and validates. Throws config_invalid.
ExperimentConfig load_config(const nlohmann::json& user);

/// Applies `a.b.c=value`; the value is parsed as JSON when possible, else taken as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// FNV-1a over the canonical dump of the document (without "out") and the version string.
std::string config_hash(const nlohmann::json& doc);

std::uint64_t fnv1a64(const std::string& bytes);

struct CriterionResult {
  std::string id;
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double target = 0.0;
  double tolerance = 0.0;
  nlohmann::json details = nlohmann::json::object();
};

nlohmann::json to_json(const CriterionResult& c);

struct ExperimentReport {
  std::string kind;
  std::string config_hash;
  nlohmann::json config;
  std::vector<CriterionResult> criteria;
  /// Wall-clock and event counts; persisted apart from report.json so reports stay byte-identical.
  nlohmann::json telemetry = nlohmann::json::object();

  bool all_passed() const;
  nlohmann::json to_json() const;
};

struct RunOptions {
  /// 0 selects the hardware parallelism.
  std::size_t workers = 0;
  /// Persist replicas, tables and reports under the config's output directory.
  bool persist = true;
  std::ostream* log = nullptr;
};

/// Replica k of the run uses seed derive_seed(root, k) and writes replicas/<seed>.jsonl.
ExperimentReport run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Moments per (observable, time) over records sorted canonically by (label, seed).
/// Throws config_hash_mismatch when records disagree on the config hash.
observables::EnsembleStats aggregate_replicas(const std::vector<observables::ReplicaRecord>& records);

// --- pieces shared with the experiment kinds ---------------------------------

/// Produces every record of replica k (one per sub-ensemble label).
using ReplicaFunction = std::function<std::vector<observables::ReplicaRecord>(std::size_t k, std::uint64_t seed)>;

class ReplicaRunner {
 public:
  ReplicaRunner(std::string hash, std::uint64_t root_seed, std::optional<std::string> replica_dir, std::size_t workers,
                std::ostream* log);

  /// Records of replicas 0..count-1 in index order, resumed from disk when a file
  /// passes its checksums, recomputed (and rewritten) otherwise.
  std::vector<std::vector<observables::ReplicaRecord>> run(std::size_t count, const ReplicaFunction& fn);

  std::size_t resumed() const { return resumed_; }
  std::size_t computed() const { return computed_; }

 private:
  std::string hash_;
  std::uint64_t root_;
  std::optional<std::string> dir_;
  std::size_t workers_;
  std::ostream* log_;
  std::size_t resumed_ = 0;
  std::size_t computed_ = 0;
};

/// Writes one checksummed JSON line per record.
void write_replica_file(const std::string& path, const std::vector<observables::ReplicaRecord>& records);

/// Returns nullopt if the file is missing, any line fails its checksum, or a hash differs.
std::optional<std::vector<observables::ReplicaRecord>> read_replica_file(const std::string& path,
                                                                        const std::string& expected_hash);

/// Output of one experiment kind before persistence.
struct KindOutput {
  std::vector<CriterionResult> criteria;
  std::map<std::string, std::string> tables;
  std::map<std::string, std::string> plotdata;
  nlohmann::json telemetry = nlohmann::json::object();
};

using KindRunner = std::function<KindOutput(const ExperimentConfig&, ReplicaRunner&)>;

/// Records of one label across replicas, in replica order.
std::vector<observables::ReplicaRecord> select(const std::vector<std::vector<observables::ReplicaRecord>>& all,
                                               const std::string& label);

}  // namespace hsl::harness
