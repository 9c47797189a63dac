#include "hsl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "hsl/dsmc.hpp"
#include "hsl/experiments.hpp"
#include "hsl/rng.hpp"

namespace hsl::harness {

namespace fs = std::filesystem;
using nlohmann::json;
using observables::ReplicaRecord;

const char* version() { return HSL_VERSION_STRING; }

const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> kinds{"lanford-lln",   "equilibrium-fluctuations", "wick", "variance-scaling",
                                              "reversibility", "h-theorem", "cgf", "hamiltonian-checks"};
  return kinds;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::string hex64(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::config_invalid, what); }

json hermite(const std::string& name, std::array<int, 3> modes, std::array<int, 3> he, const char* phase = "cos") {
  return {{"kind", "fourier-hermite"},
          {"params", {{"name", name}, {"modes", modes}, {"hermite", he}, {"phase", phase}}}};
}

const json& maxwellian_f0() {
  static const json j = {{"spatial", {{"profile", "uniform"}}}, {"velocity", {{"law", "maxwellian"}}}};
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io_error, "cannot write " + tmp.string());
    out << text;
    if (!out) throw Error(ErrorCode::io_error, "short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::size_t resolve_workers(std::size_t requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

// Largest intensity any MD ensemble of the run uses.
double max_intensity(const ExperimentConfig& c) {
  double mu = c.scaling.mu;
  if (c.params().contains("mus"))
    for (const auto& m : c.params().at("mus")) mu = std::max(mu, m.get<double>());
  return mu;
}

void check_kind_fields(const ExperimentConfig& c) {
  static const std::map<std::string, std::vector<std::string>> required{
      {"lanford-lln", {"mus", "dsmc"}},
      {"equilibrium-fluctuations", {"stationarity", "taus", "kac", "grid", "linearized"}},
      {"wick", {"iid_replicas"}},
      {"variance-scaling", {"mus", "theta"}},
      {"reversibility", {"duration_mean_free_times", "exactness"}},
      {"h-theorem", {"particles", "dt", "outputs", "grid"}},
      {"cgf", {"amplitude", "bump", "poisson"}},
      {"hamiltonian-checks", {"grid", "quadrature", "linearized", "random_fields"}},
  };
  for (const auto& key : required.at(c.kind))
    if (!c.params().contains(key) || c.params().at(key).is_null())
      invalid("kind '" + c.kind + "' requires params." + key);
  const bool needs_observables = c.kind != "hamiltonian-checks" && c.kind != "reversibility" && c.kind != "h-theorem";
  if (needs_observables && c.observables.empty()) invalid("kind '" + c.kind + "' needs at least one observable");
  const bool needs_times = c.kind != "hamiltonian-checks" && c.kind != "reversibility";
  if (needs_times && c.times.empty()) invalid("kind '" + c.kind + "' needs sample times");
}

}  // namespace

json default_config(const std::string& kind) {
  json c = {{"kind", kind},
            {"scaling", {{"d", 2}, {"eps", 1e-3}, {"alpha", 1.0}}},
            {"f0", maxwellian_f0()},
            {"observables", json::array()},
            {"times", json::array()},
            {"horizon", 2.0},
            {"replicas", 400},
            {"seed", 20240601},
            {"out", "runs/" + kind},
            {"limits", {{"max_events", 2e10}}},
            {"params", json::object()}};
  if (kind == "lanford-lln") {
    c["f0"] = {{"spatial", {{"profile", "cosine"}, {"amplitude", 0.3}, {"axis", 0}}},
               {"velocity", {{"law", "maxwellian"}}}};
    c["observables"] = {hermite("cos_x1", {1, 0, 0}, {0, 0, 0}),
                        hermite("cos_x1_he2_v1", {1, 0, 0}, {2, 0, 0}),
                        hermite("sin_x1_he1_v1", {1, 0, 0}, {1, 0, 0}, "sin"),
                        hermite("cos_x1_he2_v2", {1, 0, 0}, {0, 2, 0}),
                        hermite("cos_2x1", {2, 0, 0}, {0, 0, 0})};
    c["times"] = {0.05, 0.1, 0.2};
    c["horizon"] = 0.2;
    c["params"] = {{"mus", {1000.0, 2000.0}},
                   {"dsmc", {{"runs", 10}, {"particles", 1000000}, {"dt", 0.005}, {"cells", {20, 1, 1}}}}};
  } else if (kind == "equilibrium-fluctuations") {
    c["observables"] = {hermite("he2_v1", {0, 0, 0}, {2, 0, 0}), hermite("he1_v1_he1_v2", {0, 0, 0}, {1, 1, 0}),
                        hermite("he3_v1", {0, 0, 0}, {3, 0, 0})};
    c["times"] = {0.0, 0.25, 0.5, 2.0};
    c["horizon"] = 2.0;
    c["params"] = {{"stationarity", {{"time", 2.0}, {"bins", 20}, {"level", 0.01}}},
                   {"taus", {0.0, 0.25, 0.5}},
                   {"kac", {{"replicas", 10000}, {"particles", 1000}}},
                   {"grid", {{"v_max", 6.0}, {"nodes", 41}}},
                   {"linearized", {{"samples", 600000}, {"seed", 7}}}};
  } else if (kind == "wick") {
    c["observables"] = {hermite("he1_v1", {0, 0, 0}, {1, 0, 0})};
    c["times"] = {0.0};
    c["horizon"] = 0.0;
    c["replicas"] = 1000;
    c["params"] = {{"iid_replicas", 10000}};
  } else if (kind == "variance-scaling") {
    c["observables"] = {hermite("cos_x1", {1, 0, 0}, {0, 0, 0})};
    c["times"] = {0.1};
    c["horizon"] = 0.1;
    c["replicas"] = 1000;
    c["params"] = {{"mus", {250.0, 500.0, 1000.0, 2000.0}}, {"theta", 0.1}, {"slope_tolerance", 0.1}};
  } else if (kind == "reversibility") {
    c["scaling"]["eps"] = 1.0 / 64.0;
    c["replicas"] = 1;
    c["horizon"] = 1.0;
    c["params"] = {{"duration_mean_free_times", 1.0},
                   {"position_tolerance", 1e-6},
                   {"exactness",
                    {{"runs", 50},
                     {"eps", 1e-3},
                     {"brute_force_runs", 5},
                     {"brute_force_eps", 1.0 / 200.0},
                     {"duration_mean_free_times", 1.0}}}};
  } else if (kind == "h-theorem") {
    c["f0"] = {{"spatial", {{"profile", "uniform"}}},
               {"velocity", {{"law", "bimodal"}, {"shift", 1.5}, {"sigma", 0.5}}}};
    c["observables"] = {hermite("he2_v1", {0, 0, 0}, {2, 0, 0})};
    c["times"] = {2.5};
    c["horizon"] = 2.5;
    c["replicas"] = 32;
    c["params"] = {{"particles", 100000},
                   {"dt", 0.005},
                   {"outputs", 50},
                   {"grid", {{"v_max", 6.0}, {"nodes", 41}}}};
  } else if (kind == "cgf") {
    c["observables"] = {
        {{"kind", "gaussian-bump"},
         {"params", {{"name", "bump_v"}, {"center_v", {0.0, 0.0, 0.0}}, {"width_v", 1.0}, {"decay", {{"C", 1.0}}}}}}};
    c["times"] = {0.1};
    c["horizon"] = 0.1;
    c["replicas"] = 1000;
    c["params"] = {{"amplitude", 0.05}, {"bump", "bump_v"}, {"poisson", {{"constant", 0.02}, {"replicas", 10000}}}};
  } else if (kind == "hamiltonian-checks") {
    c["replicas"] = 1;
    c["horizon"] = 0.0;
    c["params"] = {{"grid", {{"v_max", 6.0}, {"nodes", 41}}},
                   {"quadrature", {{"samples", 20000}, {"seed", 11}}},
                   {"linearized", {{"samples", 600000}, {"seed", 7}}},
                   {"random_fields", 1000},
                   {"gradient_step", 1e-4}};
  } else {
    invalid("unknown experiment kind '" + kind + "'");
  }
  return c;
}

ExperimentConfig load_config(const json& user) {
  if (!user.is_object() || !user.contains("kind") || !user.at("kind").is_string())
    invalid("configuration must be a JSON object with a string 'kind'");
  ExperimentConfig c;
  c.kind = user.at("kind").get<std::string>();
  const auto& kinds = experiment_kinds();
  if (std::find(kinds.begin(), kinds.end(), c.kind) == kinds.end()) invalid("unknown experiment kind '" + c.kind + "'");
  c.doc = default_config(c.kind);
  c.doc.merge_patch(user);
  try {
    const auto& s = c.doc.at("scaling");
    c.scaling = validate_scaling(s.at("d").get<int>(), s.at("eps").get<double>(), s.value("alpha", 1.0));
    c.f0 = ensembles::initial_density_from_json(c.doc.at("f0"));
    c.f0.validate(c.scaling.d);
    std::vector<std::string> names;
    for (const auto& o : c.doc.at("observables")) {
      auto h = test_function_from_json(o);
      validate(h, c.scaling.d);
      if (h.name.empty()) invalid("observables need names");
      if (std::find(names.begin(), names.end(), h.name) != names.end()) invalid("duplicate observable '" + h.name + "'");
      names.push_back(h.name);
      c.observables.push_back(std::move(h));
    }
    c.times = c.doc.at("times").get<std::vector<double>>();
    const double horizon = c.doc.at("horizon").get<double>();
    for (std::size_t k = 0; k < c.times.size(); ++k) {
      if (!(c.times[k] >= 0.0) || c.times[k] > horizon + 1e-12) invalid("sample time outside [0, horizon]");
      if (k > 0 && !(c.times[k] > c.times[k - 1])) invalid("sample times must increase strictly");
    }
    const auto& R = c.doc.at("replicas");
    if (!R.is_number_integer() || R.get<long long>() < 1) invalid("replicas must be an integer >= 1");
    c.replicas = R.get<std::size_t>();
    const auto& seed = c.doc.at("seed");
    if (!seed.is_number_integer()) invalid("seed must be an integer");
    c.seed = seed.get<std::uint64_t>();
    c.out = c.doc.at("out").get<std::string>();
    if (!c.doc.at("params").is_object()) invalid("params must be an object");
  } catch (const Error& e) {
    if (e.code() == ErrorCode::config_invalid) throw;
    invalid(e.what());
  } catch (const json::exception& e) {
    invalid(e.what());
  }
  check_kind_fields(c);
  return c;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) invalid("override must look like key.path=value");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) invalid("empty key in override '" + path + "'");
    if (node->is_null()) *node = json::object();
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(key);
      } catch (const std::exception&) {
        invalid("array index expected in '" + path + "'");
      }
      if (idx >= node->size()) invalid("array index out of range in '" + path + "'");
      node = &(*node)[idx];
    } else if (node->is_object()) {
      node = &(*node)[key];
    } else {
      invalid("cannot descend into a scalar at '" + key + "'");
    }
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = std::move(value);
}

std::string config_hash(const json& doc) {
  json copy = doc;
  copy.erase("out");
  return hex64(fnv1a64(copy.dump() + "|" + version()));
}

json to_json(const CriterionResult& c) {
  return {{"id", c.id},
          {"name", c.name},
          {"passed", c.passed},
          {"measured", c.measured},
          {"target", c.target},
          {"tolerance", c.tolerance},
          {"details", c.details}};
}

bool ExperimentReport::all_passed() const {
  return !criteria.empty() &&
         std::all_of(criteria.begin(), criteria.end(), [](const CriterionResult& c) { return c.passed; });
}

json ExperimentReport::to_json() const {
  json crit = json::array();
  for (const auto& c : criteria) crit.push_back(harness::to_json(c));
  json echo = config;
  echo.erase("out");
  return {{"kind", kind},       {"version", version()}, {"config_hash", config_hash},
          {"config", echo},     {"criteria", crit},     {"all_passed", all_passed()}};
}

// --- replica persistence ------------------------------------------------------

void write_replica_file(const std::string& path, const std::vector<ReplicaRecord>& records) {
  std::string text;
  for (const auto& r : records) {
    const std::string body = observables::to_json(r).dump();
    json line = {{"record", json::parse(body)}, {"checksum", hex64(fnv1a64(body))}};
    text += line.dump();
    text += '\n';
  }
  // Trailer: a file cut at a line boundary still passes every per-line checksum.
  text += json{{"records", records.size()}}.dump();
  text += '\n';
  write_text(path, text);
}

std::optional<std::vector<ReplicaRecord>> read_replica_file(const std::string& path, const std::string& expected_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::vector<ReplicaRecord> out;
  std::string line;
  bool complete = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (complete) return std::nullopt;
    try {
      const json j = json::parse(line);
      if (j.contains("records")) {
        if (j.at("records").get<std::size_t>() != out.size()) return std::nullopt;
        complete = true;
        continue;
      }
      const std::string body = j.at("record").dump();
      if (j.at("checksum").get<std::string>() != hex64(fnv1a64(body))) return std::nullopt;
      auto r = observables::replica_record_from_json(j.at("record"));
      if (r.config_hash != expected_hash) return std::nullopt;
      out.push_back(std::move(r));
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }
  if (!complete) return std::nullopt;
  if (out.empty()) return std::nullopt;
  return out;
}

ReplicaRunner::ReplicaRunner(std::string hash, std::uint64_t root_seed, std::optional<std::string> replica_dir,
                             std::size_t workers, std::ostream* log)
    : hash_(std::move(hash)), root_(root_seed), dir_(std::move(replica_dir)), workers_(resolve_workers(workers)),
      log_(log) {}

std::vector<std::vector<ReplicaRecord>> ReplicaRunner::run(std::size_t count, const ReplicaFunction& fn) {
  std::vector<std::vector<ReplicaRecord>> results(count);
  std::vector<std::exception_ptr> errors(count);
  std::vector<char> resumed(count, 0);
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;

  auto work = [&]() {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= count) return;
      const std::uint64_t seed = derive_seed(root_, k);
      try {
        std::optional<std::string> path;
        if (dir_) path = (fs::path(*dir_) / (std::to_string(seed) + ".jsonl")).string();
        if (path) {
          if (auto loaded = read_replica_file(*path, hash_)) {
            results[k] = std::move(*loaded);
            resumed[k] = 1;
            continue;
          }
        }
        auto recs = fn(k, seed);
        for (auto& r : recs) {
          r.config_hash = hash_;
          r.validate();
        }
        if (path) write_replica_file(*path, recs);
        results[k] = std::move(recs);
      } catch (...) {
        errors[k] = std::current_exception();
      }
      if (log_ && (k + 1) % 1000 == 0) {
        std::lock_guard<std::mutex> lock(log_mutex);
        *log_ << "  replica " << (k + 1) << "/" << count << "\n";
      }
    }
  };

  const std::size_t n = std::min(workers_, std::max<std::size_t>(count, 1));
  if (n <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  for (char r : resumed) (r ? resumed_ : computed_) += 1;
  return results;
}

std::vector<ReplicaRecord> select(const std::vector<std::vector<ReplicaRecord>>& all, const std::string& label) {
  std::vector<ReplicaRecord> out;
  for (const auto& recs : all)
    for (const auto& r : recs)
      if (r.label == label) out.push_back(r);
  return out;
}

observables::EnsembleStats aggregate_replicas(const std::vector<ReplicaRecord>& records) {
  if (records.empty()) return {};
  for (const auto& r : records)
    if (r.config_hash != records.front().config_hash)
      throw Error(ErrorCode::config_hash_mismatch, "records from different configurations");
  std::vector<ReplicaRecord> sorted = records;
  std::stable_sort(sorted.begin(), sorted.end(), [](const ReplicaRecord& a, const ReplicaRecord& b) {
    return a.label != b.label ? a.label < b.label : a.seed < b.seed;
  });
  return observables::compute_stats(sorted);
}

ExperimentReport run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  const std::string hash = config_hash(config.doc);

  const double horizon = config.doc.at("horizon").get<double>();
  const double max_events = config.doc.at("limits").value("max_events", 2e10);
  const double expected = static_cast<double>(config.replicas) * max_intensity(config) * horizon * 0.5 *
                          kinetic::equilibrium_collision_rate(config.scaling.d, 61);
  if (expected > max_events)
    throw Error(ErrorCode::resource_budget_exceeded,
                "about " + std::to_string(expected) + " collisions expected, cap " + std::to_string(max_events));

  const fs::path out = config.out;
  std::optional<std::string> replica_dir;
  if (options.persist) {
    fs::create_directories(out / "replicas");
    write_text(out / "config.json", config.doc.dump(2) + "\n");
    replica_dir = (out / "replicas").string();
  }
  ReplicaRunner runner(hash, config.seed, replica_dir, options.workers, options.log);
  KindOutput result = experiment_runner(config.kind)(config, runner);

  ExperimentReport report;
  report.kind = config.kind;
  report.config_hash = hash;
  report.config = config.doc;
  report.criteria = std::move(result.criteria);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  report.telemetry = result.telemetry;
  report.telemetry["wall_seconds"] = wall;
  report.telemetry["replicas_computed"] = runner.computed();
  report.telemetry["replicas_resumed"] = runner.resumed();
  report.telemetry["workers"] = resolve_workers(options.workers);

  if (options.persist) {
    for (const auto& [name, text] : result.tables) write_text(out / "tables" / (name + ".csv"), text);
    for (const auto& [name, text] : result.plotdata) write_text(out / "plotdata" / (name + ".csv"), text);
    write_text(out / "report.json", report.to_json().dump(2) + "\n");
    write_text(out / "telemetry.json", report.telemetry.dump(2) + "\n");
  }
  return report;
}

}  // namespace hsl::harness
