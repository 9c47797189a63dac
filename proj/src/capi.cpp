#include "hsl/hsl.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "hsl/core_model.hpp"
#include "hsl/ensembles.hpp"
#include "hsl/experiments.hpp"
#include "hsl/hardsphere_md.hpp"
#include "hsl/harness.hpp"
#include "hsl/kac.hpp"

struct hsl_system {
  hsl::ParticleSystem state;
};

struct hsl_report {
  hsl::harness::ExperimentReport report;
};

namespace {

thread_local std::string g_last_error;

int fail(int code, const std::string& msg) {
  g_last_error = msg;
  return code;
}

template <class F>
int guarded(F&& f) {
  try {
    g_last_error.clear();
    f();
    return HSL_OK;
  } catch (const hsl::Error& e) {
    return fail(static_cast<int>(e.code()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(HSL_CONFIG_INVALID, e.what());
  } catch (const std::exception& e) {
    return fail(HSL_INTERNAL, e.what());
  } catch (...) {
    return fail(HSL_INTERNAL, "unknown exception");
  }
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

#define HSL_REQUIRE(p) \
  if (!(p)) return fail(HSL_NULL_ARGUMENT, #p " is null")

}  // namespace

extern "C" {

const char* hsl_version(void) { return hsl::harness::version(); }

const char* hsl_status_name(int status) {
  if (status == HSL_NULL_ARGUMENT) return "null-argument";
  if (status == HSL_INTERNAL) return "internal";
  if (status < 0 || status > HSL_IO_ERROR) return "unknown";
  return hsl::to_string(static_cast<hsl::ErrorCode>(status));
}

const char* hsl_last_error(void) { return g_last_error.c_str(); }

void hsl_string_free(char* s) { std::free(s); }

int hsl_system_sample_equilibrium(int d, double eps, double alpha, uint64_t seed, hsl_system** out) {
  HSL_REQUIRE(out);
  return guarded([&] {
    const auto scaling = hsl::validate_scaling(d, eps, alpha);
    auto sys = std::make_unique<hsl_system>();
    sys->state = hsl::ensembles::sample_equilibrium(scaling, seed).first;
    *out = sys.release();
  });
}

int hsl_system_read_snapshot(const char* path, hsl_system** out) {
  HSL_REQUIRE(path);
  HSL_REQUIRE(out);
  return guarded([&] {
    std::ifstream in(path);
    if (!in) throw hsl::Error(hsl::ErrorCode::io_error, std::string("cannot open ") + path);
    auto sys = std::make_unique<hsl_system>();
    sys->state = hsl::read_snapshot_csv(in);
    *out = sys.release();
  });
}

int hsl_system_write_snapshot(const hsl_system* s, const char* path) {
  HSL_REQUIRE(s);
  HSL_REQUIRE(path);
  return guarded([&] {
    std::ofstream os(path);
    if (!os) throw hsl::Error(hsl::ErrorCode::io_error, std::string("cannot write ") + path);
    hsl::write_snapshot_csv(os, s->state);
  });
}

int hsl_system_advance(hsl_system* s, double duration, uint64_t* collisions) {
  HSL_REQUIRE(s);
  return guarded([&] {
    hsl::md::AdvanceOptions o;
    o.record_log = false;
    auto r = hsl::md::advance(s->state, duration, o);
    s->state = std::move(r.system);
    if (collisions) *collisions = r.collisions;
  });
}

int hsl_system_reverse(hsl_system* s) {
  HSL_REQUIRE(s);
  return guarded([&] { s->state = hsl::md::reverse_velocities(std::move(s->state)); });
}

int hsl_system_size(const hsl_system* s, size_t* n) {
  HSL_REQUIRE(s);
  HSL_REQUIRE(n);
  *n = s->state.size();
  return HSL_OK;
}

int hsl_system_time(const hsl_system* s, double* t) {
  HSL_REQUIRE(s);
  HSL_REQUIRE(t);
  *t = s->state.time;
  return HSL_OK;
}

int hsl_system_invariants(const hsl_system* s, double momentum[3], double* energy, double* min_distance) {
  HSL_REQUIRE(s);
  return guarded([&] {
    if (momentum) {
      const auto P = s->state.total_momentum();
      for (int a = 0; a < 3; ++a) momentum[a] = P[a];
    }
    if (energy) *energy = s->state.kinetic_energy();
    if (min_distance) *min_distance = s->state.min_pair_distance();
  });
}

void hsl_system_free(hsl_system* s) { delete s; }

int hsl_experiment_kinds(char** json_array) {
  HSL_REQUIRE(json_array);
  return guarded([&] { *json_array = dup(nlohmann::json(hsl::harness::experiment_kinds()).dump()); });
}

int hsl_default_config(const char* kind, char** json) {
  HSL_REQUIRE(kind);
  HSL_REQUIRE(json);
  return guarded([&] { *json = dup(hsl::harness::default_config(kind).dump(2)); });
}

int hsl_config_override(const char* json, const char* assignment, char** out) {
  HSL_REQUIRE(json);
  HSL_REQUIRE(assignment);
  HSL_REQUIRE(out);
  return guarded([&] {
    auto doc = nlohmann::json::parse(json);
    hsl::harness::apply_override(doc, assignment);
    *out = dup(doc.dump(2));
  });
}

int hsl_config_resolve(const char* json, char** out) {
  HSL_REQUIRE(json);
  HSL_REQUIRE(out);
  return guarded([&] { *out = dup(hsl::harness::load_config(nlohmann::json::parse(json)).doc.dump(2)); });
}

int hsl_run_experiment(const char* config_json, size_t workers, int persist, hsl_report** out) {
  HSL_REQUIRE(config_json);
  HSL_REQUIRE(out);
  return guarded([&] {
    const auto config = hsl::harness::load_config(nlohmann::json::parse(config_json));
    hsl::harness::RunOptions o;
    o.workers = workers;
    o.persist = persist != 0;
    auto r = std::make_unique<hsl_report>();
    r->report = hsl::harness::run_experiment(config, o);
    *out = r.release();
  });
}

int hsl_report_json(const hsl_report* r, char** json) {
  HSL_REQUIRE(r);
  HSL_REQUIRE(json);
  return guarded([&] { *json = dup(r->report.to_json().dump(2)); });
}

int hsl_report_telemetry(const hsl_report* r, char** json) {
  HSL_REQUIRE(r);
  HSL_REQUIRE(json);
  return guarded([&] { *json = dup(r->report.telemetry.dump(2)); });
}

int hsl_report_all_passed(const hsl_report* r, int* passed) {
  HSL_REQUIRE(r);
  HSL_REQUIRE(passed);
  *passed = r->report.all_passed() ? 1 : 0;
  return HSL_OK;
}

int hsl_report_criteria_count(const hsl_report* r, size_t* n) {
  HSL_REQUIRE(r);
  HSL_REQUIRE(n);
  *n = r->report.criteria.size();
  return HSL_OK;
}

int hsl_report_criterion(const hsl_report* r, size_t index, const char** id, int* passed, double* measured,
                         double* target, double* tolerance) {
  HSL_REQUIRE(r);
  if (index >= r->report.criteria.size()) return fail(HSL_MALFORMED_SPEC, "criterion index out of range");
  const auto& c = r->report.criteria[index];
  if (id) *id = c.id.c_str();
  if (passed) *passed = c.passed ? 1 : 0;
  if (measured) *measured = c.measured;
  if (target) *target = c.target;
  if (tolerance) *tolerance = c.tolerance;
  return HSL_OK;
}

void hsl_report_free(hsl_report* r) { delete r; }

int hsl_verify_replicas(const char* dir, const char* config_hash, size_t* valid, size_t* corrupt) {
  HSL_REQUIRE(dir);
  HSL_REQUIRE(config_hash);
  HSL_REQUIRE(valid);
  HSL_REQUIRE(corrupt);
  return guarded([&] {
    namespace fs = std::filesystem;
    *valid = 0;
    *corrupt = 0;
    const fs::path root = fs::path(dir) / "replicas";
    if (!fs::is_directory(root)) throw hsl::Error(hsl::ErrorCode::io_error, "no replicas directory under " + std::string(dir));
    for (const auto& entry : fs::directory_iterator(root)) {
      if (entry.path().extension() != ".jsonl") continue;
      if (hsl::harness::read_replica_file(entry.path().string(), config_hash)) ++*valid;
      else ++*corrupt;
    }
  });
}

int hsl_kac_run(const char* request_json, char** result_json) {
  HSL_REQUIRE(request_json);
  HSL_REQUIRE(result_json);
  return guarded([&] {
    const auto j = nlohmann::json::parse(request_json);
    hsl::kinetic::KacConfig c;
    c.d = j.value("d", 2);
    c.particles = j.value("particles", std::size_t{1000});
    c.seed = j.value("seed", std::uint64_t{1});
    c.output_times = j.at("times").get<std::vector<double>>();
    if (j.contains("f0")) c.f0 = hsl::ensembles::initial_density_from_json(j.at("f0"));
    if (j.contains("observables"))
      for (const auto& o : j.at("observables")) c.observables.push_back(hsl::test_function_from_json(o));
    const auto res = hsl::kinetic::kac_homogeneous(c);
    nlohmann::json out = {{"collisions", res.collisions},
                          {"candidates", res.candidates},
                          {"majorant_doublings", res.majorant_doublings}};
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& o : res.outputs) {
      nlohmann::json means = nlohmann::json::object();
      for (std::size_t k = 0; k < c.observables.size(); ++k)
        means[c.observables[k].name] = o.sums[k] / static_cast<double>(c.particles);
      rows.push_back({{"time", o.time},
                      {"momentum", {o.momentum[0], o.momentum[1], o.momentum[2]}},
                      {"energy", o.energy},
                      {"means", means}});
    }
    out["outputs"] = rows;
    *result_json = dup(out.dump(2));
  });
}

}  // extern "C"
