// Links against the shared library only; nothing here sees the C++ internals.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <string>

#include <json.hpp>

#include "hsl/hsl.h"

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  hsl_string_free(s);
  return out;
}

}  // namespace

TEST_CASE("status names and errors") {
  CHECK(std::string(hsl_version()).size() > 0);
  CHECK(std::string(hsl_status_name(HSL_OK)) == "ok");
  CHECK(std::string(hsl_status_name(HSL_NULL_ARGUMENT)) == "null-argument");
  hsl_system* s = nullptr;
  CHECK(hsl_system_sample_equilibrium(4, 1e-3, 1.0, 1, &s) == HSL_INVALID_DIMENSION);
  CHECK(s == nullptr);
  CHECK(std::string(hsl_last_error()).size() > 0);
  CHECK(hsl_system_sample_equilibrium(2, 1e-3, 1.0, 1, nullptr) == HSL_NULL_ARGUMENT);
  CHECK(hsl_system_read_snapshot("/nonexistent/file.csv", &s) == HSL_IO_ERROR);
}

TEST_CASE("system lifecycle") {
  hsl_system* s = nullptr;
  REQUIRE(hsl_system_sample_equilibrium(2, 1.0 / 64.0, 1.0, 3, &s) == HSL_OK);
  size_t n = 0;
  REQUIRE(hsl_system_size(s, &n) == HSL_OK);
  CHECK(n > 0);
  double p0[3], e0 = 0, d0 = 0;
  REQUIRE(hsl_system_invariants(s, p0, &e0, &d0) == HSL_OK);
  CHECK(d0 >= 1.0 / 64.0);

  uint64_t collisions = 0;
  REQUIRE(hsl_system_advance(s, 0.2, &collisions) == HSL_OK);
  CHECK(collisions > 0);
  double t = 0;
  hsl_system_time(s, &t);
  CHECK(t == doctest::Approx(0.2));
  double p1[3], e1 = 0;
  hsl_system_invariants(s, p1, &e1, nullptr);
  CHECK(std::abs(e1 - e0) <= 1e-9 * e0);

  char path[] = "/tmp/hsl_capi_snapshot.csv";
  REQUIRE(hsl_system_write_snapshot(s, path) == HSL_OK);
  hsl_system* r = nullptr;
  REQUIRE(hsl_system_read_snapshot(path, &r) == HSL_OK);
  size_t m = 0;
  hsl_system_size(r, &m);
  CHECK(m == n);
  CHECK(hsl_system_reverse(r) == HSL_OK);
  hsl_system_free(r);
  hsl_system_free(s);
  std::remove(path);
}

TEST_CASE("configuration round trip") {
  const auto kinds = nlohmann::json::parse(take([] {
    char* k = nullptr;
    hsl_experiment_kinds(&k);
    return k;
  }()));
  CHECK(kinds.size() == 8);

  char* doc = nullptr;
  REQUIRE(hsl_default_config("wick", &doc) == HSL_OK);
  const std::string d = take(doc);
  char* next = nullptr;
  REQUIRE(hsl_config_override(d.c_str(), "replicas=1234", &next) == HSL_OK);
  char* resolved = nullptr;
  REQUIRE(hsl_config_resolve(take(next).c_str(), &resolved) == HSL_OK);
  CHECK(nlohmann::json::parse(take(resolved)).at("replicas") == 1234);

  CHECK(hsl_default_config("nope", &doc) == HSL_CONFIG_INVALID);
  CHECK(hsl_config_resolve("{not json", &resolved) == HSL_CONFIG_INVALID);
}

TEST_CASE("in-memory experiment run") {
  nlohmann::json cfg = {{"kind", "reversibility"},
                        {"params", {{"exactness", {{"runs", 2}, {"brute_force_runs", 1}}}}}};
  hsl_report* r = nullptr;
  REQUIRE(hsl_run_experiment(cfg.dump().c_str(), 1, 0, &r) == HSL_OK);
  size_t n = 0;
  hsl_report_criteria_count(r, &n);
  CHECK(n == 2);
  const char* id = nullptr;
  int passed = 0;
  double measured = 0, target = 0, tol = 0;
  REQUIRE(hsl_report_criterion(r, 0, &id, &passed, &measured, &target, &tol) == HSL_OK);
  CHECK(std::string(id) == "C1");
  CHECK(hsl_report_criterion(r, 5, &id, &passed, &measured, &target, &tol) != HSL_OK);
  char* js = nullptr;
  REQUIRE(hsl_report_json(r, &js) == HSL_OK);
  CHECK(nlohmann::json::parse(take(js)).at("kind") == "reversibility");
  hsl_report_free(r);
}

TEST_CASE("standalone Kac run") {
  char* out = nullptr;
  REQUIRE(hsl_kac_run(R"({"particles": 1000, "times": [0, 0.5], "seed": 3})", &out) == HSL_OK);
  const auto j = nlohmann::json::parse(take(out));
  CHECK(j.at("outputs").size() == 2);
  CHECK(hsl_kac_run(R"({"particles": 10, "times": [0]})", &out) == HSL_MALFORMED_SPEC);
}
