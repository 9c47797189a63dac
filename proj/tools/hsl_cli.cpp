// Command-line front end; talks to the library only through hsl.h.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hsl/hsl.h"

namespace {

using nlohmann::json;

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::size_t workers = 0;
  std::string out;
};

// Subcommand -> kinds it may run; the first is the default.
const std::map<std::string, std::vector<std::string>> kKinds{
    {"simulate", {"reversibility", "lanford-lln", "variance-scaling"}},
    {"dsmc", {"h-theorem"}},
    {"fluctuations", {"equilibrium-fluctuations"}},
    {"wick", {"wick"}},
    {"cgf", {"cgf"}},
    {"ldp-eval", {"hamiltonian-checks"}},
};

std::string take(char* s) {
  std::string out = s ? s : "";
  hsl_string_free(s);
  return out;
}

int report_error(int status) {
  std::cerr << "error [" << hsl_status_name(status) << "]: " << hsl_last_error() << "\n";
  return 2;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return json::parse(in);
}

int print_report(hsl_report* r) {
  std::size_t n = 0;
  hsl_report_criteria_count(r, &n);
  for (std::size_t k = 0; k < n; ++k) {
    const char* id = nullptr;
    int passed = 0;
    double measured = 0, target = 0, tol = 0;
    hsl_report_criterion(r, k, &id, &passed, &measured, &target, &tol);
    std::printf("%-4s %s  measured=%.6g target=%.6g tolerance=%.6g\n", id, passed ? "PASS" : "FAIL", measured, target,
                tol);
  }
  int all = 0;
  hsl_report_all_passed(r, &all);
  return all ? 0 : 1;
}

int run_kind(const std::string& sub, const Common& c) {
  json doc = c.config.empty() ? json::object() : read_json(c.config);
  const auto& allowed = kKinds.at(sub);
  if (!doc.contains("kind")) doc["kind"] = allowed.front();
  const std::string kind = doc["kind"].get<std::string>();
  if (std::find(allowed.begin(), allowed.end(), kind) == allowed.end()) {
    std::cerr << "error: '" << sub << "' does not run kind '" << kind << "'\n";
    return 2;
  }
  std::string text = doc.dump();
  for (const auto& s : c.sets) {
    char* next = nullptr;
    if (int st = hsl_config_override(text.c_str(), s.c_str(), &next)) return report_error(st);
    text = take(next);
  }
  if (!c.out.empty()) {
    json j = json::parse(text);
    j["out"] = c.out;
    text = j.dump();
  }
  hsl_report* r = nullptr;
  if (int st = hsl_run_experiment(text.c_str(), c.workers, 1, &r)) return report_error(st);
  const int code = print_report(r);
  hsl_report_free(r);
  return code;
}

int run_kac(const Common& c) {
  json req = {{"d", 2}, {"particles", 1000}, {"times", {0.0, 0.5, 1.0}}, {"seed", 1}};
  if (!c.config.empty()) req.merge_patch(read_json(c.config));
  std::string text = req.dump();
  for (const auto& s : c.sets) {
    char* next = nullptr;
    if (int st = hsl_config_override(text.c_str(), s.c_str(), &next)) return report_error(st);
    text = take(next);
  }
  char* res = nullptr;
  if (int st = hsl_kac_run(text.c_str(), &res)) return report_error(st);
  const json out = json::parse(take(res));
  // Pairwise jumps conserve momentum and energy exactly up to rounding.
  const auto& rows = out.at("outputs");
  bool ok = true;
  if (!rows.empty()) {
    const double e0 = rows.front().at("energy").get<double>();
    for (const auto& r : rows) {
      const double de = std::abs(r.at("energy").get<double>() - e0) / e0;
      double dp = 0.0;
      for (int a = 0; a < 3; ++a)
        dp = std::max(dp, std::abs(r.at("momentum")[a].get<double>() - rows.front().at("momentum")[a].get<double>()));
      std::printf("t=%.6g energy_drift=%.3g momentum_drift=%.3g\n", r.at("time").get<double>(), de, dp);
      ok = ok && de <= 1e-9 && dp <= 1e-9 * req.value("particles", 1000.0);
    }
  }
  if (!c.out.empty()) {
    std::ofstream os(c.out);
    if (!os) {
      std::cerr << "error: cannot write " << c.out << "\n";
      return 2;
    }
    os << out.dump(2) << "\n";
  }
  std::printf("kac-conservation %s\n", ok ? "PASS" : "FAIL");
  return ok ? 0 : 1;
}

int run_report(const Common& c) {
  if (c.out.empty()) {
    std::cerr << "error: report needs --out DIR\n";
    return 2;
  }
  const json rep = read_json(c.out + "/report.json");
  bool all = rep.at("all_passed").get<bool>();
  for (const auto& cr : rep.at("criteria"))
    std::printf("%-4s %s  measured=%.6g target=%.6g tolerance=%.6g  %s\n", cr.at("id").get<std::string>().c_str(),
                cr.at("passed").get<bool>() ? "PASS" : "FAIL", cr.value("measured", 0.0), cr.value("target", 0.0),
                cr.value("tolerance", 0.0), cr.at("name").get<std::string>().c_str());
  std::size_t valid = 0, corrupt = 0;
  const std::string hash = rep.at("config_hash").get<std::string>();
  if (hsl_verify_replicas(c.out.c_str(), hash.c_str(), &valid, &corrupt) == HSL_OK) {
    std::printf("replica files: %zu valid, %zu corrupt\n", valid, corrupt);
    all = all && corrupt == 0;
  }
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hard-sphere gas fluctuation experiments"};
  app.set_version_flag("--version", std::string(hsl_version()));
  app.require_subcommand(1);

  Common common;
  std::map<std::string, CLI::App*> subs;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"simulate", "Molecular dynamics experiments (reversibility, lanford-lln, variance-scaling)"},
      {"dsmc", "DSMC entropy relaxation (h-theorem)"},
      {"kac", "Standalone homogeneous Kac run"},
      {"fluctuations", "Equilibrium fluctuation covariance against the linearized prediction"},
      {"wick", "Initial Gaussian field and Wick moments"},
      {"cgf", "Cumulant generating function checks"},
      {"ldp-eval", "Collision operator and large-deviation functional identities"},
      {"report", "Print a stored report and verify replica checksums"},
  };
  for (const auto& [name, help] : commands) {
    auto* s = app.add_subcommand(name, help);
    if (name != "report") {
      s->add_option("--config", common.config, "JSON configuration file")->check(CLI::ExistingFile);
      s->add_option("--set", common.sets, "Override key.path=value (repeatable)");
      s->add_option("--workers", common.workers, "Worker threads (0 = hardware parallelism)");
    }
    s->add_option("--out", common.out, name == "kac" ? "Write the result JSON here" : "Output directory");
    subs[name] = s;
  }

  CLI11_PARSE(app, argc, argv);

  try {
    for (const auto& [name, s] : subs) {
      if (!s->parsed()) continue;
      if (name == "kac") return run_kac(common);
      if (name == "report") return run_report(common);
      return run_kind(name, common);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
