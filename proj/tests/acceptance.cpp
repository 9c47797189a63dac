// Runs every experiment kind at its default configuration and prints one line per criterion.
// Usage: hsl_acceptance [output-root] [workers]

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>

#include "hsl/harness.hpp"

using namespace hsl::harness;

int main(int argc, char** argv) {
  const std::filesystem::path root = argc > 1 ? argv[1] : "acceptance_runs";
  RunOptions options;
  options.workers = argc > 2 ? std::stoul(argv[2]) : 0;

  std::map<int, CriterionResult> results;
  bool errors = false;
  for (const auto& kind : experiment_kinds()) {
    const auto started = std::chrono::steady_clock::now();
    try {
      nlohmann::json user = {{"kind", kind}, {"out", (root / kind).string()}};
      const auto report = run_experiment(load_config(user), options);
      for (const auto& c : report.criteria) results[std::stoi(c.id.substr(1))] = c;
    } catch (const std::exception& e) {
      std::cerr << kind << ": " << e.what() << "\n";
      errors = true;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    std::fprintf(stderr, "[%s] %.1f s\n", kind.c_str(), secs);
  }

  bool all = !errors;
  for (int id = 1; id <= 11; ++id) {
    const auto it = results.find(id);
    if (it == results.end()) {
      std::printf("C%-3d FAIL  not evaluated\n", id);
      all = false;
      continue;
    }
    const auto& c = it->second;
    std::printf("C%-3d %s  measured=%.6g target=%.6g tolerance=%.6g  %s\n", id, c.passed ? "PASS" : "FAIL",
                c.measured, c.target, c.tolerance, c.name.c_str());
    all = all && c.passed;
  }
  std::printf("%s\n", all ? "ALL PASS" : "SOME CRITERIA FAILED");
  return all ? 0 : 1;
}
