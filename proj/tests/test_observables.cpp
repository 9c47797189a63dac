#include <doctest.h>

#include "hsl/ensembles.hpp"
#include "hsl/harness.hpp"
#include "hsl/observables.hpp"
#include "hsl/rng.hpp"

using namespace hsl;
using namespace hsl::observables;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::ok;
}

// Poisson (eps = 0) configurations at small intensity, observed at a single time.
Ensemble iid_ensemble(std::size_t R, const std::vector<TestFunctionSpec>& hs, bool cross, double eps = 0.02) {
  ensembles::GrandCanonicalSpec spec;
  spec.scaling = validate_scaling(2, eps);
  ensembles::SamplerOptions o;
  o.exclusion = false;
  Ensemble e;
  for (std::size_t r = 0; r < R; ++r) {
    spec.seed = derive_seed(99, r);
    const auto sys = ensembles::sample_grand_canonical(spec, o).first;
    ReplicaRecorder rec({0.0}, hs, cross);
    rec.observe(0, sys);
    e.push_back(rec.finish(spec.seed, "iid"));
  }
  return e;
}

ParticleSystem small_system(std::uint64_t seed, std::size_t n) {
  Engine rng = make_engine(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g;
  ParticleSystem s;
  s.scaling = validate_scaling(2, 0.1, 2.0);
  for (std::size_t i = 0; i < n; ++i) {
    s.positions.push_back({u(rng), u(rng), 0.0});
    s.velocities.push_back({g(rng), g(rng), 0.0});
  }
  return s;
}

}  // namespace

TEST_CASE("tuple pairing matches explicit enumeration") {
  const auto s = small_system(4, 7);
  const double mu = s.scaling.mu;
  auto phase = [&](std::size_t i) { return Phase{s.positions[i], s.velocities[i]}; };
  const KParticleFunction h2 = [](std::span<const Phase> z) { return z[0].v[0] * std::cos(z[1].x[1]) + z[1].v[1]; };
  const KParticleFunction h3 = [](std::span<const Phase> z) { return z[0].v[0] * z[1].v[1] - z[2].x[0]; };
  double b2 = 0.0, b3 = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (i == j) continue;
      const Phase p2[2] = {phase(i), phase(j)};
      b2 += h2(p2);
      for (std::size_t k = 0; k < s.size(); ++k) {
        if (k == i || k == j) continue;
        const Phase p3[3] = {phase(i), phase(j), phase(k)};
        b3 += h3(p3);
      }
    }
  CHECK(k_particle_pairing(s, h2, 2) == doctest::Approx(b2 / (mu * mu)));
  CHECK(k_particle_pairing(s, h3, 3) == doctest::Approx(b3 / (mu * mu * mu)));
  CHECK(code_of([&] { k_particle_pairing(s, h2, 4); }) == ErrorCode::k_too_large);

  const auto h = make_fourier_hermite({1, 0, 0}, {1, 0, 0});
  double b1 = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) b1 += eval_test_function(h, s.positions[i], s.velocities[i], 2);
  CHECK(empirical_pairing(s, h) == doctest::Approx(b1 / mu));
}

TEST_CASE("identical replicas give zero variance") {
  auto e = iid_ensemble(1, {make_fourier_hermite({1, 0, 0}, {0, 0, 0}, false, "c")}, false);
  e.push_back(e.front());
  e.push_back(e.front());
  const auto st = compute_stats(e);
  REQUIRE(st.entries.size() == 1);
  CHECK(st.entries[0].var == doctest::Approx(0.0));
  CHECK(st.entries[0].R == 3);
  CHECK(st.entries[0].mean == doctest::Approx(e[0].pairing(0)));
}

TEST_CASE("aggregation rejects mixed configuration hashes and is order independent") {
  auto e = iid_ensemble(5, {make_fourier_hermite({0, 0, 0}, {1, 0, 0}, false, "v")}, false);
  for (auto& r : e) r.config_hash = "aaa";
  auto shuffled = e;
  std::reverse(shuffled.begin(), shuffled.end());
  CHECK(harness::aggregate_replicas(e).entries[0].mean == harness::aggregate_replicas(shuffled).entries[0].mean);
  e[2].config_hash = "bbb";
  CHECK(code_of([&] { harness::aggregate_replicas(e); }) == ErrorCode::config_hash_mismatch);
}

TEST_CASE("record json round trip and validation") {
  auto e = iid_ensemble(1, {make_fourier_hermite({0, 0, 0}, {2, 0, 0}, false, "e")}, true);
  const auto back = replica_record_from_json(to_json(e[0]));
  CHECK(back.sums == e[0].sums);
  CHECK(back.cross == e[0].cross);
  CHECK(back.n == e[0].n);
  auto bad = e[0];
  bad.sums.push_back(1.0);
  CHECK(code_of([&] { bad.validate(); }) == ErrorCode::inconsistent_state);
  CHECK(code_of([&] { e[0].field_index("e", 0.5); }) == ErrorCode::missing_sample_time);
}

TEST_CASE("field covariance splits into tuple cumulant plus diagonal") {
  const auto e = iid_ensemble(300, {make_fourier_hermite({1, 0, 0}, {0, 0, 0}, false, "c"),
                                    make_fourier_hermite({0, 0, 0}, {1, 0, 0}, false, "v")},
                              true);
  const FieldRef a{"c", 0.0}, b{"v", 0.0};
  const auto est = estimate_F2_and_cumulant(e, a, b);
  const auto cov = field_covariance(e, a, b);
  CHECK(cov.value == doctest::Approx(est.field_covariance).epsilon(1e-9));
  CHECK(est.field_covariance == doctest::Approx(est.f2 + est.diagonal_term).epsilon(1e-9));

  // Poisson fields: E[zeta_a zeta_b] = int f0 h_a h_b, which vanishes for cos(2 pi x) and v1.
  CHECK(std::abs(cov.value) <= cov.ci + 1e-12);
  const auto var = field_covariance(e, a, a);
  CHECK(std::abs(var.value - 0.5) <= var.ci);
  CHECK(code_of([&] { field_covariance(Ensemble(e.begin(), e.begin() + 50), a, b); }) ==
        ErrorCode::insufficient_replicas);
}

TEST_CASE("pair partitions") {
  CHECK(pair_partitions(2).size() == 1);
  CHECK(pair_partitions(4).size() == 3);
  CHECK(pair_partitions(6).size() == 15);
  CHECK(pair_partitions(3).empty());
  for (const auto& part : pair_partitions(6)) {
    std::vector<int> seen;
    for (auto [i, j] : part) {
      CHECK(i < j);
      seen.push_back(i);
      seen.push_back(j);
    }
    std::sort(seen.begin(), seen.end());
    CHECK(seen == std::vector<int>{0, 1, 2, 3, 4, 5});
  }
}

TEST_CASE("fourth-order Wick check needs enough replicas") {
  const auto e = iid_ensemble(200, {make_fourier_hermite({0, 0, 0}, {1, 0, 0}, false, "v")}, false);
  const FieldRef v{"v", 0.0};
  CHECK(code_of([&] { wick_check(e, {v, v, v, v}); }) == ErrorCode::insufficient_replicas);
  const auto w2 = wick_check(e, {v, v});
  CHECK(w2.discrepancy == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("log-mean-exp is shift invariant and matches the naive form") {
  const std::vector<double> x{0.1, -2.0, 3.5, 1.25};
  double naive = 0.0;
  for (double v : x) naive += std::exp(v);
  CHECK(log_mean_exp(x) == doctest::Approx(std::log(naive / 4.0)));
  std::vector<double> big;
  for (double v : x) big.push_back(v + 800.0);
  CHECK(log_mean_exp(big) == doctest::Approx(log_mean_exp(x) + 800.0));
}

TEST_CASE("cumulant generating function") {
  auto h = make_velocity_bump({0, 0, 0}, 1.0, 1.0, "b");
  h.decay = DecayBound{1.0, 2.0};
  const auto e = iid_ensemble(200, {h}, false);
  const FieldRef f{"b", 0.0};
  // Nonnegative h: the estimate grows with the amplitude and vanishes at zero.
  const double l0 = estimate_cgf(e, h, f, 0.0).value;
  const double l1 = estimate_cgf(e, h, f, 0.5).value;
  const double l2 = estimate_cgf(e, h, f, 1.0).value;
  CHECK(l0 == doctest::Approx(0.0));
  CHECK(l1 < l2);
  CHECK(l1 > 0.0);
  CHECK(code_of([&] { estimate_cgf(e, h, f, 1.5); }) == ErrorCode::amplitude_guard);
  auto nodecay = h;
  nodecay.decay.reset();
  CHECK(code_of([&] { estimate_cgf(e, nodecay, f, 0.5); }) == ErrorCode::amplitude_guard);
}
