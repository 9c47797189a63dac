#include <doctest.h>

#include <sstream>

#include "hsl/core_model.hpp"
#include "hsl/rng.hpp"
#include "hsl/test_functions.hpp"

using namespace hsl;

TEST_CASE("scaling: intensity follows mu eps^(d-1) alpha = 1") {
  const auto s = validate_scaling(2, 1e-3);
  CHECK(s.mu == doctest::Approx(1000.0));
  const auto s3 = validate_scaling(3, 0.05, 2.0);
  CHECK(s3.mu == doctest::Approx(200.0));
  CHECK(packing_fraction(2, 1e-3, 1000.0) == doctest::Approx(kPi / 4.0 * 1e-6 * 1000.0));
}

TEST_CASE("scaling: guards") {
  auto code = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::ok;
  };
  CHECK(code([] { validate_scaling(4, 1e-3); }) == ErrorCode::invalid_dimension);
  CHECK(code([] { validate_scaling(2, -1.0); }) == ErrorCode::scaling_violation);
  // d = 3, eps = 0.1: packing 0.0524 is above the 0.05 ceiling
  CHECK(code([] { validate_scaling(3, 0.1); }) == ErrorCode::scaling_violation);
}

TEST_CASE("torus: wrap and minimal image") {
  CHECK(wrap(1.25) == doctest::Approx(0.25));
  CHECK(wrap(-0.25) == doctest::Approx(0.75));
  CHECK(wrap(1.0) == 0.0);
  Engine rng = make_engine(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    const Vec a{u(rng), u(rng), 0.0}, b{u(rng), u(rng), 0.0};
    const Vec d = minimal_image(a, b, 2);
    for (int i = 0; i < 2; ++i) {
      CHECK(d[i] >= -0.5);
      CHECK(d[i] < 0.5);
    }
    CHECK(torus_distance(a, b, 2) == doctest::Approx(torus_distance(b, a, 2)));
    // b = a + d on the torus
    const Vec back = wrap(a + d, 2);
    CHECK(std::abs(back[0] - b[0]) < 1e-12);
    CHECK(std::abs(back[1] - b[1]) < 1e-12);
  }
}

TEST_CASE("maxwellian: unit mass on a fine grid") {
  double s2 = 0.0;
  const double h = 0.05;
  for (double x = -10; x <= 10; x += h)
    for (double y = -10; y <= 10; y += h) s2 += maxwellian({x, y, 0.0}, 2) * h * h;
  CHECK(s2 == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("snapshot csv round trip") {
  ParticleSystem s;
  s.scaling = validate_scaling(2, 0.01);
  s.time = 0.5;
  s.positions = {{0.1, 0.2, 0.0}, {0.7, 0.9, 0.0}};
  s.velocities = {{1.0, -0.5, 0.0}, {0.25, 2.0, 0.0}};
  std::stringstream ss;
  write_snapshot_csv(ss, s);
  const auto r = read_snapshot_csv(ss);
  CHECK(r.size() == 2);
  CHECK(r.time == doctest::Approx(0.5));
  CHECK(r.scaling.eps == doctest::Approx(0.01));
  CHECK(r.positions[1][1] == doctest::Approx(0.9));
  CHECK(r.velocities[0][1] == doctest::Approx(-0.5));
}

TEST_CASE("consistency check rejects bad state") {
  ParticleSystem s;
  s.scaling = validate_scaling(2, 0.01);
  s.positions = {{0.1, 0.2, 0.0}};
  s.velocities = {};
  CHECK_THROWS_AS(check_consistency(s), Error);
}

TEST_CASE("hermite polynomials match the three-term recurrence") {
  for (double x : {-2.0, -0.3, 0.0, 0.7, 3.1}) {
    double a = 1.0, b = x;
    CHECK(hermite_he(0, x) == doctest::Approx(1.0));
    CHECK(hermite_he(1, x) == doctest::Approx(x));
    for (int n = 2; n <= 6; ++n) {
      const double c = x * b - (n - 1) * a;
      CHECK(hermite_he(n, x) == doctest::Approx(c));
      a = b;
      b = c;
    }
  }
}

TEST_CASE("test functions: evaluation, json round trip, decay probe") {
  auto h = make_fourier_hermite({1, 0, 0}, {2, 0, 0}, false, "h");
  const Vec x{0.25, 0.0, 0.0}, v{1.5, 0.0, 0.0};
  CHECK(eval_test_function(h, x, v, 2) == doctest::Approx(std::cos(2 * kPi * 0.25) * (1.5 * 1.5 - 1.0)));
  const auto back = test_function_from_json(to_json(h));
  CHECK(eval_test_function(back, {0.1, 0.3, 0.0}, {0.4, -1.0, 0.0}, 2) ==
        doctest::Approx(eval_test_function(h, {0.1, 0.3, 0.0}, {0.4, -1.0, 0.0}, 2)));

  auto bad = make_fourier_hermite({0, 0, 0}, {2, 0, 0});
  bad.decay = DecayBound{1.0, 1.0};
  CHECK_THROWS_AS(validate(bad, 2), Error);

  auto bump = make_velocity_bump({0, 0, 0}, 1.0, 1.0, "b");
  bump.decay = DecayBound{1.0, 2.0};
  CHECK_NOTHROW(validate(bump, 2));
  const auto s = scaled(bump, 0.5);
  CHECK(s.decay->C == doctest::Approx(0.5));
}

TEST_CASE("tabulated test function: csv round trip") {
  VelocityTable t;
  t.axes = {{-1.0, 0.0, 1.0}, {-1.0, 1.0}};
  t.values = {0, 1, 2, 3, 4, 5};
  std::stringstream ss;
  write_table_csv(ss, t);
  const auto r = read_table_csv(ss);
  CHECK(r.values.size() == 6);
  CHECK(r.eval({0.0, 1.0, 0.0}) == doctest::Approx(t.eval({0.0, 1.0, 0.0})));
  CHECK(r.eval({5.0, 0.0, 0.0}) == 0.0);
}

TEST_CASE("seed derivation is injective on a counter range") {
  std::vector<std::uint64_t> seen;
  for (std::uint64_t k = 0; k < 5000; ++k) seen.push_back(derive_seed(42, k));
  std::sort(seen.begin(), seen.end());
  CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
  CHECK(derive_seed(42, 7) == derive_seed(42, 7));
  CHECK(derive_seed(42, 7) != derive_seed(43, 7));
}
