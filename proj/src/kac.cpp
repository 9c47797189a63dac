#include "hsl/kac.hpp"

#include <algorithm>
#include <cmath>

#include "hsl/collision_quadrature.hpp"
#include "hsl/rng.hpp"

namespace hsl::kinetic {

KacResult kac_homogeneous(const KacConfig& c) {
  if (c.d != 2 && c.d != 3) throw Error(ErrorCode::invalid_dimension, "Kac dimension must be 2 or 3");
  if (c.particles < 1000) throw Error(ErrorCode::malformed_spec, "Kac process needs at least 1e3 particles");
  c.f0.validate(c.d);
  for (std::size_t k = 0; k < c.output_times.size(); ++k) {
    if (c.output_times[k] < 0.0) throw Error(ErrorCode::malformed_spec, "negative output time");
    if (k > 0 && !(c.output_times[k] > c.output_times[k - 1]))
      throw Error(ErrorCode::malformed_spec, "output times not increasing");
  }
  for (const auto& h : c.observables) {
    validate(h, c.d);
    if (h.depends_on_x()) throw Error(ErrorCode::malformed_spec, "Kac observables must not depend on x");
  }

  const int d = c.d;
  const std::size_t M = c.particles;
  Engine rng = make_engine(c.seed);
  std::vector<Vec> v(M);
  for (auto& vi : v) vi = c.f0.sample_velocity(rng, d);

  double vmax = 0.0;
  for (const auto& vi : v) vmax = std::max(vmax, norm(vi));
  double wmax = std::max(2.0 * vmax, 1e-12);
  KacResult res;
  auto cover = [&](double speed) {
    while (wmax < 2.0 * speed) {
      wmax *= 2.0;
      ++res.majorant_doublings;
    }
  };

  const Vec origin{0.0, 0.0, 0.0};
  auto emit = [&](double t) {
    KacOutput o;
    o.time = t;
    for (const auto& h : c.observables) {
      double s = 0.0;
      for (const auto& vi : v) s += eval_test_function(h, origin, vi, d);
      o.sums.push_back(s);
    }
    for (const auto& vi : v) {
      o.momentum += vi;
      o.energy += norm2(vi);
    }
    if (c.keep_velocities) o.velocities = v;
    res.outputs.push_back(std::move(o));
  };

  const double pairs = 0.5 * static_cast<double>(M) * static_cast<double>(M - 1);
  const double area = sphere_area(d);
  std::uniform_int_distribution<std::size_t> pick(0, M - 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double t_end = c.output_times.empty() ? 0.0 : c.output_times.back();
  std::size_t next_out = 0;
  double t = 0.0;
  for (;;) {
    const double rate = pairs * area * wmax / static_cast<double>(M);
    t += std::exponential_distribution<double>(rate)(rng);
    while (next_out < c.output_times.size() && c.output_times[next_out] < t) emit(c.output_times[next_out++]);
    if (t > t_end) break;
    ++res.candidates;
    const std::size_t i = pick(rng);
    std::size_t j = pick(rng);
    while (j == i) j = pick(rng);
    const Vec w = uniform_direction(rng, d);
    const double cw = dot(v[i] - v[j], w);
    if (cw > 0.0 && unif(rng) * wmax < cw) {
      std::tie(v[i], v[j]) = scatter(v[i], v[j], w);
      ++res.collisions;
      cover(std::max(norm(v[i]), norm(v[j])));
    }
  }
  while (next_out < c.output_times.size()) emit(c.output_times[next_out++]);
  return res;
}

}  // namespace hsl::kinetic
