#include "hsl/dsmc.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "hsl/collision_quadrature.hpp"
#include "hsl/rng.hpp"

namespace hsl::kinetic {

double equilibrium_mean_free_time(int d) {
  return d == 2 ? 1.0 / (2.0 * std::sqrt(kPi)) : 1.0 / (4.0 * std::sqrt(kPi));
}

double equilibrium_collision_rate(int d, int nodes) {
  if (d != 2 && d != 3) throw Error(ErrorCode::invalid_dimension, "dimension must be 2 or 3");
  if (nodes < 3) throw Error(ErrorCode::malformed_spec, "too few quadrature nodes");
  const double L = 12.0;
  const double h = 2.0 * L / (nodes - 1);
  // int_{S^{d-1}} (g.omega)_+ domega = c_d |g|
  const double c_d = d == 2 ? 2.0 : kPi;
  const double gauss = std::pow(4.0 * kPi, -0.5 * d);
  auto axis_weight = [&](int i) { return (i == 0 || i == nodes - 1) ? 0.5 * h : h; };
  double sum = 0.0;
  const int nz = d == 3 ? nodes : 1;
  for (int i = 0; i < nodes; ++i)
    for (int j = 0; j < nodes; ++j)
      for (int k = 0; k < nz; ++k) {
        const Vec g{-L + i * h, -L + j * h, d == 3 ? -L + k * h : 0.0};
        const double w = axis_weight(i) * axis_weight(j) * (d == 3 ? axis_weight(k) : 1.0);
        sum += w * gauss * std::exp(-0.25 * norm2(g)) * norm(g);
      }
  return c_d * sum;
}

namespace {

double mean_free_path(int d) {
  const double mean_speed = d == 2 ? std::sqrt(kPi / 2.0) : std::sqrt(8.0 / kPi);
  return mean_speed * equilibrium_mean_free_time(d);
}

void validate(const DsmcConfig& c) {
  if (c.d != 2 && c.d != 3) throw Error(ErrorCode::invalid_dimension, "DSMC dimension must be 2 or 3");
  c.f0.validate(c.d);
  if (!(c.T >= 0.0) || !(c.dt > 0.0)) throw Error(ErrorCode::malformed_spec, "DSMC needs T >= 0 and dt > 0");
  if (c.dt > 0.1 * equilibrium_mean_free_time(c.d) * (1.0 + 1e-12))
    throw Error(ErrorCode::malformed_spec, "DSMC time step exceeds a tenth of the mean free time");
  if (c.particles < 10000) throw Error(ErrorCode::malformed_spec, "DSMC needs at least 1e4 particles");
  std::size_t ncell = 1;
  for (int a = 0; a < 3; ++a) {
    if (c.cells[a] < 1 || (a >= c.d && c.cells[a] != 1)) throw Error(ErrorCode::malformed_spec, "bad cell counts");
    if (1.0 / c.cells[a] < mean_free_path(c.d) / 8.0)
      throw Error(ErrorCode::malformed_spec, "cell edge below an eighth of the mean free path");
    ncell *= static_cast<std::size_t>(c.cells[a]);
  }
  if (static_cast<double>(c.particles) / static_cast<double>(ncell) < 2.0)
    throw Error(ErrorCode::cell_underflow, "fewer than two particles per cell on average");
  for (std::size_t k = 0; k < c.output_times.size(); ++k) {
    if (c.output_times[k] < 0.0 || c.output_times[k] > c.T + 1e-12)
      throw Error(ErrorCode::malformed_spec, "output time outside [0, T]");
    if (k > 0 && !(c.output_times[k] > c.output_times[k - 1]))
      throw Error(ErrorCode::malformed_spec, "output times not increasing");
  }
  for (const auto& h : c.observables) hsl::validate(h, c.d);
}

}  // namespace

DsmcResult dsmc_solve(const DsmcConfig& c) {
  validate(c);
  const int d = c.d;
  const std::size_t M = c.particles;
  const std::size_t ncell = static_cast<std::size_t>(c.cells[0]) * c.cells[1] * c.cells[2];
  const double cell_volume = 1.0 / static_cast<double>(ncell);
  const double area = sphere_area(d);

  Engine rng = make_engine(c.seed);
  std::vector<Vec> x(M), v(M);
  for (std::size_t i = 0; i < M; ++i) {
    x[i] = c.f0.sample_position(rng, d);
    v[i] = c.f0.sample_velocity(rng, d);
  }

  DsmcResult res;
  double wmax = c.initial_majorant;
  if (!(wmax > 0.0)) {
    for (const auto& vi : v) wmax = std::max(wmax, 2.0 * norm(vi));
    wmax = std::max(wmax, 1e-12);
  }
  std::vector<std::size_t> cell_of(M), start(ncell + 1), order(M);

  auto assign_cells = [&]() {
    std::fill(start.begin(), start.end(), 0);
    for (std::size_t i = 0; i < M; ++i) {
      std::size_t idx = 0;
      for (int a = 0; a < d; ++a) {
        const int k = std::min(c.cells[a] - 1, static_cast<int>(x[i][a] * c.cells[a]));
        idx = idx * c.cells[a] + static_cast<std::size_t>(k);
      }
      cell_of[i] = idx;
      ++start[idx + 1];
    }
    for (std::size_t k = 0; k < ncell; ++k) start[k + 1] += start[k];
    std::vector<std::size_t> fill(start.begin(), start.end() - 1);
    for (std::size_t i = 0; i < M; ++i) order[fill[cell_of[i]]++] = i;
  };

  auto emit = [&](double t) {
    DsmcOutput o;
    o.time = t;
    for (const auto& h : c.observables) {
      double s = 0.0;
      for (std::size_t i = 0; i < M; ++i) s += eval_test_function(h, x[i], v[i], d);
      o.means.push_back(s / static_cast<double>(M));
    }
    assign_cells();
    o.cell_counts.resize(ncell);
    for (std::size_t k = 0; k < ncell; ++k) o.cell_counts[k] = start[k + 1] - start[k];
    if (c.histogram_grid) {
      std::vector<Vec> buf;
      for (std::size_t k = 0; k < ncell; ++k) {
        buf.clear();
        for (std::size_t p = start[k]; p < start[k + 1]; ++p) buf.push_back(v[order[p]]);
        o.cell_histograms.push_back(histogram_density(*c.histogram_grid, buf));
      }
    }
    for (std::size_t i = 0; i < M; ++i) {
      o.momentum += (1.0 / static_cast<double>(M)) * v[i];
      o.energy += norm2(v[i]) / static_cast<double>(M);
    }
    if (c.keep_velocities) o.velocities = v;
    res.outputs.push_back(std::move(o));
  };

  std::vector<long> out_steps;
  for (double t : c.output_times) out_steps.push_back(std::lround(t / c.dt));
  const long steps = std::lround(c.T / c.dt);
  std::size_t next_out = 0;
  while (next_out < out_steps.size() && out_steps[next_out] <= 0) {
    emit(0.0);
    ++next_out;
  }

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Vec> saved;
  for (long step = 1; step <= steps; ++step) {
    for (std::size_t i = 0; i < M; ++i) x[i] = wrap(x[i] + c.dt * v[i], d);

    if (c.collisions) {
      assign_cells();
      for (std::size_t k = 0; k < ncell; ++k) {
        const std::size_t b = start[k], n = start[k + 1] - start[k];
        if (n < 2) {
          ++res.underflow_cells;
          continue;
        }
        double vmax = 0.0;
        for (std::size_t p = b; p < b + n; ++p) vmax = std::max(vmax, norm(v[order[p]]));
        while (wmax < 2.0 * vmax) {
          wmax *= 2.0;
          ++res.majorant_doublings;
        }
        saved.resize(n);
        for (std::size_t p = 0; p < n; ++p) saved[p] = v[order[b + p]];
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        for (;;) {
          const double rate = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1) * area * wmax * c.dt /
                              (static_cast<double>(M) * cell_volume);
          std::poisson_distribution<long> count(rate);
          const long ncand = count(rng);
          bool breach = false;
          std::uint64_t accepted = 0;
          for (long q = 0; q < ncand; ++q) {
            const std::size_t i = order[b + pick(rng)];
            std::size_t j = order[b + pick(rng)];
            while (j == i) j = order[b + pick(rng)];
            const Vec w = uniform_direction(rng, d);
            const double cw = dot(v[i] - v[j], w);
            if (cw > wmax) {
              breach = true;
              break;
            }
            if (cw > 0.0 && unif(rng) * wmax < cw) {
              std::tie(v[i], v[j]) = scatter(v[i], v[j], w);
              ++accepted;
            }
          }
          if (!breach) {
            res.candidates += static_cast<std::uint64_t>(ncand);
            res.collisions += accepted;
            break;
          }
          for (std::size_t p = 0; p < n; ++p) v[order[b + p]] = saved[p];
          wmax *= 2.0;
          ++res.majorant_doublings;
        }
      }
    }
    while (next_out < out_steps.size() && out_steps[next_out] == step) {
      emit(static_cast<double>(step) * c.dt);
      ++next_out;
    }
  }
  res.final_majorant = wmax;
  return res;
}

void write_cell_histograms_jsonl(std::ostream& os, const DsmcResult& r) {
  for (const auto& o : r.outputs) {
    for (std::size_t k = 0; k < o.cell_histograms.size(); ++k) {
      nlohmann::json j{{"t", o.time}, {"cell", k}, {"count", o.cell_counts[k]}, {"values", o.cell_histograms[k].values}};
      os << j.dump() << '\n';
    }
  }
}

}  // namespace hsl::kinetic
