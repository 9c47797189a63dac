#include "hsl/velocity_grid.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "hsl/core_model.hpp"

namespace hsl::kinetic {

double VelocityGrid::weight() const { return std::pow(spacing(), d); }

std::size_t VelocityGrid::size() const {
  std::size_t s = 1;
  for (int a = 0; a < d; ++a) s *= static_cast<std::size_t>(n);
  return s;
}

Vec VelocityGrid::node(std::size_t flat) const {
  Vec v{0.0, 0.0, 0.0};
  for (int a = d - 1; a >= 0; --a) {
    v[a] = coordinate(static_cast<int>(flat % n));
    flat /= n;
  }
  return v;
}

std::size_t VelocityGrid::flat_index(const std::array<int, 3>& k) const {
  std::size_t idx = 0;
  for (int a = 0; a < d; ++a) idx = idx * n + static_cast<std::size_t>(k[a]);
  return idx;
}

bool VelocityGrid::contains(const Vec& v) const {
  for (int a = 0; a < d; ++a)
    if (!(std::abs(v[a]) <= v_max)) return false;
  return true;
}

void VelocityGrid::validate() const {
  if (d != 2 && d != 3) throw Error(ErrorCode::invalid_dimension, "velocity grid dimension must be 2 or 3");
  if (n < 5 || n % 2 == 0) throw Error(ErrorCode::malformed_spec, "velocity grid needs an odd node count >= 5");
  if (!(v_max > 0.0)) throw Error(ErrorCode::malformed_spec, "velocity cutoff must be positive");
}

VelocityGrid make_grid(int d, double v_max, int nodes) {
  VelocityGrid g{d, v_max, nodes};
  g.validate();
  return g;
}

VelocityGridField sample_field(const VelocityGrid& grid, const std::function<double(const Vec&)>& fn) {
  VelocityGridField f{grid, std::vector<double>(grid.size())};
  for (std::size_t i = 0; i < f.values.size(); ++i) f.values[i] = fn(grid.node(i));
  return f;
}

VelocityGridField maxwellian_field(const VelocityGrid& grid) {
  return sample_field(grid, [d = grid.d](const Vec& v) { return maxwellian(v, d); });
}

Stencil interpolation_stencil(const VelocityGrid& grid, const Vec& v, Extension ext) {
  Stencil s;
  if (ext == Extension::zero && !grid.contains(v)) return s;
  const double h = grid.spacing();
  std::array<int, 3> base{0, 0, 0};
  std::array<std::array<double, 4>, 3> w{};
  for (int a = 0; a < grid.d; ++a) {
    const double t = (v[a] + grid.v_max) / h;
    const int b = std::clamp(static_cast<int>(std::floor(t)) - 1, 0, grid.n - 4);
    base[a] = b;
    const double x = t - b;
    w[a][0] = -(x - 1.0) * (x - 2.0) * (x - 3.0) / 6.0;
    w[a][1] = x * (x - 2.0) * (x - 3.0) / 2.0;
    w[a][2] = -x * (x - 1.0) * (x - 3.0) / 2.0;
    w[a][3] = x * (x - 1.0) * (x - 2.0) / 6.0;
  }
  const int corners = grid.d == 2 ? 16 : 64;
  for (int c = 0; c < corners; ++c) {
    std::array<int, 3> k{0, 0, 0};
    double weight = 1.0;
    int q = c;
    for (int a = 0; a < grid.d; ++a) {
      const int off = q % 4;
      q /= 4;
      k[a] = base[a] + off;
      weight *= w[a][off];
    }
    s.index[s.count] = grid.flat_index(k);
    s.weight[s.count] = weight;
    ++s.count;
  }
  return s;
}

double interpolate(const VelocityGridField& field, const Vec& v, Extension ext) {
  const auto s = interpolation_stencil(field.grid, v, ext);
  double acc = 0.0;
  for (int k = 0; k < s.count; ++k) acc += s.weight[k] * field.values[s.index[k]];
  return acc;
}

double integrate(const VelocityGridField& field) {
  double s = 0.0;
  for (double x : field.values) s += x;
  return s * field.grid.weight();
}

double interpolation_error_estimate(const VelocityGridField& field) {
  const auto& g = field.grid;
  double worst = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    std::array<int, 3> k{0, 0, 0};
    std::size_t rem = i;
    for (int a = g.d - 1; a >= 0; --a) {
      k[a] = static_cast<int>(rem % g.n);
      rem /= g.n;
    }
    double err = 0.0;
    for (int a = 0; a < g.d; ++a) {
      if (k[a] % 2 == 0 || k[a] < 3 || k[a] > g.n - 4) continue;
      auto at = [&](int off) {
        auto kk = k;
        kk[a] += off;
        return field.values[g.flat_index(kk)];
      };
      const double mid = (-at(-3) + 9.0 * at(-1) + 9.0 * at(1) - at(3)) / 16.0;
      err += std::abs(mid - field.values[i]);
    }
    worst = std::max(worst, err);
  }
  return worst / 16.0;
}

double entropy(const VelocityGridField& f) {
  double mass = 0.0, s = 0.0;
  for (double x : f.values) {
    if (x < 0.0 || !std::isfinite(x)) throw Error(ErrorCode::negative_mass, "entropy of a negative or non-finite field");
    mass += x;
    if (x > 0.0) s -= x * std::log(x);
  }
  if (!(mass > 0.0)) throw Error(ErrorCode::negative_mass, "entropy needs positive total mass");
  return s * f.grid.weight();
}

VelocityGridField histogram_density(const VelocityGrid& grid, std::span<const Vec> velocities) {
  VelocityGridField f{grid, std::vector<double>(grid.size(), 0.0)};
  const double h = grid.spacing();
  for (const auto& v : velocities) {
    std::array<int, 3> k{0, 0, 0};
    bool inside = true;
    for (int a = 0; a < grid.d; ++a) {
      const int idx = static_cast<int>(std::floor((v[a] + grid.v_max) / h + 0.5));
      if (idx < 0 || idx >= grid.n) inside = false;
      k[a] = idx;
    }
    if (inside) f.values[grid.flat_index(k)] += 1.0;
  }
  const double scale = velocities.empty() ? 0.0 : 1.0 / (static_cast<double>(velocities.size()) * grid.weight());
  for (double& x : f.values) x *= scale;
  return f;
}

double relative_entropy(const VelocityGridField& phi, const VelocityGridField& f) {
  if (phi.values.size() != f.values.size()) throw Error(ErrorCode::malformed_spec, "grid mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < phi.values.size(); ++i) {
    const double p = phi.values[i], q = f.values[i];
    if (p < 0.0 || q < 0.0) throw Error(ErrorCode::negative_mass, "relative entropy of a negative field");
    if (p > 0.0 && !(q > 0.0)) throw Error(ErrorCode::support_violation, "phi charges a node where f vanishes");
    if (p > 0.0) s += p * std::log(p / q);
    s += q - p;
  }
  return s * phi.grid.weight();
}

void write_field_csv(std::ostream& os, const VelocityGridField& field) {
  const auto old = os.precision(17);
  for (int a = 0; a < field.grid.d; ++a) os << 'v' << a + 1 << ',';
  os << "value\n";
  for (std::size_t i = 0; i < field.values.size(); ++i) {
    const Vec v = field.grid.node(i);
    for (int a = 0; a < field.grid.d; ++a) os << v[a] << ',';
    os << field.values[i] << '\n';
  }
  os.precision(old);
}

}  // namespace hsl::kinetic
