#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "hsl/types.hpp"

namespace hsl::kinetic {

/// Uniform tensor grid on [-V_max, V_max]^d with an odd node count per axis,
/// so 0 is a node and the grid is symmetric under v -> -v.
struct VelocityGrid {
  int d = 2;
  double v_max = 6.0;
  int n = 41;

  double spacing() const { return 2.0 * v_max / (n - 1); }
  double weight() const;
  std::size_t size() const;
  double coordinate(int k) const { return -v_max + k * spacing(); }
  Vec node(std::size_t flat) const;
  std::size_t flat_index(const std::array<int, 3>& k) const;
  bool contains(const Vec& v) const;

  /// Throws invalid_dimension / malformed_spec on bad parameters.
  void validate() const;
};

VelocityGrid make_grid(int d, double v_max = 6.0, int nodes = 41);

struct VelocityGridField {
  VelocityGrid grid;
  std::vector<double> values;
};

VelocityGridField sample_field(const VelocityGrid& grid, const std::function<double(const Vec&)>& fn);
VelocityGridField maxwellian_field(const VelocityGrid& grid);

/// Off-grid behaviour of interpolation: zero outside the box (densities) or
/// polynomial extrapolation from the boundary stencil (test functions).
enum class Extension { zero, extrapolate };

/// Tensor-product cubic Lagrange stencil: up to 4^d nodes with weights that
/// reproduce polynomials of degree <= 3 in each coordinate exactly.
struct Stencil {
  std::array<std::size_t, 64> index{};
  std::array<double, 64> weight{};
  int count = 0;
};

Stencil interpolation_stencil(const VelocityGrid& grid, const Vec& v, Extension ext);

double interpolate(const VelocityGridField& field, const Vec& v, Extension ext);

/// Grid quadrature: weight * sum of values.
double integrate(const VelocityGridField& field);

/// A-posteriori estimate of the cubic interpolation error: the mismatch of the
/// coarsened (every second node) interpolant at the skipped nodes, divided by 16.
double interpolation_error_estimate(const VelocityGridField& field);

/// -sum f log f * weight with 0 log 0 = 0. Throws negative_mass.
double entropy(const VelocityGridField& f);

/// Normalized histogram density of `velocities` on the grid cells centred at the nodes.
VelocityGridField histogram_density(const VelocityGrid& grid, std::span<const Vec> velocities);

/// sum (phi log(phi / f) - phi + f) * weight with 0 log 0 = 0. Throws support_violation.
double relative_entropy(const VelocityGridField& phi, const VelocityGridField& f);

/// CSV with header v1,..,vd,value.
void write_field_csv(std::ostream& os, const VelocityGridField& field);

}  // namespace hsl::kinetic
