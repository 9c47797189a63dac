#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hsl/types.hpp"

namespace hsl {

enum class TestFunctionKind { fourier_hermite, gaussian_bump, tabulated, constant, collision_invariant };

enum class Invariant { mass, v1, v2, v3, energy };

/// Values on a tensor grid of velocities; multilinear inside the bounding box,
/// zero outside. Values are stored with the last axis varying fastest.
struct VelocityTable {
  std::vector<std::vector<double>> axes;
  std::vector<double> values;

  int dim() const { return static_cast<int>(axes.size()); }
  double eval(const Vec& v) const;
  void validate() const;
};

/// |h(x, v)| <= C exp(-beta |v|^2 / 4) for all (x, v).
struct DecayBound {
  double C = 1.0;
  double beta = 0.0;
};

/// Declarative observable h(x, v).
///
/// fourier-hermite:  amplitude * trig(2 pi k.x) * prod_a He_{n_a}(v_a), trig = cos or sin
/// gaussian-bump:    amplitude * exp(-|x - cx|^2 / 2wx^2) * exp(-|v - cv|^2 / 2wv^2); wx <= 0 drops the x factor
/// tabulated:        VelocityTable lookup (x ignored)
/// constant:         value
/// collision-invariant: 1, v_j or |v|^2 (times amplitude)
struct TestFunctionSpec {
  TestFunctionKind kind = TestFunctionKind::constant;
  std::string name;
  double amplitude = 1.0;

  std::array<int, 3> modes{0, 0, 0};
  std::array<int, 3> hermite{0, 0, 0};
  bool sine = false;

  Vec center_x{0.0, 0.0, 0.0};
  Vec center_v{0.0, 0.0, 0.0};
  double width_x = 0.0;
  double width_v = 1.0;

  double value = 0.0;
  Invariant invariant = Invariant::mass;

  std::shared_ptr<const VelocityTable> table;
  std::optional<DecayBound> decay;

  bool depends_on_x() const;
};

/// Probabilists' Hermite polynomial He_n.
double hermite_he(int n, double x);

/// Checks structural well-formedness for dimension d, and probes the declared
/// decay bound on a fixed lattice. Throws malformed_spec.
void validate(const TestFunctionSpec& spec, int d);

double eval_test_function(const TestFunctionSpec& spec, const Vec& x, const Vec& v, int d);

/// Same function multiplied by s (decay constant scales along).
TestFunctionSpec scaled(const TestFunctionSpec& spec, double s);

// Convenience constructors.
TestFunctionSpec make_constant(double c, std::string name = {});
TestFunctionSpec make_fourier_hermite(std::array<int, 3> modes, std::array<int, 3> hermite, bool sine = false,
                                      std::string name = {});
TestFunctionSpec make_invariant(Invariant which, std::string name = {});
TestFunctionSpec make_velocity_bump(const Vec& center_v, double width_v, double amplitude, std::string name = {});

nlohmann::json to_json(const TestFunctionSpec& spec);
TestFunctionSpec test_function_from_json(const nlohmann::json& j);

/// CSV with header `v1,..,vd,value`, one row per node in storage order.
void write_table_csv(std::ostream& os, const VelocityTable& table);
VelocityTable read_table_csv(std::istream& is);

}  // namespace hsl
