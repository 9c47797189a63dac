#include "hsl/test_functions.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "hsl/core_model.hpp"

namespace hsl {

namespace {

const char* kind_name(TestFunctionKind k) {
  switch (k) {
    case TestFunctionKind::fourier_hermite: return "fourier-hermite";
    case TestFunctionKind::gaussian_bump: return "gaussian-bump";
    case TestFunctionKind::tabulated: return "tabulated";
    case TestFunctionKind::constant: return "constant";
    case TestFunctionKind::collision_invariant: return "collision-invariant";
  }
  return "?";
}

TestFunctionKind kind_from_name(const std::string& s) {
  if (s == "fourier-hermite") return TestFunctionKind::fourier_hermite;
  if (s == "gaussian-bump") return TestFunctionKind::gaussian_bump;
  if (s == "tabulated") return TestFunctionKind::tabulated;
  if (s == "constant") return TestFunctionKind::constant;
  if (s == "collision-invariant") return TestFunctionKind::collision_invariant;
  throw Error(ErrorCode::malformed_spec, "unknown test function kind '" + s + "'");
}

const char* invariant_name(Invariant w) {
  switch (w) {
    case Invariant::mass: return "mass";
    case Invariant::v1: return "v1";
    case Invariant::v2: return "v2";
    case Invariant::v3: return "v3";
    case Invariant::energy: return "energy";
  }
  return "?";
}

Invariant invariant_from_name(const std::string& s) {
  if (s == "mass") return Invariant::mass;
  if (s == "v1") return Invariant::v1;
  if (s == "v2") return Invariant::v2;
  if (s == "v3") return Invariant::v3;
  if (s == "energy") return Invariant::energy;
  throw Error(ErrorCode::malformed_spec, "unknown collision invariant '" + s + "'");
}

template <class T>
nlohmann::json array_prefix(const T& a, int n) {
  auto j = nlohmann::json::array();
  for (int k = 0; k < n; ++k) j.push_back(a[k]);
  return j;
}

template <class T>
void read_array(const nlohmann::json& j, T& out) {
  if (!j.is_array() || j.size() > 3) throw Error(ErrorCode::malformed_spec, "expected an array of length <= 3");
  for (std::size_t k = 0; k < j.size(); ++k) out[k] = j[k].get<typename T::value_type>();
}

}  // namespace

double hermite_he(int n, double x) {
  if (n <= 0) return 1.0;
  double prev = 1.0, cur = x;
  for (int k = 1; k < n; ++k) {
    const double next = x * cur - k * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

double VelocityTable::eval(const Vec& v) const {
  const int d = dim();
  std::array<std::size_t, 3> lo{};
  std::array<double, 3> frac{};
  for (int a = 0; a < d; ++a) {
    const auto& ax = axes[a];
    if (v[a] < ax.front() || v[a] > ax.back()) return 0.0;
    auto it = std::upper_bound(ax.begin(), ax.end(), v[a]);
    std::size_t i = (it == ax.begin()) ? 0 : static_cast<std::size_t>(it - ax.begin()) - 1;
    if (i + 1 >= ax.size()) i = ax.size() - 2;
    lo[a] = i;
    frac[a] = (v[a] - ax[i]) / (ax[i + 1] - ax[i]);
  }
  double acc = 0.0;
  for (int corner = 0; corner < (1 << d); ++corner) {
    double w = 1.0;
    std::size_t idx = 0;
    for (int a = 0; a < d; ++a) {
      const int bit = (corner >> a) & 1;
      w *= bit ? frac[a] : 1.0 - frac[a];
      idx = idx * axes[a].size() + lo[a] + bit;
    }
    if (w != 0.0) acc += w * values[idx];
  }
  return acc;
}

void VelocityTable::validate() const {
  const int d = dim();
  if (d < 1 || d > 3) throw Error(ErrorCode::malformed_spec, "table dimension must be 1..3");
  std::size_t n = 1;
  for (const auto& ax : axes) {
    if (ax.size() < 2) throw Error(ErrorCode::malformed_spec, "table axis needs >= 2 nodes");
    for (std::size_t i = 1; i < ax.size(); ++i)
      if (!(ax[i] > ax[i - 1])) throw Error(ErrorCode::malformed_spec, "table axis not strictly increasing");
    n *= ax.size();
  }
  if (values.size() != n) throw Error(ErrorCode::malformed_spec, "table value count does not match axes");
}

bool TestFunctionSpec::depends_on_x() const {
  switch (kind) {
    case TestFunctionKind::fourier_hermite: return modes != std::array<int, 3>{0, 0, 0};
    case TestFunctionKind::gaussian_bump: return width_x > 0.0;
    default: return false;
  }
}

double eval_test_function(const TestFunctionSpec& s, const Vec& x, const Vec& v, int d) {
  switch (s.kind) {
    case TestFunctionKind::constant:
      return s.value;
    case TestFunctionKind::collision_invariant:
      switch (s.invariant) {
        case Invariant::mass: return s.amplitude;
        case Invariant::v1: return s.amplitude * v[0];
        case Invariant::v2: return s.amplitude * v[1];
        case Invariant::v3: return s.amplitude * v[2];
        case Invariant::energy: return s.amplitude * norm2(v);
      }
      return 0.0;
    case TestFunctionKind::fourier_hermite: {
      double phase = 0.0;
      for (int a = 0; a < d; ++a) phase += s.modes[a] * x[a];
      phase *= 2.0 * kPi;
      double h = s.amplitude * (s.sine ? std::sin(phase) : std::cos(phase));
      for (int a = 0; a < d; ++a) h *= hermite_he(s.hermite[a], v[a]);
      return h;
    }
    case TestFunctionKind::gaussian_bump: {
      double e = -norm2(v - s.center_v) / (2.0 * s.width_v * s.width_v);
      if (s.width_x > 0.0) e -= norm2(minimal_image(s.center_x, x, d)) / (2.0 * s.width_x * s.width_x);
      return s.amplitude * std::exp(e);
    }
    case TestFunctionKind::tabulated:
      return s.amplitude * s.table->eval(v);
  }
  return 0.0;
}

void validate(const TestFunctionSpec& s, int d) {
  if (d != 2 && d != 3) throw Error(ErrorCode::invalid_dimension, "test function dimension");
  if (!std::isfinite(s.amplitude)) throw Error(ErrorCode::malformed_spec, "non-finite amplitude");
  switch (s.kind) {
    case TestFunctionKind::fourier_hermite:
      for (int a = 0; a < 3; ++a) {
        if (s.hermite[a] < 0 || s.hermite[a] > 12) throw Error(ErrorCode::malformed_spec, "hermite index out of range");
        if (a >= d && (s.modes[a] != 0 || s.hermite[a] != 0))
          throw Error(ErrorCode::malformed_spec, "mode index beyond dimension");
      }
      break;
    case TestFunctionKind::gaussian_bump:
      if (!(s.width_v > 0.0)) throw Error(ErrorCode::malformed_spec, "gaussian-bump needs width_v > 0");
      break;
    case TestFunctionKind::tabulated:
      if (!s.table) throw Error(ErrorCode::malformed_spec, "tabulated spec without table");
      s.table->validate();
      if (s.table->dim() != d) throw Error(ErrorCode::malformed_spec, "table dimension differs from d");
      break;
    case TestFunctionKind::constant:
      if (!std::isfinite(s.value)) throw Error(ErrorCode::malformed_spec, "non-finite constant");
      break;
    case TestFunctionKind::collision_invariant:
      if (s.invariant == Invariant::v3 && d < 3) throw Error(ErrorCode::malformed_spec, "v3 invariant needs d = 3");
      break;
  }
  if (s.decay) {
    const auto [C, beta] = *s.decay;
    if (!(C >= 0.0) || !(beta >= 0.0)) throw Error(ErrorCode::malformed_spec, "decay bound needs C >= 0, beta >= 0");
    // Probe lattice: a few positions, velocities on a coarse grid in [-8, 8]^d.
    const std::array<Vec, 3> xs{Vec{0.0, 0.0, 0.0}, Vec{0.25, 0.5, 0.75}, Vec{0.6, 0.1, 0.3}};
    const int n = 33;
    const int total = d == 2 ? n * n : n * n * n;
    for (const auto& x : xs) {
      for (int idx = 0; idx < total; ++idx) {
        Vec v{0.0, 0.0, 0.0};
        int r = idx;
        for (int a = 0; a < d; ++a) {
          v[a] = -8.0 + 0.5 * (r % n);
          r /= n;
        }
        const double h = std::abs(eval_test_function(s, x, v, d));
        const double bound = C * std::exp(-0.25 * beta * norm2(v));
        if (h > bound * (1.0 + 1e-9) + 1e-300)
          throw Error(ErrorCode::malformed_spec, "declared velocity-decay bound violated");
      }
    }
  }
}

TestFunctionSpec scaled(const TestFunctionSpec& spec, double s) {
  TestFunctionSpec out = spec;
  if (out.kind == TestFunctionKind::constant) out.value *= s;
  else out.amplitude *= s;
  if (out.decay) out.decay->C *= std::abs(s);
  return out;
}

TestFunctionSpec make_constant(double c, std::string name) {
  TestFunctionSpec s;
  s.kind = TestFunctionKind::constant;
  s.value = c;
  s.name = std::move(name);
  s.decay = DecayBound{std::abs(c), 0.0};
  return s;
}

TestFunctionSpec make_fourier_hermite(std::array<int, 3> modes, std::array<int, 3> hermite, bool sine,
                                      std::string name) {
  TestFunctionSpec s;
  s.kind = TestFunctionKind::fourier_hermite;
  s.modes = modes;
  s.hermite = hermite;
  s.sine = sine;
  s.name = std::move(name);
  return s;
}

TestFunctionSpec make_invariant(Invariant which, std::string name) {
  TestFunctionSpec s;
  s.kind = TestFunctionKind::collision_invariant;
  s.invariant = which;
  s.name = std::move(name);
  return s;
}

TestFunctionSpec make_velocity_bump(const Vec& center_v, double width_v, double amplitude, std::string name) {
  TestFunctionSpec s;
  s.kind = TestFunctionKind::gaussian_bump;
  s.center_v = center_v;
  s.width_v = width_v;
  s.amplitude = amplitude;
  s.name = std::move(name);
  return s;
}

nlohmann::json to_json(const TestFunctionSpec& s) {
  nlohmann::json params;
  const int n = 3;
  switch (s.kind) {
    case TestFunctionKind::fourier_hermite:
      params["modes"] = array_prefix(s.modes, n);
      params["hermite"] = array_prefix(s.hermite, n);
      params["phase"] = s.sine ? "sin" : "cos";
      params["amplitude"] = s.amplitude;
      break;
    case TestFunctionKind::gaussian_bump:
      params["center_x"] = array_prefix(s.center_x, n);
      params["center_v"] = array_prefix(s.center_v, n);
      params["width_x"] = s.width_x;
      params["width_v"] = s.width_v;
      params["amplitude"] = s.amplitude;
      break;
    case TestFunctionKind::tabulated:
      params["axes"] = s.table ? s.table->axes : std::vector<std::vector<double>>{};
      params["values"] = s.table ? s.table->values : std::vector<double>{};
      params["amplitude"] = s.amplitude;
      break;
    case TestFunctionKind::constant:
      params["value"] = s.value;
      break;
    case TestFunctionKind::collision_invariant:
      params["component"] = invariant_name(s.invariant);
      params["amplitude"] = s.amplitude;
      break;
  }
  if (!s.name.empty()) params["name"] = s.name;
  if (s.decay) params["decay"] = {{"C", s.decay->C}, {"beta", s.decay->beta}};
  return {{"kind", kind_name(s.kind)}, {"params", params}};
}

TestFunctionSpec test_function_from_json(const nlohmann::json& j) {
  try {
    TestFunctionSpec s;
    s.kind = kind_from_name(j.at("kind").get<std::string>());
    const nlohmann::json params = j.contains("params") ? j.at("params") : nlohmann::json::object();
    s.name = params.value("name", std::string{});
    s.amplitude = params.value("amplitude", 1.0);
    switch (s.kind) {
      case TestFunctionKind::fourier_hermite:
        if (params.contains("modes")) read_array(params.at("modes"), s.modes);
        if (params.contains("hermite")) read_array(params.at("hermite"), s.hermite);
        s.sine = params.value("phase", std::string("cos")) == "sin";
        break;
      case TestFunctionKind::gaussian_bump:
        if (params.contains("center_x")) read_array(params.at("center_x"), s.center_x);
        if (params.contains("center_v")) read_array(params.at("center_v"), s.center_v);
        s.width_x = params.value("width_x", 0.0);
        s.width_v = params.value("width_v", 1.0);
        break;
      case TestFunctionKind::tabulated: {
        auto t = std::make_shared<VelocityTable>();
        if (params.contains("csv")) {
          std::ifstream in(params.at("csv").get<std::string>());
          if (!in) throw Error(ErrorCode::io_error, "cannot open table csv");
          *t = read_table_csv(in);
        } else {
          t->axes = params.at("axes").get<std::vector<std::vector<double>>>();
          t->values = params.at("values").get<std::vector<double>>();
        }
        t->validate();
        s.table = std::move(t);
        break;
      }
      case TestFunctionKind::constant:
        s.value = params.at("value").get<double>();
        break;
      case TestFunctionKind::collision_invariant:
        s.invariant = invariant_from_name(params.value("component", std::string("mass")));
        break;
    }
    if (params.contains("decay")) {
      const auto& dj = params.at("decay");
      s.decay = DecayBound{dj.at("C").get<double>(), dj.value("beta", 0.0)};
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::malformed_spec, e.what());
  }
}

void write_table_csv(std::ostream& os, const VelocityTable& t) {
  t.validate();
  const int d = t.dim();
  os.precision(17);
  for (int a = 0; a < d; ++a) os << "v" << a + 1 << ",";
  os << "value\n";
  std::vector<std::size_t> idx(d, 0);
  for (std::size_t k = 0; k < t.values.size(); ++k) {
    std::size_t r = k;
    for (int a = d - 1; a >= 0; --a) {
      idx[a] = r % t.axes[a].size();
      r /= t.axes[a].size();
    }
    for (int a = 0; a < d; ++a) os << t.axes[a][idx[a]] << ",";
    os << t.values[k] << "\n";
  }
}

VelocityTable read_table_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorCode::io_error, "table csv: empty");
  const int d = static_cast<int>(std::count(line.begin(), line.end(), ','));
  if (d < 1 || d > 3) throw Error(ErrorCode::malformed_spec, "table csv: bad header");
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<double> r;
    while (std::getline(row, cell, ',')) r.push_back(std::stod(cell));
    if (static_cast<int>(r.size()) != d + 1) throw Error(ErrorCode::malformed_spec, "table csv: bad row");
    rows.push_back(std::move(r));
  }
  VelocityTable t;
  t.axes.resize(d);
  for (int a = 0; a < d; ++a) {
    for (const auto& r : rows) t.axes[a].push_back(r[a]);
    std::sort(t.axes[a].begin(), t.axes[a].end());
    t.axes[a].erase(std::unique(t.axes[a].begin(), t.axes[a].end()), t.axes[a].end());
  }
  std::size_t n = 1;
  for (const auto& ax : t.axes) n *= ax.size();
  if (n != rows.size()) throw Error(ErrorCode::malformed_spec, "table csv: not a complete tensor grid");
  t.values.assign(n, 0.0);
  for (const auto& r : rows) {
    std::size_t idx = 0;
    for (int a = 0; a < d; ++a) {
      const auto& ax = t.axes[a];
      idx = idx * ax.size() + static_cast<std::size_t>(std::lower_bound(ax.begin(), ax.end(), r[a]) - ax.begin());
    }
    t.values[idx] = r[d];
  }
  return t;
}

}  // namespace hsl
