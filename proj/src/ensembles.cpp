#include "hsl/ensembles.hpp"

#include <algorithm>

namespace hsl::ensembles {

double InitialDensitySpec::spatial_density(const Vec& x) const {
  if (spatial == SpatialProfile::uniform) return 1.0;
  return 1.0 + cos_amplitude * std::cos(2.0 * kPi * x[cos_axis]);
}

double InitialDensitySpec::velocity_density(const Vec& v, int d) const {
  if (velocity == VelocityLaw::maxwellian) return maxwellian(v, d);
  const double s2 = bimodal_sigma * bimodal_sigma;
  const double norm_c = std::pow(2.0 * kPi * s2, -0.5 * d);
  Vec shift{bimodal_shift, 0.0, 0.0};
  return 0.5 * norm_c * (std::exp(-norm2(v - shift) / (2.0 * s2)) + std::exp(-norm2(v + shift) / (2.0 * s2)));
}

Vec InitialDensitySpec::sample_position(Engine& rng, int d) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec x{0.0, 0.0, 0.0};
  for (int a = 0; a < d; ++a) x[a] = u(rng);
  if (spatial == SpatialProfile::cosine) {
    const double top = 1.0 + std::abs(cos_amplitude);
    while (u(rng) * top > spatial_density(x)) x[cos_axis] = u(rng);
  }
  return x;
}

Vec InitialDensitySpec::sample_velocity(Engine& rng, int d) const {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec v{0.0, 0.0, 0.0};
  if (velocity == VelocityLaw::maxwellian) {
    for (int a = 0; a < d; ++a) v[a] = g(rng);
    return v;
  }
  std::bernoulli_distribution side(0.5);
  const double sign = side(rng) ? 1.0 : -1.0;
  for (int a = 0; a < d; ++a) v[a] = bimodal_sigma * g(rng);
  v[0] += sign * bimodal_shift;
  return v;
}

Vec InitialDensitySpec::mean_velocity(int) const { return {0.0, 0.0, 0.0}; }

double InitialDensitySpec::mean_energy(int d) const {
  if (velocity == VelocityLaw::maxwellian) return d;
  return bimodal_shift * bimodal_shift + d * bimodal_sigma * bimodal_sigma;
}

void InitialDensitySpec::validate(int d) const {
  if (spatial == SpatialProfile::cosine) {
    if (!(std::abs(cos_amplitude) <= 0.5)) throw Error(ErrorCode::invalid_density, "cosine amplitude must satisfy |a| <= 0.5");
    if (cos_axis < 0 || cos_axis >= d) throw Error(ErrorCode::invalid_density, "cosine axis out of range");
  }
  if (velocity == VelocityLaw::bimodal) {
    if (!(bimodal_sigma > 0.0) || !std::isfinite(bimodal_shift))
      throw Error(ErrorCode::invalid_density, "bimodal law needs sigma > 0 and finite shift");
  }
}

nlohmann::json to_json(const InitialDensitySpec& f) {
  nlohmann::json sp, ve;
  if (f.spatial == SpatialProfile::uniform) sp = {{"profile", "uniform"}};
  else sp = {{"profile", "cosine"}, {"amplitude", f.cos_amplitude}, {"axis", f.cos_axis}};
  if (f.velocity == VelocityLaw::maxwellian) ve = {{"law", "maxwellian"}};
  else ve = {{"law", "bimodal"}, {"shift", f.bimodal_shift}, {"sigma", f.bimodal_sigma}};
  return {{"spatial", sp}, {"velocity", ve}};
}

InitialDensitySpec initial_density_from_json(const nlohmann::json& j) {
  InitialDensitySpec f;
  try {
    if (j.contains("spatial")) {
      const auto& sp = j.at("spatial");
      const auto profile = sp.value("profile", std::string("uniform"));
      if (profile == "cosine") {
        f.spatial = SpatialProfile::cosine;
        f.cos_amplitude = sp.value("amplitude", 0.0);
        f.cos_axis = sp.value("axis", 0);
      } else if (profile != "uniform") {
        throw Error(ErrorCode::invalid_density, "unknown spatial profile '" + profile + "'");
      }
    }
    if (j.contains("velocity")) {
      const auto& ve = j.at("velocity");
      const auto law = ve.value("law", std::string("maxwellian"));
      if (law == "bimodal") {
        f.velocity = VelocityLaw::bimodal;
        f.bimodal_shift = ve.value("shift", 1.5);
        f.bimodal_sigma = ve.value("sigma", 0.5);
      } else if (law != "maxwellian") {
        throw Error(ErrorCode::invalid_density, "unknown velocity law '" + law + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::invalid_density, e.what());
  }
  return f;
}

nlohmann::json to_json(const GrandCanonicalSpec& s) {
  return {{"scaling", {{"d", s.scaling.d}, {"eps", s.scaling.eps}, {"alpha", s.scaling.alpha}}},
          {"f0", to_json(s.f0)},
          {"seed", s.seed}};
}

GrandCanonicalSpec grand_canonical_from_json(const nlohmann::json& j) {
  GrandCanonicalSpec s;
  const auto& sc = j.at("scaling");
  s.scaling = validate_scaling(sc.value("d", 2), sc.at("eps").get<double>(), sc.value("alpha", 1.0));
  s.f0 = initial_density_from_json(j.value("f0", nlohmann::json::object()));
  s.seed = j.value("seed", std::uint64_t{0});
  return s;
}

bool has_overlap(const std::vector<Vec>& xs, int d, double eps) {
  const std::size_t n = xs.size();
  if (n < 2) return false;
  const double target = std::floor(std::pow(static_cast<double>(n), 1.0 / d));
  int nc = static_cast<int>(std::min(target, std::floor(1.0 / eps)));
  if (nc < 3) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (norm2(minimal_image(xs[i], xs[j], d)) <= eps * eps) return true;
    return false;
  }
  const int ncell = d == 2 ? nc * nc : nc * nc * nc;
  std::vector<int> head(ncell, -1), next(n, -1);
  std::vector<std::array<int, 3>> coord(n);
  auto index = [&](std::array<int, 3> c) {
    int idx = 0;
    for (int a = 0; a < d; ++a) idx = idx * nc + ((c[a] % nc) + nc) % nc;
    return idx;
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (int a = 0; a < 3; ++a) coord[i][a] = a < d ? std::min(nc - 1, static_cast<int>(xs[i][a] * nc)) : 0;
    const int c = index(coord[i]);
    next[i] = head[c];
    head[c] = static_cast<int>(i);
  }
  const int span = d == 2 ? 9 : 27;
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < span; ++k) {
      std::array<int, 3> c = coord[i];
      int q = k;
      for (int a = 0; a < d; ++a) {
        c[a] += (q % 3) - 1;
        q /= 3;
      }
      for (int j = head[index(c)]; j >= 0; j = next[j]) {
        if (static_cast<std::size_t>(j) <= i) continue;
        if (norm2(minimal_image(xs[i], xs[j], d)) <= eps * eps) return true;
      }
    }
  }
  return false;
}

std::pair<ParticleSystem, SamplerReport> sample_grand_canonical(const GrandCanonicalSpec& spec,
                                                                const SamplerOptions& options) {
  const int d = spec.scaling.d;
  if (d != 2 && d != 3) throw Error(ErrorCode::invalid_dimension, "sampler dimension");
  if (!(packing_fraction(d, spec.scaling.eps, spec.scaling.mu) < kMaxPackingFraction))
    throw Error(ErrorCode::scaling_violation, "packing bound violated");
  spec.f0.validate(d);

  Engine rng = make_engine(spec.seed);
  std::poisson_distribution<long> count(spec.scaling.mu);
  SamplerReport report;
  ParticleSystem s;
  s.scaling = spec.scaling;
  for (;;) {
    if (report.attempts >= options.max_attempts)
      throw Error(ErrorCode::rejection_budget_exhausted,
                  "no admissible configuration after " + std::to_string(report.attempts) + " attempts");
    ++report.attempts;
    const auto n = static_cast<std::size_t>(count(rng));
    s.positions.resize(n);
    s.velocities.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      s.positions[i] = spec.f0.sample_position(rng, d);
      s.velocities[i] = spec.f0.sample_velocity(rng, d);
    }
    if (!options.exclusion || !has_overlap(s.positions, d, spec.scaling.eps)) break;
    ++report.rejections;
  }
  report.realized_n = s.size();
  report.acceptance_rate = 1.0 / static_cast<double>(report.attempts);
  return {std::move(s), report};
}

std::pair<ParticleSystem, SamplerReport> sample_equilibrium(const ScalingParams& scaling, std::uint64_t seed,
                                                            const SamplerOptions& options) {
  return sample_grand_canonical(GrandCanonicalSpec{scaling, InitialDensitySpec{}, seed}, options);
}

}  // namespace hsl::ensembles
