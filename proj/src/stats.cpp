#include "hsl/stats.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/chi_squared.hpp>

#include "hsl/rng.hpp"
#include "hsl/types.hpp"

namespace hsl::stats {

Moments moments(std::span<const double> xs) {
  Moments m;
  m.n = xs.size();
  if (m.n == 0) return m;
  double s = 0.0;
  for (double x : xs) s += x;
  m.mean = s / static_cast<double>(m.n);
  double s2 = 0.0, s3 = 0.0, s4 = 0.0;
  for (double x : xs) {
    const double e = x - m.mean;
    const double e2 = e * e;
    s2 += e2;
    s3 += e2 * e;
    s4 += e2 * e2;
  }
  const double n = static_cast<double>(m.n);
  m.var = m.n > 1 ? s2 / (n - 1.0) : 0.0;
  m.m3 = s3 / n;
  m.m4 = s4 / n;
  return m;
}

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double half_width(const Moments& m) {
  if (m.n == 0) return 0.0;
  return kConfidenceZ * std::sqrt(m.var / static_cast<double>(m.n));
}

double bootstrap_sd(std::size_t n, const IndexStatistic& stat, std::size_t resamples, std::uint64_t seed) {
  if (n == 0 || resamples < 2) return 0.0;
  Engine rng = make_engine(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> idx(n);
  std::vector<double> values;
  values.reserve(resamples);
  for (std::size_t b = 0; b < resamples; ++b) {
    for (auto& k : idx) k = pick(rng);
    values.push_back(stat(idx));
  }
  return std::sqrt(moments(values).var);
}

LinearFit least_squares(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorCode::insufficient_replicas, "least squares needs >= 2 points");
  const double n = static_cast<double>(x.size());
  const double mx = mean(x), my = mean(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (x.size() > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = y[i] - f.intercept - f.slope * x[i];
      rss += r * r;
    }
    f.slope_se = std::sqrt(rss / (n - 2.0) / sxx);
  }
  return f;
}

double chi_square_quantile(double dof, double p) {
  return boost::math::quantile(boost::math::chi_squared_distribution<double>(dof), p);
}

ChiSquareResult chi_square_equiprobable(std::span<const double> samples, const std::function<double(double)>& cdf,
                                        int bins, double level) {
  std::vector<double> counts(bins, 0.0);
  for (double x : samples) {
    const int b = std::clamp(static_cast<int>(cdf(x) * bins), 0, bins - 1);
    counts[b] += 1.0;
  }
  const double expected = static_cast<double>(samples.size()) / bins;
  ChiSquareResult r;
  for (double c : counts) r.statistic += (c - expected) * (c - expected) / expected;
  r.dof = bins - 1;
  r.critical = chi_square_quantile(r.dof, 1.0 - level);
  r.passed = r.statistic <= r.critical;
  return r;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace hsl::stats
