#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace hsl::stats {

/// Sample mean, unbiased variance, and central third/fourth moments (1/n normalization).
struct Moments {
  std::size_t n = 0;
  double mean = 0.0;
  double var = 0.0;
  double m3 = 0.0;
  double m4 = 0.0;
};

Moments moments(std::span<const double> xs);

double mean(std::span<const double> xs);

/// Confidence half-width z * sd / sqrt(n), z = 3.
inline constexpr double kConfidenceZ = 3.0;
double half_width(const Moments& m);

using IndexStatistic = std::function<double(const std::vector<std::size_t>& indices)>;

/// Standard deviation of `stat` over `resamples` bootstrap draws of {0..n-1}.
double bootstrap_sd(std::size_t n, const IndexStatistic& stat, std::size_t resamples, std::uint64_t seed);

inline constexpr std::size_t kBootstrapResamples = 1000;

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
};

/// Ordinary least squares y = intercept + slope * x with the textbook slope standard error.
LinearFit least_squares(std::span<const double> x, std::span<const double> y);

double chi_square_quantile(double dof, double p);

struct ChiSquareResult {
  double statistic = 0.0;
  double critical = 0.0;
  int dof = 0;
  bool passed = false;
};

/// Goodness of fit with `bins` equal-probability bins defined through the
/// reference CDF; rejects at the given level.
ChiSquareResult chi_square_equiprobable(std::span<const double> samples, const std::function<double(double)>& cdf,
                                        int bins, double level);

double normal_cdf(double x);

}  // namespace hsl::stats
