#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace enova::stats {

inline constexpr double kDefaultAlpha = 0.05;

// Simple linear least squares y = intercept + slope * x with a two-sided
// t-test of H0: slope == 0.
struct OlsFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double t_statistic = 0.0;
  double p_value = 1.0;
  double r_squared = 0.0;
  std::size_t n = 0;

  bool significant(double alpha = kDefaultAlpha) const { return p_value < alpha; }
  double predict(double x) const { return intercept + slope * x; }
};

// Requires equal lengths >= 2 and x not all identical. A fit with zero
// residual variance reports p_value 0; with n == 2 no test is possible and
// p_value is 1.
OlsFit ols_fit(std::span<const double> x, std::span<const double> y);

// Gaussian-kernel density estimate with Silverman's rule-of-thumb bandwidth.
class KdeModel {
 public:
  static constexpr double kMinBandwidth = 1e-6;

  explicit KdeModel(std::vector<double> samples);

  double bandwidth() const { return bandwidth_; }
  std::size_t sample_count() const { return support_.size(); }
  const std::vector<double>& support() const { return support_; }

  double density(double x) const;
  double cdf(double x) const;
  double quantile(double q) const;

 private:
  std::vector<double> support_;  // sorted
  double bandwidth_ = kMinBandwidth;
};

KdeModel kde_fit(std::span<const double> samples);
double kde_quantile(const KdeModel& model, double q);

// Linear-interpolated sample quantile (type 7).
double empirical_quantile(std::span<const double> samples, double q);

// Generalized Pareto tail over the threshold u, fitted by peaks-over-threshold.
struct TailModel {
  static constexpr std::size_t kMinExceedances = 10;

  double threshold_u = 0.0;
  double shape_xi = 0.0;
  double scale_sigma = 1.0;
  std::size_t exceedance_count = 0;
  std::size_t sample_count = 0;
  double risk_q = 1e-3;
  bool maximum_likelihood = true;  // false when the moment fallback was used
  double final_threshold = 0.0;    // z_q with P(score > z_q) ~= risk_q
};

inline constexpr double kDefaultPotInitialQuantile = 0.98;
inline constexpr double kDefaultPotRisk = 1e-3;

TailModel fit_tail_pot(std::span<const double> scores,
                       double initial_quantile = kDefaultPotInitialQuantile,
                       double risk_q = kDefaultPotRisk);

// Threshold of a fitted tail at another risk level.
double pot_threshold(const TailModel& tail, double risk_q);

// Maxima of consecutive non-overlapping blocks; a trailing partial block is
// kept.
std::vector<double> block_maxima(std::span<const double> samples, std::size_t block_size);

double mean(std::span<const double> v);
double variance(std::span<const double> v);  // unbiased

// Trailing moving average; element i averages [i - width + 1, i] clipped at 0.
std::vector<double> trailing_mean(std::span<const double> v, std::size_t width);

}  // namespace enova::stats
