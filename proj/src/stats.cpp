#include "enova/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/tools/minima.hpp>

#include "enova/core.hpp"

namespace enova::stats {

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return acc / static_cast<double>(v.size() - 1);
}

std::vector<double> trailing_mean(std::span<const double> v, std::size_t width) {
  if (width <= 1) return {v.begin(), v.end()};
  std::vector<double> out(v.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    acc += v[i];
    if (i >= width) acc -= v[i - width];
    out[i] = acc / static_cast<double>(std::min(i + 1, width));
  }
  return out;
}

OlsFit ols_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("ols_fit: x and y differ in length");
  if (x.size() < 2) throw Error("ols_fit: need at least 2 points");
  if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; })) {
    throw Error("ols_fit: degenerate input, all x identical");
  }
  const std::size_t n = x.size();
  const double mx = mean(x);
  const double my = mean(y);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  OlsFit fit;
  fit.n = n;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - fit.predict(x[i]);
    sse += r * r;
  }
  fit.r_squared = syy > 0.0 ? std::clamp(1.0 - sse / syy, 0.0, 1.0) : 1.0;

  if (n < 3) {
    fit.slope_stderr = std::numeric_limits<double>::quiet_NaN();
    fit.t_statistic = std::numeric_limits<double>::quiet_NaN();
    fit.p_value = 1.0;
    return fit;
  }
  // Residual variance below rounding noise of y counts as an exact fit.
  const double noise_floor = 1e-24 * std::max(syy, my * my * static_cast<double>(n));
  if (sse <= noise_floor) {
    fit.slope_stderr = 0.0;
    fit.t_statistic = fit.slope == 0.0 ? 0.0 : std::copysign(
        std::numeric_limits<double>::infinity(), fit.slope);
    fit.p_value = fit.slope == 0.0 ? 1.0 : 0.0;
    return fit;
  }
  const double dof = static_cast<double>(n - 2);
  fit.slope_stderr = std::sqrt(sse / dof / sxx);
  fit.t_statistic = fit.slope / fit.slope_stderr;
  boost::math::students_t dist(dof);
  fit.p_value = std::clamp(2.0 * boost::math::cdf(boost::math::complement(
                                     dist, std::fabs(fit.t_statistic))),
                           0.0, 1.0);
  return fit;
}

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

KdeModel::KdeModel(std::vector<double> samples) : support_(std::move(samples)) {
  if (support_.empty()) throw Error("kde_fit: no samples");
  for (double v : support_) {
    if (!std::isfinite(v)) throw Error("kde_fit: non-finite sample");
  }
  std::sort(support_.begin(), support_.end());
  const double n = static_cast<double>(support_.size());
  const double sd = std::sqrt(variance(support_));
  const double iqr = empirical_quantile(support_, 0.75) - empirical_quantile(support_, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = sd;
  bandwidth_ = std::max(0.9 * spread * std::pow(n, -0.2), kMinBandwidth);
}

double KdeModel::density(double x) const {
  const double inv = 1.0 / bandwidth_;
  double acc = 0.0;
  for (double s : support_) {
    const double z = (x - s) * inv;
    acc += std::exp(-0.5 * z * z);
  }
  return acc * inv / (std::sqrt(2.0 * M_PI) * static_cast<double>(support_.size()));
}

double KdeModel::cdf(double x) const {
  // Kernels further than 9 bandwidths away contribute exactly 0 or 1.
  const double reach = 9.0 * bandwidth_;
  auto lo = std::lower_bound(support_.begin(), support_.end(), x - reach);
  auto hi = std::upper_bound(support_.begin(), support_.end(), x + reach);
  double acc = static_cast<double>(lo - support_.begin());
  const double inv = 1.0 / bandwidth_;
  for (auto it = lo; it != hi; ++it) acc += normal_cdf((x - *it) * inv);
  return acc / static_cast<double>(support_.size());
}

double KdeModel::quantile(double q) const {
  if (!(q > 0.0 && q < 1.0)) throw Error("kde_quantile: q must be in (0,1)");
  double lo = support_.front() - 10.0 * bandwidth_;
  double hi = support_.back() + 10.0 * bandwidth_;
  for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, std::fabs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (cdf(mid) < q) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

KdeModel kde_fit(std::span<const double> samples) {
  return KdeModel(std::vector<double>(samples.begin(), samples.end()));
}

double kde_quantile(const KdeModel& model, double q) { return model.quantile(q); }

double empirical_quantile(std::span<const double> samples, double q) {
  if (samples.empty()) throw Error("empirical_quantile: no samples");
  std::vector<double> v(samples.begin(), samples.end());
  std::sort(v.begin(), v.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(v.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  if (i + 1 >= v.size()) return v.back();
  const double frac = pos - static_cast<double>(i);
  return v[i] + frac * (v[i + 1] - v[i]);
}

std::vector<double> block_maxima(std::span<const double> samples, std::size_t block_size) {
  if (block_size == 0) throw Error("block_maxima: block size must be >= 1");
  std::vector<double> out;
  for (std::size_t start = 0; start < samples.size(); start += block_size) {
    const std::size_t end = std::min(samples.size(), start + block_size);
    out.push_back(*std::max_element(samples.begin() + static_cast<std::ptrdiff_t>(start),
                                    samples.begin() + static_cast<std::ptrdiff_t>(end)));
  }
  return out;
}

namespace {

struct GpdEstimate {
  double xi;
  double sigma;
  bool ok;
};

// Log-likelihood of the GPD profiled over theta = xi / sigma.
double profile_log_likelihood(std::span<const double> y, double theta) {
  const double n = static_cast<double>(y.size());
  if (std::fabs(theta) < 1e-12) {
    const double m = mean(y);
    return -n * std::log(m) - n;
  }
  double sum_log = 0.0;
  for (double v : y) {
    const double a = 1.0 + theta * v;
    if (!(a > 0.0)) return -std::numeric_limits<double>::infinity();
    sum_log += std::log1p(theta * v);
  }
  const double xi = sum_log / n;
  const double sigma = xi / theta;
  if (!(sigma > 0.0)) return -std::numeric_limits<double>::infinity();
  return -n * std::log(sigma) - (1.0 + 1.0 / xi) * sum_log;
}

GpdEstimate gpd_from_theta(std::span<const double> y, double theta) {
  if (std::fabs(theta) < 1e-12) return {0.0, mean(y), true};
  double sum_log = 0.0;
  for (double v : y) sum_log += std::log1p(theta * v);
  const double xi = sum_log / static_cast<double>(y.size());
  return {xi, xi / theta, xi / theta > 0.0};
}

GpdEstimate fit_gpd_mle(std::span<const double> y) {
  const double ymax = *std::max_element(y.begin(), y.end());
  const double ymean = mean(y);
  if (!(ymax > 0.0) || !(ymean > 0.0)) return {0.0, 0.0, false};
  // theta in (-1/ymax, +inf); scan a log-spaced grid on both sides of 0 and
  // refine the best bracket with Brent.
  const double lower = -1.0 / ymax * (1.0 - 1e-9);
  std::vector<double> grid;
  grid.push_back(0.0);
  for (int k = 1; k <= 60; ++k) {
    const double frac = std::pow(10.0, -6.0 + 6.0 * k / 60.0);
    grid.push_back(lower * frac);
    grid.push_back(frac * 20.0 / ymean);
  }
  std::sort(grid.begin(), grid.end());
  std::size_t best = 0;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double ll = profile_log_likelihood(y, grid[i]);
    if (ll > best_ll) {
      best_ll = ll;
      best = i;
    }
  }
  if (!std::isfinite(best_ll)) return {0.0, 0.0, false};
  const double a = grid[best > 0 ? best - 1 : best];
  const double b = grid[best + 1 < grid.size() ? best + 1 : best];
  double theta = grid[best];
  if (b > a) {
    auto neg = [&](double t) { return -profile_log_likelihood(y, t); };
    auto [t, f] = boost::math::tools::brent_find_minima(neg, a, b, 52);
    if (-f >= best_ll) theta = t;
  }
  return gpd_from_theta(y, theta);
}

GpdEstimate fit_gpd_moments(std::span<const double> y) {
  const double m = mean(y);
  const double v = variance(y);
  if (!(m > 0.0) || !(v > 0.0)) return {0.0, std::max(m, 1e-12), m > 0.0};
  const double r = m * m / v;
  return {0.5 * (1.0 - r), 0.5 * m * (r + 1.0), true};
}

}  // namespace

double pot_threshold(const TailModel& tail, double risk_q) {
  if (!(risk_q > 0.0 && risk_q < 1.0)) throw Error("pot: risk must be in (0,1)");
  const double ratio = risk_q * static_cast<double>(tail.sample_count) /
                       static_cast<double>(tail.exceedance_count);
  double z;
  if (std::fabs(tail.shape_xi) < 1e-12) {
    z = tail.threshold_u - tail.scale_sigma * std::log(ratio);
  } else {
    // sigma/xi * (ratio^-xi - 1), written to stay accurate for small xi.
    z = tail.threshold_u +
        tail.scale_sigma * std::expm1(-tail.shape_xi * std::log(ratio)) / tail.shape_xi;
  }
  return std::max(z, tail.threshold_u);
}

TailModel fit_tail_pot(std::span<const double> scores, double initial_quantile,
                       double risk_q) {
  if (!(initial_quantile > 0.0 && initial_quantile < 1.0)) {
    throw Error("pot: initial quantile must be in (0,1)");
  }
  if (scores.empty()) throw Error("pot: no scores");
  TailModel tail;
  tail.risk_q = risk_q;
  tail.sample_count = scores.size();
  tail.threshold_u = empirical_quantile(scores, initial_quantile);
  std::vector<double> excess;
  for (double s : scores) {
    if (s > tail.threshold_u) excess.push_back(s - tail.threshold_u);
  }
  tail.exceedance_count = excess.size();
  if (excess.size() < TailModel::kMinExceedances) {
    throw Error("pot: only " + std::to_string(excess.size()) +
                " exceedances above the initial threshold; need at least " +
                std::to_string(TailModel::kMinExceedances) +
                " (use a larger calibration set)");
  }
  GpdEstimate est = fit_gpd_mle(excess);
  tail.maximum_likelihood = est.ok && std::isfinite(est.xi) && std::isfinite(est.sigma);
  if (!tail.maximum_likelihood) est = fit_gpd_moments(excess);
  tail.shape_xi = est.xi;
  tail.scale_sigma = est.sigma;
  tail.final_threshold = pot_threshold(tail, risk_q);
  return tail;
}

}  // namespace enova::stats
