#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "enova/core.hpp"
#include "enova/stats.hpp"

using namespace enova;
using namespace enova::stats;

namespace {

const std::vector<double> kX = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};

// Reference values below come from statsmodels / numpy / scipy on the same data.

std::vector<double> gpd_sample(double xi, double sigma, int n) {
  std::vector<double> out;
  for (int i = 1; i <= n; ++i) {
    const double p = (i - 0.5) / n;
    out.push_back(sigma / xi * (std::pow(1.0 - p, -xi) - 1.0));
  }
  return out;
}

}  // namespace

TEST(Ols, MatchesReferenceFit) {
  const std::vector<double> y = {2.1, 3.9, 6.2, 7.8, 10.1, 12.2, 13.8, 16.1, 18.0, 20.2};
  const auto f = ols_fit(kX, y);
  EXPECT_NEAR(f.slope, 2.00727272727, 1e-10);
  EXPECT_NEAR(f.intercept, 0.0, 1e-10);
  EXPECT_NEAR(f.slope_stderr, 0.01824232356762715, 1e-12);
  EXPECT_NEAR(f.t_statistic, 110.03382983705191, 1e-8);
  EXPECT_NEAR(f.p_value, 5.19966622907687e-14, 1e-17);
  EXPECT_NEAR(f.r_squared, 0.999339685760389, 1e-12);
  EXPECT_TRUE(f.significant());
  EXPECT_EQ(f.n, 10u);
}

TEST(Ols, InsignificantSlope) {
  const std::vector<double> y = {5.0, 3.1, 4.9, 6.2, 4.0, 5.5, 3.9, 4.4, 6.0, 4.8};
  const auto f = ols_fit(kX, y);
  EXPECT_NEAR(f.slope, 0.06424242424242455, 1e-12);
  EXPECT_NEAR(f.p_value, 0.5778425551180915, 1e-9);
  EXPECT_FALSE(f.significant());
}

TEST(Ols, ExactLineAndEdgeCases) {
  std::vector<double> y;
  for (double x : kX) y.push_back(3.0 - 0.5 * x);
  const auto f = ols_fit(kX, y);
  EXPECT_NEAR(f.slope, -0.5, 1e-12);
  EXPECT_NEAR(f.intercept, 3.0, 1e-12);
  EXPECT_EQ(f.p_value, 0.0);
  const std::vector<double> two_x = {0, 1}, two_y = {1, 3};
  EXPECT_EQ(ols_fit(two_x, two_y).p_value, 1.0);
  EXPECT_THROW(ols_fit(std::vector<double>{2, 2, 2}, std::vector<double>{1, 2, 3}), Error);
  EXPECT_THROW(ols_fit(std::vector<double>{1}, std::vector<double>{1}), Error);
  EXPECT_THROW(ols_fit(kX, std::vector<double>{1, 2}), Error);
}

TEST(Ols, RecoversSlopeUnderNoise) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> noise(0.0, 0.5);
  std::vector<double> x, y;
  for (int i = 0; i < 2000; ++i) {
    x.push_back(i * 0.01);
    y.push_back(1.5 * x.back() - 2.0 + noise(rng));
  }
  const auto f = ols_fit(x, y);
  EXPECT_NEAR(f.slope, 1.5, 4 * f.slope_stderr);
}

const std::vector<double> kSample = {0.3, 1.7, 2.2, 2.9, 3.1, 4.8, 5.0, 7.5, 9.9, 12.0};

TEST(Quantile, EmpiricalMatchesType7) {
  EXPECT_NEAR(empirical_quantile(kSample, 0.1), 1.56, 1e-12);
  EXPECT_NEAR(empirical_quantile(kSample, 0.25), 2.375, 1e-12);
  EXPECT_NEAR(empirical_quantile(kSample, 0.5), 3.95, 1e-12);
  EXPECT_NEAR(empirical_quantile(kSample, 0.9), 10.11, 1e-12);
  EXPECT_NEAR(empirical_quantile(kSample, 0.99), 11.811, 1e-12);
  EXPECT_EQ(empirical_quantile(kSample, 1.0), 12.0);
  EXPECT_EQ(empirical_quantile(kSample, 0.0), 0.3);
}

TEST(Kde, SilvermanBandwidthDensityAndQuantiles) {
  const auto k = kde_fit(kSample);
  EXPECT_NEAR(k.bandwidth(), 1.9069979441378975, 1e-12);
  EXPECT_NEAR(k.density(3.0), 0.11199365776036208, 1e-12);
  EXPECT_NEAR(kde_quantile(k, 0.5), 4.234571123421115, 1e-8);
  EXPECT_NEAR(kde_quantile(k, 0.95), 12.45711477168845, 1e-8);
  EXPECT_NEAR(kde_quantile(k, 0.99), 14.530129040353415, 1e-8);
}

TEST(Kde, CdfIsIntegralOfDensity) {
  const auto k = kde_fit(kSample);
  // Simpson's rule from far below the support.
  const double a = -20.0, b = 6.0;
  const int n = 4000;
  const double h = (b - a) / n;
  double acc = k.density(a) + k.density(b);
  for (int i = 1; i < n; ++i) acc += (i % 2 ? 4.0 : 2.0) * k.density(a + i * h);
  EXPECT_NEAR(acc * h / 3.0, k.cdf(b), 1e-9);
}

TEST(Kde, QuantileIsMonotoneAndDegenerateSamplesWork) {
  std::mt19937_64 rng(2);
  std::lognormal_distribution<double> d(0.0, 1.0);
  std::vector<double> s;
  for (int i = 0; i < 500; ++i) s.push_back(d(rng));
  const auto k = kde_fit(s);
  double prev = -1e300;
  for (double q = 0.01; q < 1.0; q += 0.01) {
    const double v = k.quantile(q);
    EXPECT_GE(v, prev);
    EXPECT_NEAR(k.cdf(v), q, 1e-9);
    prev = v;
  }
  const auto flat = kde_fit(std::vector<double>{4.0, 4.0, 4.0});
  EXPECT_EQ(flat.bandwidth(), KdeModel::kMinBandwidth);
  EXPECT_NEAR(flat.quantile(0.99), 4.0, 1e-5);
  EXPECT_THROW(kde_fit(std::vector<double>{}), Error);
  EXPECT_THROW(k.quantile(1.0), Error);
}

TEST(Pot, MatchesReferenceGpdFit) {
  struct Case {
    double xi, sigma, ref_u, ref_xi, ref_sigma, ref_z;
  };
  for (const Case c : {Case{0.2, 1.5, 1.1152441239297015, 0.1911436854127691, 1.734731853623794,
                            21.80865263506679},
                       Case{-0.3, 2.0, 1.2516542445711591, -0.31365262127241134,
                            1.644582792953942, 5.748414456307613}}) {
    const auto s = gpd_sample(c.xi, c.sigma, 400);
    const auto tail = fit_tail_pot(s, 0.5, 1e-3);
    EXPECT_NEAR(tail.threshold_u, c.ref_u, 1e-12);
    EXPECT_EQ(tail.exceedance_count, 200u);
    EXPECT_TRUE(tail.maximum_likelihood);
    EXPECT_NEAR(tail.shape_xi, c.ref_xi, 1e-4);
    EXPECT_NEAR(tail.scale_sigma, c.ref_sigma, 1e-4);
    EXPECT_NEAR(tail.final_threshold, c.ref_z, 1e-3 * c.ref_z);
  }
}

TEST(Pot, ExponentialScoresGiveLogInverseRisk) {
  std::mt19937_64 rng(1);
  std::exponential_distribution<double> e(1.0);
  std::vector<double> s;
  for (int i = 0; i < 100000; ++i) s.push_back(e(rng));
  const auto tail = fit_tail_pot(s, 0.98, 1e-3);
  EXPECT_NEAR(tail.final_threshold, std::log(1000.0), 0.1 * std::log(1000.0));
  EXPECT_NEAR(tail.shape_xi, 0.0, 0.1);
  EXPECT_GE(pot_threshold(tail, 1e-4), tail.final_threshold);
}

TEST(Pot, TooFewExceedances) {
  const std::vector<double> s = {1, 2, 3, 4, 5};
  EXPECT_THROW(fit_tail_pot(s, 0.98, 1e-3), Error);
}

TEST(BlockMaxima, KeepsPartialBlock) {
  const std::vector<double> v = {1, 5, 2, 7, 3, 0, 9};
  EXPECT_EQ(block_maxima(v, 3), (std::vector<double>{5, 7, 9}));
  EXPECT_EQ(block_maxima(v, 1), v);
  EXPECT_THROW(block_maxima(v, 0), Error);
}

TEST(TrailingMean, ClipsAtStart) {
  const std::vector<double> v = {2, 4, 6, 8};
  EXPECT_EQ(trailing_mean(v, 2), (std::vector<double>{2, 3, 5, 7}));
  EXPECT_EQ(trailing_mean(v, 10), (std::vector<double>{2, 3, 4, 5}));
  EXPECT_EQ(trailing_mean(v, 1), v);
  EXPECT_DOUBLE_EQ(mean(v), 5.0);
  EXPECT_DOUBLE_EQ(variance(v), 20.0 / 3.0);
}
