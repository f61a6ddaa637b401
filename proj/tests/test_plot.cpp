#include <gtest/gtest.h>

#include <cmath>

#include "enova/plot.hpp"
#include "test_util.hpp"

using namespace enova;

namespace {

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST(Svg, StableAndEscaped) {
  Chart c{"a < b & c", "x", "y", {{"line", {0, 1, 2}, {1, 4, 9}, false}, {"dots", {0, 2}, {3, 3}, true}}, false};
  const auto a = render_svg({c, c});
  EXPECT_EQ(a, render_svg({c, c}));
  EXPECT_NE(a.find("a &lt; b &amp; c"), std::string::npos);
  EXPECT_EQ(a.find("a < b"), std::string::npos);
  EXPECT_EQ(count(a, "<polyline"), 2u);
  EXPECT_EQ(count(a, "<circle"), 4u);
  EXPECT_NE(a.find("height=\"520\""), std::string::npos);
  EXPECT_EQ(a.rfind("</svg>\n"), a.size() - 7);
}

TEST(Svg, DegenerateAndLogRanges) {
  Chart flat{"flat", "x", "y", {{"s", {1, 1}, {5, 5}, false}}, false};
  const auto svg = render_svg({flat});
  EXPECT_EQ(svg.find("nan"), std::string::npos);
  EXPECT_EQ(svg.find("inf"), std::string::npos);
  Chart log{"log", "x", "y", {{"s", {1, 2, 3}, {0.001, 1, 1000}, false}}, true};
  const auto l = render_svg({log});
  EXPECT_NE(l.find(">1000<"), std::string::npos);
  EXPECT_NE(l.find(">0.001<"), std::string::npos);
  EXPECT_NO_THROW(render_svg({}));
}

TEST(Csv, RoundTripNumbersAndWidthCheck) {
  const auto csv = to_csv({"a", "b"}, {{1.0, 0.1}, {2.5, 1e-9}});
  EXPECT_EQ(csv, "a,b\n1,0.1\n2.5,1e-09\n");
  EXPECT_THROW(to_csv({"a", "b"}, {{1.0}}), Error);
}

TEST(TraceCharts, ThreePanels) {
  std::vector<MetricSample> t = {{0, 1, 2, 3, 4, 5, 0.5, 0.6}, {1, 2, 3, 4, 5, 6, 0.6, 0.7}};
  const auto charts = trace_charts(t, "run");
  ASSERT_EQ(charts.size(), 3u);
  EXPECT_EQ(charts[0].series[1].y, (std::vector<double>{4, 5}));
  EXPECT_EQ(charts[2].series[0].y, (std::vector<double>{0.5, 0.6}));
  EXPECT_EQ(charts[1].series[0].x, (std::vector<double>{0, 1}));
}

TEST(Pca, RecoversPrincipalAxes) {
  // Factorial grid: the two coordinates are exactly uncorrelated and centered.
  const std::vector<double> axis1 = {0.6, 0.8, 0.0}, axis2 = {0.0, 0.0, 1.0};
  std::vector<EmbeddingVector> v;
  std::vector<double> a, b;
  for (double p : {-10.0, -5.0, 5.0, 10.0}) {
    for (double q : {-1.0, 1.0}) {
      a.push_back(p);
      b.push_back(q);
      v.push_back({p * axis1[0] + q * axis2[0] + 3, p * axis1[1] + q * axis2[1] - 1,
                   p * axis1[2] + q * axis2[2]});
    }
  }
  const auto xy = pca_2d(v);
  for (std::size_t i = 0; i < v.size(); ++i) {
    // Largest loading positive: 0.8 on y for axis 1, 1.0 on z for axis 2.
    EXPECT_NEAR(xy[i][0], a[i], 1e-9);
    EXPECT_NEAR(xy[i][1], b[i], 1e-9);
  }
  EXPECT_TRUE(pca_2d({}).empty());
  EXPECT_THROW(pca_2d({{1.0, 2.0}, {1.0}}), Error);
}
