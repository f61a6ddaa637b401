#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "enova/core.hpp"
#include "enova/trace_io.hpp"
#include "test_util.hpp"

using namespace enova;
using enova::testing::random_sample;

namespace {

std::vector<MetricSample> random_trace(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> gap(1e-3, 3.0);
  std::vector<MetricSample> out;
  double ts = gap(rng);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(random_sample(rng, ts));
    ts += gap(rng);
  }
  return out;
}

std::string serialize(const std::vector<MetricSample>& t) {
  std::ostringstream out;
  write_trace(t, out);
  return out.str();
}

}  // namespace

TEST(Trace, EmptySequenceIsEmptyFile) {
  EXPECT_EQ(serialize({}), "");
  std::istringstream in("");
  EXPECT_TRUE(read_trace(in).empty());
}

TEST(Trace, SingleSampleRoundTrips) {
  MetricSample s{1.5, 2.0, 3.0, 4.25, 0.0, 1.125, 0.5, 0.75};
  const std::string text = serialize({s});
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);  // header + one record
  std::istringstream in(text);
  const auto back = read_trace(in);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0], s);
}

TEST(Trace, RoundTripIsLosslessForArbitraryValues) {
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    const auto t = random_trace(seed, 200);
    std::istringstream in(serialize(t));
    EXPECT_EQ(read_trace(in), t) << "seed " << seed;
  }
}

TEST(Trace, SerializationIsByteStable) {
  const auto t = random_trace(99, 600);
  const auto a = serialize(t), b = serialize(t);
  EXPECT_EQ(a, b);
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 601);
}

TEST(Trace, FileRoundTrip) {
  const auto dir = enova::testing::scratch_dir("core-file");
  const auto t = random_trace(5, 50);
  write_trace(t, dir / "t.csv");
  EXPECT_EQ(read_trace(dir / "t.csv"), t);
}

TEST(Trace, OutOfRangeUtilizationNamesTheLine) {
  std::istringstream in(std::string(kTraceHeader) + "\n0,1,1,1,0,1,0.5,0.5\n1,1,1,1,0,1,1.3,0.5\n");
  try {
    read_trace(in);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("m_u"), std::string::npos);
  }
}

TEST(Trace, ShuffledTimestampsAreRejected) {
  std::istringstream in(std::string(kTraceHeader) + "\n2,1,1,1,0,1,0.5,0.5\n1,1,1,1,0,1,0.5,0.5\n");
  EXPECT_THROW(read_trace(in), ParseError);
}

TEST(Trace, MalformedLinesAreRejected) {
  std::istringstream missing(std::string(kTraceHeader) + "\n0,1,1,1\n");
  EXPECT_THROW(read_trace(missing), ParseError);
  std::istringstream junk(std::string(kTraceHeader) + "\n0,1,x,1,0,1,0.5,0.5\n");
  EXPECT_THROW(read_trace(junk), ParseError);
  std::istringstream header("ts,n_f\n");
  EXPECT_THROW(read_trace(header), ParseError);
}

TEST(Trace, AcceptedSamplesSatisfyInvariants) {
  for (const auto& s : random_trace(3, 300)) EXPECT_NO_THROW(validate(s));
  MetricSample bad;
  bad.n_p = -1;
  EXPECT_THROW(validate(bad), Error);
  bad = {};
  bad.g_u = 1.01;
  EXPECT_THROW(validate(bad), Error);
}

TEST(Trace, LabeledRoundTrip) {
  LabeledTrace lt;
  lt.samples = random_trace(8, 20);
  for (std::size_t i = 0; i < 20; ++i) lt.labels.push_back(i % 3 ? 1 : -1);
  std::ostringstream out;
  write_labeled_trace(lt, out);
  std::istringstream in(out.str());
  const auto back = read_labeled_trace(in);
  EXPECT_EQ(back.samples, lt.samples);
  EXPECT_EQ(back.labels, lt.labels);
}

TEST(Requests, RoundTrip) {
  std::vector<RequestRecord> rs(3);
  rs[0] = {1, 0.5, "solve x", 10, 20, 2, 0.75, 3.5};
  rs[1] = {2, 0.75, "", 4, 8, std::nullopt, std::nullopt, std::nullopt};
  rs[2] = {3, 1.0, "quote \" and \\ slash", 1, 1, 0, 1.0, 1.0};
  std::ostringstream out;
  write_requests(rs, out);
  std::istringstream in(out.str());
  EXPECT_EQ(read_requests(in), rs);
}

TEST(Requests, InvariantsAreChecked) {
  RequestRecord r;
  r.input_length = 0;
  EXPECT_THROW(validate(r), Error);
  r = {};
  r.arrival_time = 2.0;
  r.start_time = 1.0;
  EXPECT_THROW(validate(r), Error);
}

TEST(Window, ReturnsTrailingSamples) {
  const auto t = random_trace(1, 10);
  const auto one = window(t, 1, 4);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0], t[4]);
  const auto all = window(t, 10, 9);
  EXPECT_EQ(all.samples(), t);
  EXPECT_EQ(window(t, 3, 7), window(t, 3, 7));
}

TEST(Window, InsufficientHistory) {
  const auto t = random_trace(1, 3);
  EXPECT_THROW(window(t, 5, 2), Error);
  EXPECT_THROW(window(t, 1, 3), Error);
}

TEST(ServiceConfig, JsonRoundTripAndLookup) {
  ServiceConfig c;
  c.deployments["A100"] = {2, 72e9, 48, 3, 1.0};
  c.deployments["4090"] = {1, 22.8e9, 32, 1, 0.89};
  c.max_tokens = {{0, 512}, {3, 1024}};
  c.default_max_tokens = 777;
  EXPECT_EQ(service_config_from_json(service_config_to_json(c)), c);
  EXPECT_EQ(c.max_tokens_for(3), 1024);
  EXPECT_EQ(c.max_tokens_for(9), 777);
  EXPECT_EQ(c.max_tokens_for(std::nullopt), 777);
  EXPECT_EQ(c.total_replicas(), 4);
}

TEST(Numbers, ShortestRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, 0.0}) {
    EXPECT_EQ(parse_number(format_number(v)), v);
  }
  EXPECT_EQ(format_number(0.5), "0.5");
  EXPECT_THROW(parse_number("1.0x"), Error);
}
