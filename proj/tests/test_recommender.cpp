#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include "enova/recommender.hpp"
#include "enova/simulator.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace enova;

namespace {

// One A100 replica, processor sharing at 1200 tok/s, mean output 200 tokens:
// the true service capacity is 6 req/s at any batch size.
constexpr double kTrueLimit = 6.0;

struct Bench {
  std::vector<GpuDeviceSpec> gpus{{"A100", 80e9, 4, 1200.0, 0.0}};
  ModelProfile profile{14e9, 2.0, 524288.0, 1e9};
  ServiceConfig config;
  WorkloadSpec workload;
  SimOptions options;

  Bench(int max_num_seqs, double rate, std::uint64_t seed) {
    config.deployments["A100"] = {1, 72e9, max_num_seqs, 1, 1.0};
    config.default_max_tokens = 512;
    workload.arrival_rate = rate;
    workload.input_length_dist = LengthDist::fixed(100);
    workload.output_length_dist = LengthDist::uniform(100, 300);
    workload.duration = 900;
    workload.rng_seed = seed;
    options.seed = seed;
  }

  MetricWindow window() const {
    return MetricWindow(run(workload, config, gpus, profile, options).trace);
  }
};

}  // namespace

TEST(Capacity, RecoversLimitOnSaturatedTraces) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Bench s(24, 6.5, seed);
    const auto cap = estimate_capacity(s.window());
    EXPECT_TRUE(cap.saturated) << "seed " << seed;
    EXPECT_NEAR(cap.n_limit, kTrueLimit, 0.1 * kTrueLimit) << "seed " << seed;
    const int mns = determine_max_num_seqs(cap);
    EXPECT_NEAR(mns, cap.n_limit * cap.t_r_limit, 0.25 * cap.n_limit * cap.t_r_limit + 1);
    // Little's law at saturation: 24 running at 6 req/s take 4 s each.
    EXPECT_NEAR(mns, 24.0, 0.25 * 24.0) << "seed " << seed;
  }
}

TEST(Capacity, UnsaturatedTraceIsFlagged) {
  Bench s(64, 3.0, 4);
  const auto cap = estimate_capacity(s.window());
  EXPECT_FALSE(cap.saturated);
  EXPECT_LT(cap.n_limit, kTrueLimit);
  EXPECT_NEAR(cap.n_limit, 3.0, 1.0);
}

TEST(Capacity, RejectsShortOrFlatWindows) {
  std::vector<MetricSample> flat;
  for (int i = 0; i < 100; ++i) flat.push_back({static_cast<double>(i), 1, 5, 1, 0, 5, 0.5, 0.5});
  EXPECT_THROW(estimate_capacity(MetricWindow(flat)), Error);
  flat.resize(10);
  EXPECT_THROW(estimate_capacity(MetricWindow(flat)), Error);
}

TEST(Memory, RecoversSlopeAndAllocation) {
  // Reserved KV makes memory exactly linear in n_r; the reported value gets
  // sigma = 0.01 noise on top.
  Bench s(64, 4.0, 12);
  s.options.kv_accounting = KvAccounting::kReserved;
  s.options.memory_noise_sigma = 0.01;
  s.workload.duration = 1800;
  s.workload.phases = {{0, 2.0}, {600, 4.0}, {1200, 5.5}};
  const auto& dev = s.gpus.front();
  const double seq = 100 + s.config.default_max_tokens;
  const double a = seq * s.profile.token_mem / dev.memory_total;
  const double b = s.profile.static_bytes() / dev.memory_total;

  const auto model = fit_memory_model(s.window());
  EXPECT_NEAR(model.slope, a, 0.05 * a);
  EXPECT_NEAR(model.intercept, b, 0.02);

  const int mns = 40;
  const auto plan = determine_gpu_memory(model, mns, dev);
  const double analytic = kv_memory(s.profile, mns, seq).bytes;
  EXPECT_NEAR(plan.gpu_memory, analytic, 0.05 * analytic);
  EXPECT_EQ(plan.parallel_size, 1);
}

TEST(Memory, PlanClampsAndSplitsAcrossDevices) {
  MemoryModel m;
  m.slope = 0.02;
  m.intercept = 0.3;
  const GpuDeviceSpec dev{"X", 24e9, 4, 1000, 0};
  const auto small = determine_gpu_memory(m, 10, dev);
  EXPECT_NEAR(small.fraction, 0.5, 1e-12);
  EXPECT_NEAR(small.gpu_memory, 12e9, 1);
  const auto big = determine_gpu_memory(m, 100, dev);
  EXPECT_NEAR(big.fraction, 2.3, 1e-12);
  EXPECT_NEAR(big.gpu_memory, 0.95 * 24e9, 1);
  EXPECT_EQ(big.parallel_size, 3);
  EXPECT_THROW(determine_gpu_memory(m, 10, dev, 0.0), Error);
}

TEST(MaxTokens, PerCommunityWithFallback) {
  CommunityModel cm;
  Community big{0, {}, {1.0}, {}, std::nullopt};
  for (int i = 0; i < 50; ++i) big.output_lengths.push_back(300 + i);
  Community small{1, {}, {0.0}, {900, 910, 920}, std::nullopt};
  cm.communities = {big, small};
  const auto r = determine_max_tokens(cm);
  std::vector<double> all = big.output_lengths;
  all.insert(all.end(), small.output_lengths.begin(), small.output_lengths.end());
  const int global = static_cast<int>(std::ceil(stats::kde_quantile(stats::kde_fit(all), 0.99)));
  const int own =
      static_cast<int>(std::ceil(stats::kde_quantile(stats::kde_fit(big.output_lengths), 0.99)));
  EXPECT_EQ(r.global, global);
  EXPECT_EQ(r.max_tokens.at(0), own);
  EXPECT_EQ(r.max_tokens.at(1), global);
  EXPECT_EQ(r.fallback, (std::vector<CommunityId>{1}));
  EXPECT_EQ(determine_max_tokens(CommunityModel{}).global, 0);
}

TEST(Placement, MatchesExhaustiveSearch) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> count(0, 10), types(1, 3), ps(1, 2);
  int feasible = 0;
  for (int trial = 0; trial < 200; ++trial) {
    PlacementProblem p;
    const int k = types(rng);
    double max_cap = 0.0;
    for (int i = 0; i < k; ++i) {
      PlacementOption o;
      o.gpu_type = "T" + std::to_string(i);
      o.score = 0.05 + u(rng);
      o.n_limit = 0.5 + 10 * u(rng);
      o.parallel_size = ps(rng);
      o.device_count = count(rng);
      max_cap += o.n_limit * (o.device_count / o.parallel_size);
      p.options.push_back(o);
    }
    p.demand = (0.1 + 1.1 * u(rng)) * std::max(max_cap, 1.0);
    const auto best = oracle::placement(p);
    if (!best) {
      try {
        solve_placement(p);
        ADD_FAILURE() << "trial " << trial << " should be infeasible";
      } catch (const InfeasibleError& e) {
        EXPECT_NEAR(e.max_capacity(), max_cap, 1e-9);
      }
      continue;
    }
    ++feasible;
    const auto plan = solve_placement(p);
    EXPECT_NEAR(plan.objective, *best, 1e-9) << "trial " << trial;
    EXPECT_GE(plan.capacity, p.demand - 1e-9);
  }
  EXPECT_GT(feasible, 100);
}

TEST(Placement, WeightsAreCapacityRatios) {
  PlacementProblem p;
  p.options = {{"A100", 0.2, 10.0, 1, 1}, {"4090", 0.1, 8.9, 1, 1}};
  p.demand = 15.0;
  const auto plan = solve_placement(p);
  EXPECT_EQ(plan.replicas.at("A100"), 1);
  EXPECT_EQ(plan.replicas.at("4090"), 1);
  EXPECT_DOUBLE_EQ(plan.weights.at("A100"), 1.0);
  EXPECT_NEAR(plan.weights.at("4090"), 0.89, 1e-12);
  EXPECT_NEAR(plan.objective, 0.3, 1e-12);
}

TEST(Recommend, TwoGpuScenarioIsFeasible) {
  auto sc = enova::testing::bundled("two-gpu");
  RecommendInputs in;
  in.devices = sc.gpus;
  in.profile = sc.profile;
  in.max_input_tokens = sc.workload.max_input_length();
  in.default_max_tokens = sc.config.default_max_tokens;
  in.demand = 14.0;
  for (const auto& g : sc.gpus) {
    // One replica per type under more load than it can take.
    ServiceConfig single;
    single.default_max_tokens = sc.config.default_max_tokens;
    single.deployments[g.gpu_type_id] = sc.config.deployments.at(g.gpu_type_id);
    single.deployments[g.gpu_type_id].replicas = 1;
    auto w = sc.workload;
    w.arrival_rate = 9.0;
    in.windows[g.gpu_type_id] = MetricWindow(run(w, single, sc.gpus, sc.profile, sc.options).trace);
  }
  const auto rec = recommend(in);
  EXPECT_NO_THROW(check_feasible(rec.config, sc.gpus, sc.profile, in.max_input_tokens));
  EXPECT_GE(rec.placement.capacity, 14.0);
  EXPECT_DOUBLE_EQ(rec.demand, 14.0);
  double top = 0.0;
  for (const auto& [type, w] : rec.placement.weights) top = std::max(top, w);
  EXPECT_DOUBLE_EQ(top, 1.0);
  for (const auto& [type, t] : rec.per_type) {
    EXPECT_TRUE(t.skipped.empty()) << type << ": " << t.skipped;
    EXPECT_GT(t.capacity.n_limit, 0.0);
    EXPECT_LE(t.plan.gpu_memory, 0.95 * 80e9 + 1);
  }
}

TEST(Recommend, NoDevicesIsInfeasible) {
  Bench s(24, 6.5, 1);
  RecommendInputs in;
  in.devices = s.gpus;
  in.devices.front().device_count = 0;
  in.profile = s.profile;
  in.max_input_tokens = 100;
  in.demand = 5.0;
  in.windows["A100"] = s.window();
  EXPECT_THROW(recommend(in), InfeasibleError);
}

TEST(Recommend, DemandFromArrivals) {
  std::vector<MetricSample> t;
  for (int i = 0; i < 600; ++i) t.push_back({static_cast<double>(i), 4, 10, 4.0 + (i % 2), 0, 2, 0.5, 0.5});
  EXPECT_NEAR(estimate_demand(MetricWindow(t)), 4.5, 0.05);
}
