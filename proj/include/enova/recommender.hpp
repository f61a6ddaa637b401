#pragma once

// Service-configuration recommendation: capacity from the n_f ~ n_r
// relationship, max_num_seqs by Little's law, gpu_memory from a linear memory
// model, max_tokens per request community, and replica placement across GPU
// types.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "enova/core.hpp"
#include "enova/stats.hpp"
#include "enova/taskcluster.hpp"

namespace enova {

struct CapacityOptions {
  double alpha = stats::kDefaultAlpha;
  double quantile = 0.99;
  std::size_t block_size = 60;
  // Trailing-mean width applied to the per-second rates before fitting. One
  // second of departures is too noisy to read a rate limit from.
  std::size_t smoothing = 60;
  std::size_t min_samples = 30;
};

struct CapacityEstimate {
  double n_limit = 0.0;    // req/s
  double t_r_limit = 0.0;  // s
  bool saturated = false;
  double quantile = 0.99;
  stats::OlsFit fit;  // n_f on n_r
};

// Throws Error when the window is too short or n_r does not vary.
CapacityEstimate estimate_capacity(const MetricWindow& window, const CapacityOptions& options = {});

// ceil(n_limit * t_r_limit), at least 1.
int determine_max_num_seqs(const CapacityEstimate& cap);

struct MemoryModel {
  double slope = 0.0;      // utilization per running request
  double intercept = 0.0;  // utilization with nothing running
  stats::OlsFit fit;

  double predict(double n_r) const { return intercept + slope * n_r; }
};

inline constexpr double kDefaultSafetyCap = 0.95;

// OLS of m_u on n_r. Throws Error on a negative slope or no n_r variation.
MemoryModel fit_memory_model(const MetricWindow& window);

struct MemoryPlan {
  double fraction = 0.0;    // required memory as a fraction of one device, unclamped
  double gpu_memory = 0.0;  // bytes per device, at most memory_total * safety_cap
  int parallel_size = 1;
};

MemoryPlan determine_gpu_memory(const MemoryModel& model, int max_num_seqs,
                                const GpuDeviceSpec& device,
                                double safety_cap = kDefaultSafetyCap);

struct MaxTokensResult {
  std::map<CommunityId, int> max_tokens;
  std::vector<CommunityId> fallback;  // communities that used the global quantile
  int global = 0;                     // quantile over every observed length; 0 if none
};

inline constexpr double kDefaultCoverage = 0.99;
inline constexpr std::size_t kMinCommunityLengths = 20;

// ceil(KDE quantile) of each community's output lengths; communities with
// fewer than 20 observations fall back to the quantile over all lengths.
MaxTokensResult determine_max_tokens(const CommunityModel& communities,
                                     double coverage_q = kDefaultCoverage);

struct PlacementOption {
  GpuTypeId gpu_type;
  double score = 0.0;
  double n_limit = 0.0;
  int parallel_size = 1;
  int device_count = 0;
};

struct PlacementProblem {
  std::vector<PlacementOption> options;
  double demand = 0.0;  // req/s to cover
};

struct PlacementPlan {
  std::map<GpuTypeId, int> replicas;
  std::map<GpuTypeId, double> weights;  // deployed types only, max 1
  double objective = 0.0;
  double capacity = 0.0;
};

// min sum score_i * r_i  s.t.  sum n_limit_i * r_i >= demand,
// parallel_size_i * r_i <= N_i, r_i integer >= 0. Exact branch and bound.
// Throws InfeasibleError carrying the largest achievable capacity.
PlacementPlan solve_placement(const PlacementProblem& problem);

// Metric-window demand: the 0.95 KDE quantile of the smoothed arrival rate.
double estimate_demand(const MetricWindow& window, double quantile = 0.95,
                       std::size_t smoothing = 60);

struct RecommendInputs {
  // One replica's trace per GPU type.
  std::map<GpuTypeId, MetricWindow> windows;
  std::vector<GpuDeviceSpec> devices;
  ModelProfile profile;
  std::optional<CommunityModel> communities;
  // Largest prompt the configuration must fit; also bounds max_tokens.
  int max_input_tokens = 0;
  // Offered load in req/s. When absent, the sum of per-type estimate_demand.
  std::optional<double> demand;
  int default_max_tokens = 2048;
  CapacityOptions capacity;
  double coverage_q = kDefaultCoverage;
  double safety_cap = kDefaultSafetyCap;
};

struct TypeRecommendation {
  CapacityEstimate capacity;
  int max_num_seqs = 1;
  MemoryModel memory;
  MemoryPlan plan;
  double score = 0.0;
  std::string skipped;  // reason when the type cannot host the model
};

struct Recommendation {
  ServiceConfig config;
  std::map<GpuTypeId, TypeRecommendation> per_type;
  PlacementPlan placement;
  double demand = 0.0;
  MaxTokensResult max_tokens;
  std::vector<std::string> warnings;
};

// Errors carry the GPU type they arose from.
Recommendation recommend(const RecommendInputs& inputs);

}  // namespace enova
