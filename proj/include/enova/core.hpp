#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace enova {

// Base error for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A configuration cannot be deployed or no plan satisfies the constraints.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, double max_capacity = 0.0)
      : Error(what), max_capacity_(max_capacity) {}
  double max_capacity() const { return max_capacity_; }

 private:
  double max_capacity_;
};

inline constexpr std::size_t kMetricDims = 7;

// One tick of monitoring data. Per-unit-time quantities use 1 s as the unit.
struct MetricSample {
  double ts = 0.0;   // seconds since trace start
  double n_f = 0.0;  // finished requests per second
  double n_r = 0.0;  // running requests
  double n_a = 0.0;  // arriving requests per second
  double n_p = 0.0;  // pending requests
  double t_r = 0.0;  // mean execution time per finished request, s
  double m_u = 0.0;  // GPU memory utilization, 0..1
  double g_u = 0.0;  // GPU compute utilization, 0..1

  bool operator==(const MetricSample&) const = default;
};

// Throws Error describing the first violated invariant.
void validate(const MetricSample& s);

// (n_f, n_r, n_a, n_p, t_r, m_u, g_u); every component grows with load.
std::array<double, kMetricDims> metric_vector(const MetricSample& s);

// The last w samples of a trace ending at some index.
class MetricWindow {
 public:
  MetricWindow() = default;
  explicit MetricWindow(std::vector<MetricSample> samples);

  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const std::vector<MetricSample>& samples() const { return samples_; }
  const MetricSample& operator[](std::size_t i) const { return samples_[i]; }
  const MetricSample& back() const { return samples_.back(); }

  std::vector<double> column(double MetricSample::*field) const;

  bool operator==(const MetricWindow&) const = default;

 private:
  std::vector<MetricSample> samples_;
};

// Returns samples [end_index - w + 1, end_index]. Throws Error on
// insufficient history or an out-of-range end index.
MetricWindow window(std::span<const MetricSample> samples, std::size_t w,
                    std::size_t end_index);

inline constexpr std::size_t kDefaultWindowLength = 900;

using GpuTypeId = std::string;
using CommunityId = int;

struct GpuDeviceSpec {
  GpuTypeId gpu_type_id;
  double memory_total = 0.0;  // bytes
  int device_count = 0;
  // Asymptotic decode throughput of one device, tokens/s.
  double tokens_per_second_capacity = 0.0;
  // Fixed cost of one decode iteration, s. Zero means pure processor sharing.
  double batch_overhead_s = 0.0;
};

struct ModelProfile {
  double params_bytes = 0.0;
  double dtype_bytes = 2.0;
  double token_mem = 0.0;  // KV bytes per token
  double overhead_others = 0.0;

  // params_bytes + overhead_others: memory held regardless of load.
  double static_bytes() const { return params_bytes + overhead_others; }
};

// Per-GPU-type slice of a service configuration.
struct DeploymentConfig {
  int parallel_size = 1;
  double gpu_memory = 0.0;  // bytes allocated on each device of a replica
  int max_num_seqs = 1;
  int replicas = 0;
  double weight = 1.0;

  bool operator==(const DeploymentConfig&) const = default;
};

struct ServiceConfig {
  std::map<GpuTypeId, DeploymentConfig> deployments;
  std::map<CommunityId, int> max_tokens;
  int default_max_tokens = 2048;

  int max_tokens_for(std::optional<CommunityId> community) const;
  int total_replicas() const;

  bool operator==(const ServiceConfig&) const = default;
};

struct RequestRecord {
  std::uint64_t request_id = 0;
  double arrival_time = 0.0;
  std::string prompt_text;
  int input_length = 1;
  int output_length_target = 1;
  std::optional<CommunityId> community_id;
  std::optional<double> start_time;
  std::optional<double> finish_time;

  bool operator==(const RequestRecord&) const = default;
};

void validate(const RequestRecord& r);

}  // namespace enova
