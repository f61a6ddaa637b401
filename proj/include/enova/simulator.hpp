#pragma once

// Discrete-event simulation of LLM serving replicas with continuous batching.
//
// Service model: a replica with b running requests executes decode
// iterations of length batch_overhead_s + b / C, where C is the replica's
// token capacity (device capacity x parallel_size). Each running request
// gains one token per iteration, so every request advances at
// 1 / (batch_overhead_s + b / C) tokens/s. With batch_overhead_s == 0 this is
// processor sharing of C among the running set.
//
// KV memory follows the model-memory decomposition
//   params + max_num_seqs * seq_length * token_mem + others
// where the replica's KV budget is the allocated pool minus params and others.

#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "enova/core.hpp"
#include "enova/workload.hpp"

namespace enova {

struct KvMemory {
  double bytes = 0.0;
  bool saturated = false;  // true when the result was clamped on overflow
};

// params + max_num_seqs * seq_length * token_mem + others.
KvMemory kv_memory(const ModelProfile& profile, double max_num_seqs, double seq_length);

enum class AdmissionPolicy {
  // Admit only if the reservation (input + max_tokens) of every running
  // request plus the candidate fits the KV budget.
  kConservative,
  // Admit on current usage; decode may exhaust the budget, in which case the
  // most recently admitted request is swapped back to the pending queue.
  kOptimistic,
};

enum class KvAccounting {
  kIncremental,  // KV bytes grow per generated token
  kReserved,     // KV bytes reserved for input + max_tokens at admission
};

struct SimOptions {
  double tick = 1.0;
  double restart_delay = 60.0;
  AdmissionPolicy admission = AdmissionPolicy::kConservative;
  KvAccounting kv_accounting = KvAccounting::kIncremental;
  double memory_noise_sigma = 0.0;  // additive noise on reported m_u
  std::uint64_t seed = 1;           // router and metric-noise stream
};

// Throws InfeasibleError when a configuration cannot be deployed: unknown GPU
// type, more devices than available, allocation above the device memory, or
// a KV budget that cannot hold one request of max_input_tokens plus the
// largest configured max_tokens.
void check_feasible(const ServiceConfig& config, std::span<const GpuDeviceSpec> gpus,
                    const ModelProfile& profile, int max_input_tokens);

struct ReplicaView {
  int id = 0;
  GpuTypeId gpu_type;
  DeploymentConfig deployment;
  std::size_t running = 0;
  std::size_t pending = 0;
  double kv_bytes_used = 0.0;
  double kv_budget = 0.0;
  bool restarting = false;
  bool draining = false;
};

struct SimResult {
  std::vector<MetricSample> trace;                         // aggregated
  std::map<int, std::vector<MetricSample>> replica_traces;  // by replica id
  std::vector<RequestRecord> completed;
  double throughput = 0.0;  // output tokens per GPU per second
  double latency = 0.0;     // mean (finish - arrival) / output tokens, s/token
  std::uint64_t arrived = 0;
  std::uint64_t pending_at_end = 0;
  std::uint64_t running_at_end = 0;
  double output_tokens = 0.0;
  double device_seconds = 0.0;
};

class Simulation {
 public:
  using Classifier = std::function<std::optional<CommunityId>(const RequestRecord&)>;

  Simulation(std::vector<GpuDeviceSpec> gpus, ModelProfile profile, ServiceConfig config,
             std::vector<RequestRecord> workload, SimOptions options = {});

  struct TickOutput {
    MetricSample aggregate;
    std::map<int, MetricSample> per_replica;
  };

  // Advances the clock by dt and returns the samples for [now, now + dt).
  TickOutput step(double dt);
  TickOutput step() { return step(options_.tick); }

  // Reconfigures the deployment. Replicas whose per-type deployment changed
  // restart for restart_delay and requeue their running requests; new
  // replicas boot for restart_delay; surplus replicas drain. Identical
  // configs are a no-op. Returns true when anything changed.
  bool apply_config(const ServiceConfig& config, double restart_delay);
  bool apply_config(const ServiceConfig& config) {
    return apply_config(config, options_.restart_delay);
  }

  // Overrides community assignment at arrival (default keeps the record's id).
  void set_classifier(Classifier classifier) { classifier_ = std::move(classifier); }

  double now() const { return now_; }
  const ServiceConfig& config() const { return config_; }
  const std::vector<GpuDeviceSpec>& gpus() const { return gpus_; }
  const ModelProfile& profile() const { return profile_; }
  const SimOptions& options() const { return options_; }
  int max_input_tokens() const { return max_input_tokens_; }

  std::vector<ReplicaView> replicas() const;
  bool any_restarting() const;
  int active_replicas() const;  // not draining

  std::uint64_t arrived() const { return arrived_; }
  std::uint64_t completed() const { return completed_.size(); }
  std::uint64_t pending() const;
  std::uint64_t running() const;

  const std::vector<MetricSample>& trace() const { return trace_; }
  SimResult result() const;

 private:
  struct Active {
    std::size_t index;    // into requests_
    double base;          // virtual clock value when generation would have been at 0
    int target;           // output tokens to generate
    double reservation;   // bytes reserved under conservative admission
    std::uint64_t order;  // admission order
  };
  struct Waiting {
    std::size_t index;
    double generated;  // tokens kept across a swap
  };
  struct Replica {
    int id = 0;
    GpuTypeId gpu_type;
    DeploymentConfig deployment;
    double capacity = 0.0;  // tokens/s with a large batch
    double overhead = 0.0;  // s per iteration
    double memory_total = 0.0;
    double kv_budget = 0.0;
    std::vector<Active> running;
    std::deque<Waiting> pending;
    double clock = 0.0;  // virtual per-request token clock
    double input_tokens = 0.0;
    double base_sum = 0.0;
    double reserved = 0.0;
    double restarting_until = -std::numeric_limits<double>::infinity();
    bool draining = false;
    // Per-tick accumulators.
    double acc_running = 0.0, acc_pending = 0.0, acc_kv = 0.0, acc_util = 0.0;
    double finished = 0.0, exec_sum = 0.0, arrivals = 0.0;
    double last_t_r = 0.0;
  };

  Replica make_replica(const GpuTypeId& type, const DeploymentConfig& dep, double boot_until);
  const GpuDeviceSpec& gpu(const GpuTypeId& type) const;
  double per_request_rate(const Replica& r) const;
  double kv_used(const Replica& r) const;
  bool restarting(const Replica& r) const { return now_ < r.restarting_until; }
  double time_to_event(const Replica& r) const;
  void advance(Replica& r, double dt);
  void handle_events(Replica& r);
  void finish_done(Replica& r);
  void admit(Replica& r);
  void preempt_one(Replica& r);
  void restart(Replica& r, const DeploymentConfig& dep, double delay);
  void route(std::size_t request_index);
  MetricSample replica_sample(Replica& r, double dt);

  std::vector<GpuDeviceSpec> gpus_;
  ModelProfile profile_;
  ServiceConfig config_;
  SimOptions options_;
  std::vector<RequestRecord> requests_;
  std::vector<RequestRecord> completed_;
  std::vector<int> completed_tokens_;
  std::vector<Replica> replicas_;
  std::map<GpuTypeId, std::size_t> round_robin_;
  Classifier classifier_;
  std::mt19937_64 router_rng_;
  std::mt19937_64 noise_rng_;
  double now_ = 0.0;
  std::size_t next_arrival_ = 0;
  std::uint64_t arrived_ = 0;
  std::uint64_t admit_counter_ = 0;
  int next_replica_id_ = 0;
  int max_input_tokens_ = 0;
  double output_tokens_ = 0.0;
  double device_seconds_ = 0.0;
  double last_aggregate_t_r_ = 0.0;
  std::vector<MetricSample> trace_;
  std::map<int, std::vector<MetricSample>> replica_traces_;
};

// Generates the workload and steps a simulation over its duration.
SimResult run(const WorkloadSpec& workload, const ServiceConfig& config,
              std::span<const GpuDeviceSpec> gpus, const ModelProfile& profile,
              const SimOptions& options = {});

}  // namespace enova
