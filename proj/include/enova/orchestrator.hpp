#pragma once

// Closed autoscaling loop: collect one tick of metrics, score it, and on a
// sustained anomaly re-derive the configuration and apply it.

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "enova/core.hpp"
#include "enova/detector.hpp"
#include "enova/recommender.hpp"
#include "enova/scenario.hpp"
#include "enova/simulator.hpp"

namespace enova {

// What the loop needs from a serving system. A remote deployment can stand
// in for the simulator behind this interface.
class ServingSystem {
 public:
  struct Observation {
    MetricSample aggregate;
    std::map<int, MetricSample> per_replica;
  };

  virtual ~ServingSystem() = default;
  virtual double now() const = 0;
  // Lets dt seconds pass and returns the samples for that interval.
  virtual Observation collect(double dt) = 0;
  virtual const ServiceConfig& config() const = 0;
  // Throws InfeasibleError without changing anything when config cannot be deployed.
  virtual void apply(const ServiceConfig& config) = 0;
  virtual std::vector<ReplicaView> replicas() const = 0;
  virtual const std::vector<GpuDeviceSpec>& devices() const = 0;
  virtual const ModelProfile& profile() const = 0;
  virtual int max_input_tokens() const = 0;
};

class SimulatedSystem : public ServingSystem {
 public:
  explicit SimulatedSystem(Simulation& sim) : sim_(sim) {}

  double now() const override { return sim_.now(); }
  Observation collect(double dt) override;
  const ServiceConfig& config() const override { return sim_.config(); }
  void apply(const ServiceConfig& config) override { sim_.apply_config(config); }
  std::vector<ReplicaView> replicas() const override { return sim_.replicas(); }
  const std::vector<GpuDeviceSpec>& devices() const override { return sim_.gpus(); }
  const ModelProfile& profile() const override { return sim_.profile(); }
  int max_input_tokens() const override { return sim_.max_input_tokens(); }

 private:
  Simulation& sim_;
};

// Detector input for one tick: rates and queue lengths per serving replica,
// times and utilizations as reported.
MetricVector detector_features(const MetricSample& aggregate, int serving_replicas);

struct ScalingAction {
  double ts = 0.0;
  Verdict trigger;
  ServiceConfig old_config;
  ServiceConfig new_config;
  std::string rationale;
};

struct TickRecord {
  double ts = 0.0;
  std::optional<Verdict> verdict;  // absent during warm-up
  // warmup | normal | pending | cooldown | rate-limited | recovering | unchanged |
  // infeasible | action
  std::string state;
  std::string note;
};

struct AuditLog {
  std::vector<ScalingAction> actions;
  std::vector<TickRecord> ticks;

  // One JSON object per line: every non-normal tick and every action.
  std::string to_jsonl() const;
};

class Orchestrator {
 public:
  Orchestrator(ServingSystem& system, const VaeDetector& detector, ControlLoopConfig config);

  // Advances the system by one loop tick and reacts to the verdict.
  std::optional<ScalingAction> tick();

  const AuditLog& log() const { return log_; }
  const std::vector<MetricSample>& history() const { return history_; }

 private:
  struct Decision {
    std::optional<ServiceConfig> config;
    std::string rationale;
  };

  Decision plan_overload();
  Decision plan_underload();
  std::optional<Decision> memory_plan(const GpuTypeId& type, const MetricWindow& w);
  double recent_demand() const;
  MetricWindow type_window(const GpuTypeId& type, std::size_t length) const;
  bool draining() const;

  ServingSystem& system_;
  const VaeDetector& detector_;
  ControlLoopConfig config_;
  AuditLog log_;
  std::vector<MetricSample> history_;
  std::vector<MetricVector> features_;
  // Mean sample of the serving replicas of each type, per tick.
  std::map<GpuTypeId, std::vector<MetricSample>> type_history_;
  std::map<GpuTypeId, double> capacity_book_;  // req/s per replica
  int streak_ = 0;
  Direction streak_direction_ = Direction::kNone;
  std::optional<double> last_action_;
  std::vector<double> action_times_;
};

struct LoopResult {
  AuditLog log;
  SimResult sim;
};

// Simulates the scenario for `duration` seconds (its workload duration when
// <= 0) with the loop in charge.
LoopResult run_loop(const Scenario& scenario, const VaeDetector& detector, double duration = 0.0);

// Trains and calibrates a detector from simulated segments of the scenario's
// initial configuration, per its training spec.
VaeDetector train_scenario_detector(const Scenario& scenario);

// Mean n_f over the ticks in [begin, end) with n_p >= 0.5: the request rate
// the deployment sustained under pressure. 0 when the queue never built up.
double sustained_admitted_rate(std::span<const MetricSample> trace, double begin, double end);

}  // namespace enova
