#pragma once

// Scenario files: one JSON document describing the devices, the model, the
// initial service configuration, the workload and, optionally, the control
// loop and the detector training plan.
//
// {
//   "name": "fig5",
//   "gpus": [{"gpu_type_id": "4090", "memory_total": 24e9, "device_count": 1,
//             "tokens_per_second_capacity": 1e5, "batch_overhead_s": 0.025}],
//   "profile": {"params_bytes": 14.5e9, "dtype_bytes": 2, "token_mem": 131072,
//               "overhead_others": 5.1e9},
//   "config": { ServiceConfig document },
//   "workload": {"arrival_rate": 3.5, "phases": [{"start": 300, "rate": 7.5}],
//                "input_length": {"kind": "uniform", "low": 100, "high": 300},
//                "output_length": {"kind": "fixed", "value": 200},
//                "communities": [...], "duration": 900, "seed": 1},
//   "sim": {"tick": 1, "restart_delay": 60, "admission": "optimistic",
//           "kv_accounting": "incremental", "memory_noise_sigma": 0, "seed": 1},
//   "loop": { ControlLoopConfig fields },
//   "training": { DetectorTrainingSpec fields }
// }

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "enova/core.hpp"
#include "enova/simulator.hpp"
#include "enova/workload.hpp"

namespace enova {

struct ControlLoopConfig {
  double tick = 1.0;                    // s
  std::size_t window = 900;             // samples handed to the recommender
  std::size_t warmup = 60;              // samples before the detector is consulted
  double cooldown = 120.0;              // s between actions
  int max_actions_per_hour = 6;
  std::size_t smoother_width = 5;       // trailing mean over detector inputs
  int debounce = 3;                     // consecutive anomalous ticks before acting
  std::size_t demand_window = 120;      // samples used for the shrink demand estimate
  std::size_t recovery_window = 60;     // samples used to judge a draining queue
  double safety_cap = 0.95;
};

// How the detector for a scenario is trained: the scenario's initial
// configuration is simulated at each rate for segment_duration seconds.
// Normal segments are labeled +1; overload and underload segments are labeled
// -1 on a label_fraction share of their samples and +1 (unlabeled) otherwise.
struct DetectorTrainingSpec {
  std::vector<double> normal_rates;
  std::vector<double> overload_rates;
  std::vector<double> underload_rates;
  double segment_duration = 300.0;
  double skip = 30.0;  // warm-up seconds dropped from each segment
  double label_fraction = 1.0;
  std::uint64_t seed = 7;
  int epochs = 200;
};

struct Scenario {
  std::string name;
  std::vector<GpuDeviceSpec> gpus;
  ModelProfile profile;
  ServiceConfig config;
  WorkloadSpec workload;
  SimOptions options;
  ControlLoopConfig loop;
  DetectorTrainingSpec training;

  // Throws Error on inconsistent content (unknown GPU types, bad values).
  void validate() const;
};

Scenario scenario_from_json(std::string_view text);

// The "gpus" and "profile" members of any JSON document, a scenario included.
struct DeviceInventory {
  std::vector<GpuDeviceSpec> gpus;
  ModelProfile profile;
};

DeviceInventory read_devices(const std::filesystem::path& source);

std::string scenario_to_json(const Scenario& scenario);
Scenario read_scenario(const std::filesystem::path& source);

// Generates the scenario workload and returns a simulation ready to step.
Simulation make_simulation(const Scenario& scenario);

}  // namespace enova
