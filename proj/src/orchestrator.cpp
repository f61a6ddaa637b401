#include "enova/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "enova/trace_io.hpp"
#include "json.hpp"

namespace enova {

using json = nlohmann::ordered_json;

namespace {

constexpr std::size_t kPressureSamples = 30;

json verdict_json(const Verdict& v) {
  return {{"score", v.score},
          {"is_anomaly", v.is_anomaly},
          {"direction", to_string(v.direction)},
          {"md", v.md}};
}

const GpuDeviceSpec& device_of(const std::vector<GpuDeviceSpec>& devices, const GpuTypeId& type) {
  for (const auto& d : devices) {
    if (d.gpu_type_id == type) return d;
  }
  throw Error("unknown GPU type '" + type + "'");
}

std::string bytes_gb(double b) {
  std::ostringstream os;
  os.precision(4);
  os << b / 1e9 << " GB";
  return os.str();
}

}  // namespace

ServingSystem::Observation SimulatedSystem::collect(double dt) {
  auto out = sim_.step(dt);
  return {out.aggregate, std::move(out.per_replica)};
}

MetricVector detector_features(const MetricSample& s, int serving_replicas) {
  const double k = std::max(1, serving_replicas);
  return {s.n_f / k, s.n_r / k, s.n_a / k, s.n_p / k, s.t_r, s.m_u, s.g_u};
}

std::string AuditLog::to_jsonl() const {
  std::string out;
  std::size_t next_action = 0;
  for (const auto& t : ticks) {
    if (t.state == "normal" || t.state == "warmup") continue;
    json j = {{"type", "tick"}, {"ts", t.ts}, {"state", t.state}};
    if (t.verdict) j["verdict"] = verdict_json(*t.verdict);
    if (!t.note.empty()) j["note"] = t.note;
    out += j.dump() + "\n";
    if (t.state == "action" && next_action < actions.size()) {
      const auto& a = actions[next_action++];
      json aj = {{"type", "action"},
                 {"ts", a.ts},
                 {"trigger", verdict_json(a.trigger)},
                 {"old_config", json::parse(service_config_to_json(a.old_config))},
                 {"new_config", json::parse(service_config_to_json(a.new_config))},
                 {"rationale", a.rationale}};
      out += aj.dump() + "\n";
    }
  }
  return out;
}

Orchestrator::Orchestrator(ServingSystem& system, const VaeDetector& detector,
                           ControlLoopConfig config)
    : system_(system), detector_(detector), config_(config) {
  if (!(config_.tick > 0.0)) throw Error("control loop: tick must be > 0");
  if (!detector_.calibrated()) throw Error("control loop: detector is not calibrated");
}

MetricWindow Orchestrator::type_window(const GpuTypeId& type, std::size_t length) const {
  auto it = type_history_.find(type);
  if (it == type_history_.end()) return {};
  const auto& h = it->second;
  std::size_t begin = h.size() > length ? h.size() - length : 0;
  if (last_action_) {
    while (begin < h.size() && h[begin].ts <= *last_action_) ++begin;
  }
  return MetricWindow(std::vector<MetricSample>(h.begin() + static_cast<std::ptrdiff_t>(begin),
                                                h.end()));
}

bool Orchestrator::draining() const {
  const std::size_t w = config_.recovery_window;
  if (w < 3 || history_.size() < w) return false;
  std::vector<double> x, y;
  for (std::size_t i = history_.size() - w; i < history_.size(); ++i) {
    x.push_back(history_[i].ts);
    y.push_back(history_[i].n_p);
  }
  if (stats::mean(y) <= 0.0) return false;
  return stats::ols_fit(x, y).slope < 0.0;
}

double Orchestrator::recent_demand() const {
  const std::size_t w = std::min(config_.demand_window, history_.size());
  const MetricWindow window(
      std::vector<MetricSample>(history_.end() - static_cast<std::ptrdiff_t>(w), history_.end()));
  return std::max(1e-3, estimate_demand(window, 0.95, std::max<std::size_t>(1, w / 2)));
}

std::optional<Orchestrator::Decision> Orchestrator::memory_plan(const GpuTypeId& type,
                                                               const MetricWindow& w) {
  const ServiceConfig& current = system_.config();
  const DeploymentConfig& dep = current.deployments.at(type);
  const GpuDeviceSpec& dev = device_of(system_.devices(), type);
  MemoryModel model;
  try {
    model = fit_memory_model(w);
  } catch (const Error&) {
    return std::nullopt;
  }
  const MemoryPlan plan = determine_gpu_memory(model, dep.max_num_seqs, dev, config_.safety_cap);
  DeploymentConfig next = dep;
  next.gpu_memory = plan.gpu_memory;
  if (plan.parallel_size > dep.parallel_size &&
      plan.parallel_size * dep.replicas <= dev.device_count) {
    next.parallel_size = plan.parallel_size;
  }
  if (next.parallel_size == dep.parallel_size && next.gpu_memory <= dep.gpu_memory * (1 + 1e-9)) {
    return std::nullopt;
  }
  Decision d;
  d.config = current;
  d.config->deployments[type] = next;
  d.rationale = "KV cache bound on " + type + ": gpu_memory " + bytes_gb(dep.gpu_memory) +
                " -> " + bytes_gb(next.gpu_memory) + ", parallel_size " +
                std::to_string(dep.parallel_size) + " -> " + std::to_string(next.parallel_size);
  return d;
}

Orchestrator::Decision Orchestrator::plan_overload() {
  const ServiceConfig& current = system_.config();
  // Memory first: a queue that builds while fewer than max_num_seqs run means
  // the KV budget, not compute, is the limit.
  std::optional<Decision> memory;
  for (const auto& [type, dep] : current.deployments) {
    const MetricWindow recent = type_window(type, kPressureSamples);
    if (recent.empty()) continue;
    const double running = stats::mean(recent.column(&MetricSample::n_r));
    const double pending = stats::mean(recent.column(&MetricSample::n_p));
    if (pending <= 0.5 || running >= 0.95 * dep.max_num_seqs) continue;
    auto d = memory_plan(type, type_window(type, config_.window));
    if (!d) continue;
    if (memory) {
      memory->config->deployments[type] = d->config->deployments.at(type);
      memory->rationale += "; " + d->rationale;
    } else {
      memory = std::move(d);
    }
  }
  if (memory) return *memory;

  // Compute bound: cover the offered load with more replicas.
  PlacementProblem problem;
  double capacity_now = 0.0;
  for (const auto& [type, dep] : current.deployments) {
    const MetricWindow w = type_window(type, config_.window);
    try {
      const CapacityEstimate est = estimate_capacity(w);
      double& book = capacity_book_[type];
      book = est.saturated ? est.n_limit : std::max(book, est.n_limit);
    } catch (const Error&) {
      // Keep the previous estimate.
    }
    if (!capacity_book_.contains(type)) continue;
    const GpuDeviceSpec& dev = device_of(system_.devices(), type);
    problem.options.push_back({type, std::fabs(dep.gpu_memory - dev.memory_total) / dev.memory_total,
                               capacity_book_[type], dep.parallel_size, dev.device_count});
    capacity_now += capacity_book_[type] * dep.replicas;
  }
  Decision d;
  if (problem.options.empty()) {
    d.rationale = "no capacity estimate available";
    return d;
  }
  // The deployment is overloaded, so the plan must add capacity.
  problem.demand = std::max(recent_demand(), capacity_now * (1.0 + 1e-6));
  PlacementPlan plan;
  try {
    plan = solve_placement(problem);
  } catch (const InfeasibleError& e) {
    d.rationale = e.what();
    return d;
  }
  ServiceConfig next = current;
  for (auto& [type, dep] : next.deployments) {
    auto r = plan.replicas.find(type);
    dep.replicas = r == plan.replicas.end() ? 0 : r->second;
    if (r != plan.replicas.end()) dep.weight = plan.weights.at(type);
  }
  std::erase_if(next.deployments, [](const auto& kv) { return kv.second.replicas == 0; });
  if (next == current) {
    d.rationale = "placement unchanged";
    return d;
  }
  std::ostringstream os;
  os << "compute bound: demand " << problem.demand << " req/s over capacity " << capacity_now
     << " req/s; replicas " << current.total_replicas() << " -> " << next.total_replicas();
  d.config = next;
  d.rationale = os.str();
  return d;
}

Orchestrator::Decision Orchestrator::plan_underload() {
  const ServiceConfig& current = system_.config();
  PlacementProblem problem;
  for (const auto& [type, dep] : current.deployments) {
    const MetricWindow w = type_window(type, config_.window);
    try {
      const CapacityEstimate est = estimate_capacity(w);
      double& book = capacity_book_[type];
      book = est.saturated ? est.n_limit : std::max(book, est.n_limit);
    } catch (const Error&) {
    }
    if (!capacity_book_.contains(type)) continue;
    const GpuDeviceSpec& dev = device_of(system_.devices(), type);
    problem.options.push_back({type, std::fabs(dep.gpu_memory - dev.memory_total) / dev.memory_total,
                               capacity_book_[type], dep.parallel_size, dev.device_count});
  }
  Decision d;
  if (problem.options.empty()) {
    d.rationale = "no capacity estimate available";
    return d;
  }
  problem.demand = recent_demand();
  PlacementPlan plan;
  try {
    plan = solve_placement(problem);
  } catch (const InfeasibleError& e) {
    d.rationale = e.what();
    return d;
  }
  ServiceConfig next = current;
  for (auto& [type, dep] : next.deployments) {
    auto r = plan.replicas.find(type);
    dep.replicas = r == plan.replicas.end() ? 0 : r->second;
    if (r != plan.replicas.end()) dep.weight = plan.weights.at(type);
  }
  std::erase_if(next.deployments, [](const auto& kv) { return kv.second.replicas == 0; });
  if (next.total_replicas() >= current.total_replicas()) {
    d.rationale = "already at the smallest deployment covering demand";
    return d;
  }
  std::ostringstream os;
  os << "underload: demand " << problem.demand << " req/s; replicas "
     << current.total_replicas() << " -> " << next.total_replicas();
  d.config = next;
  d.rationale = os.str();
  return d;
}

std::optional<ScalingAction> Orchestrator::tick() {
  const auto obs = system_.collect(config_.tick);
  history_.push_back(obs.aggregate);
  const auto reps = system_.replicas();

  std::map<GpuTypeId, std::pair<MetricSample, int>> by_type;
  int serving = 0;
  for (const auto& r : reps) {
    if (r.draining) continue;
    ++serving;
    auto it = obs.per_replica.find(r.id);
    if (it == obs.per_replica.end()) continue;
    auto& [sum, count] = by_type[r.gpu_type];
    const MetricSample& s = it->second;
    sum.n_f += s.n_f;
    sum.n_r += s.n_r;
    sum.n_a += s.n_a;
    sum.n_p += s.n_p;
    sum.t_r += s.t_r;
    sum.m_u += s.m_u;
    sum.g_u += s.g_u;
    ++count;
  }
  for (auto& [type, entry] : by_type) {
    auto [s, count] = entry;
    const double k = count;
    s.ts = obs.aggregate.ts;
    s.n_f /= k;
    s.n_r /= k;
    s.n_a /= k;
    s.n_p /= k;
    s.t_r /= k;
    s.m_u /= k;
    s.g_u /= k;
    type_history_[type].push_back(s);
  }
  features_.push_back(detector_features(obs.aggregate, serving));

  TickRecord rec;
  rec.ts = obs.aggregate.ts;
  if (history_.size() < std::max<std::size_t>(1, config_.warmup)) {
    rec.state = "warmup";
    log_.ticks.push_back(rec);
    return std::nullopt;
  }
  const std::size_t width = std::min(std::max<std::size_t>(1, config_.smoother_width),
                                     features_.size());
  MetricVector smoothed{};
  for (std::size_t i = features_.size() - width; i < features_.size(); ++i) {
    for (std::size_t d = 0; d < kMetricDims; ++d) smoothed[d] += features_[i][d] / width;
  }
  const Verdict v = detector_.detect(smoothed);
  rec.verdict = v;

  auto finish = [&](std::string state, std::string note = {}) {
    rec.state = std::move(state);
    rec.note = std::move(note);
    log_.ticks.push_back(rec);
  };
  if (!v.is_anomaly) {
    streak_ = 0;
    streak_direction_ = Direction::kNone;
    finish("normal");
    return std::nullopt;
  }
  streak_ = v.direction == streak_direction_ ? streak_ + 1 : 1;
  streak_direction_ = v.direction;
  const double now = rec.ts;
  if (streak_ < config_.debounce) {
    finish("pending");
    return std::nullopt;
  }
  if (last_action_ && now - *last_action_ < config_.cooldown) {
    finish("cooldown");
    return std::nullopt;
  }
  const auto recent_actions = std::count_if(action_times_.begin(), action_times_.end(),
                                            [&](double t) { return now - t < 3600.0; });
  if (recent_actions >= config_.max_actions_per_hour) {
    finish("rate-limited");
    return std::nullopt;
  }
  const bool reconfiguring = std::any_of(reps.begin(), reps.end(), [](const ReplicaView& r) {
    return r.restarting || r.draining;
  });
  if (reconfiguring || (v.direction == Direction::kOverload && draining())) {
    finish("recovering");
    return std::nullopt;
  }

  const Decision decision =
      v.direction == Direction::kOverload ? plan_overload() : plan_underload();
  if (!decision.config) {
    finish("unchanged", decision.rationale);
    return std::nullopt;
  }
  ScalingAction action;
  action.ts = now;
  action.trigger = v;
  action.old_config = system_.config();
  action.new_config = *decision.config;
  action.rationale = decision.rationale;
  try {
    system_.apply(action.new_config);
  } catch (const InfeasibleError& e) {
    finish("infeasible", e.what());
    return std::nullopt;
  }
  last_action_ = now;
  action_times_.push_back(now);
  streak_ = 0;
  streak_direction_ = Direction::kNone;
  finish("action", action.rationale);
  log_.actions.push_back(action);
  return action;
}

LoopResult run_loop(const Scenario& scenario, const VaeDetector& detector, double duration) {
  if (duration <= 0.0) duration = scenario.workload.duration;
  Simulation sim = make_simulation(scenario);
  SimulatedSystem system(sim);
  Orchestrator orch(system, detector, scenario.loop);
  const auto ticks = static_cast<std::size_t>(std::ceil(duration / scenario.loop.tick - 1e-9));
  for (std::size_t i = 0; i < ticks; ++i) orch.tick();
  return {orch.log(), sim.result()};
}

namespace {

// Smoothed detector features of the scenario's initial configuration at a
// constant arrival rate, warm-up dropped.
std::vector<MetricVector> simulate_segment(const Scenario& scenario, double rate,
                                           std::uint64_t seed) {
  Scenario s = scenario;
  s.workload.phases.clear();
  s.workload.arrival_rate = rate;
  s.workload.duration = scenario.training.segment_duration;
  s.workload.rng_seed = seed;
  s.options.seed = seed;
  Simulation sim = make_simulation(s);
  std::vector<MetricVector> rows;
  const auto ticks =
      static_cast<std::size_t>(std::ceil(s.workload.duration / s.options.tick - 1e-9));
  for (std::size_t i = 0; i < ticks; ++i) {
    const auto out = sim.step();
    rows.push_back(detector_features(out.aggregate, sim.active_replicas()));
  }
  rows = smooth_rows(rows, scenario.loop.smoother_width);
  const auto skip = static_cast<std::size_t>(scenario.training.skip / s.options.tick);
  rows.erase(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(std::min(skip, rows.size())));
  return rows;
}

}  // namespace

VaeDetector train_scenario_detector(const Scenario& scenario) {
  const DetectorTrainingSpec& t = scenario.training;
  if (t.normal_rates.empty()) throw Error("training: scenario lists no normal rates");
  LabeledDataset data;
  std::uint64_t seed = t.seed;
  for (double rate : t.normal_rates) {
    for (const auto& r : simulate_segment(scenario, rate, seed++)) {
      data.rows.push_back(r);
      data.labels.push_back(1);
    }
  }
  auto add_anomalous = [&](double rate) {
    const auto rows = simulate_segment(scenario, rate, seed++);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const bool labeled = std::floor((i + 1) * t.label_fraction) > std::floor(i * t.label_fraction);
      data.rows.push_back(rows[i]);
      data.labels.push_back(labeled ? -1 : 1);
    }
  };
  for (double rate : t.overload_rates) add_anomalous(rate);
  for (double rate : t.underload_rates) add_anomalous(rate);

  VaeConfig config;
  config.seed = t.seed;
  config.epochs = t.epochs;
  VaeDetector det = train(data, config);

  std::vector<MetricVector> calibration;
  for (double rate : t.normal_rates) {
    const auto rows = simulate_segment(scenario, rate, seed++);
    calibration.insert(calibration.end(), rows.begin(), rows.end());
  }
  calibrate_threshold(det, calibration);
  return det;
}

double sustained_admitted_rate(std::span<const MetricSample> trace, double begin, double end) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : trace) {
    if (s.ts < begin || s.ts >= end || s.n_p < 0.5) continue;
    sum += s.n_f;
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

}  // namespace enova
