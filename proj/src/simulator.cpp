#include "enova/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace enova {

namespace {

constexpr double kFinishTolerance = 1e-6;  // tokens
constexpr double kOptimisticWatermark = 0.01;

bool same_shape(const DeploymentConfig& a, const DeploymentConfig& b) {
  return a.parallel_size == b.parallel_size && a.gpu_memory == b.gpu_memory &&
         a.max_num_seqs == b.max_num_seqs;
}

int largest_cap(const ServiceConfig& config) {
  int cap = config.default_max_tokens;
  for (const auto& [_, t] : config.max_tokens) cap = std::max(cap, t);
  return cap;
}

}  // namespace

KvMemory kv_memory(const ModelProfile& profile, double max_num_seqs, double seq_length) {
  constexpr double kMax = 1.8446744073709552e19;  // 2^64 bytes
  KvMemory out;
  const double kv = max_num_seqs * seq_length * profile.token_mem;
  const double total = profile.params_bytes + kv + profile.overhead_others;
  if (!std::isfinite(total) || total > kMax) {
    out.bytes = kMax;
    out.saturated = true;
  } else {
    out.bytes = total;
  }
  return out;
}

void check_feasible(const ServiceConfig& config, std::span<const GpuDeviceSpec> gpus,
                    const ModelProfile& profile, int max_input_tokens) {
  if (config.total_replicas() < 1) {
    throw InfeasibleError("configuration deploys no replicas");
  }
  const double seq = static_cast<double>(max_input_tokens + largest_cap(config));
  for (const auto& [type, dep] : config.deployments) {
    if (dep.replicas == 0) continue;
    auto it = std::find_if(gpus.begin(), gpus.end(),
                           [&](const GpuDeviceSpec& g) { return g.gpu_type_id == type; });
    if (it == gpus.end()) throw InfeasibleError("unknown GPU type '" + type + "'");
    if (dep.parallel_size < 1 || dep.max_num_seqs < 1 || dep.replicas < 0) {
      throw InfeasibleError("invalid deployment for " + type);
    }
    if (dep.parallel_size * dep.replicas > it->device_count) {
      std::ostringstream os;
      os << type << ": " << dep.replicas << " replicas x parallel_size "
         << dep.parallel_size << " exceed " << it->device_count << " devices";
      throw InfeasibleError(os.str());
    }
    if (!(dep.gpu_memory > 0.0) || dep.gpu_memory > it->memory_total) {
      throw InfeasibleError(type + ": gpu_memory outside (0, device memory]");
    }
    const double pool = dep.gpu_memory * dep.parallel_size;
    const KvMemory need = kv_memory(profile, 1.0, seq);
    if (need.saturated || need.bytes > pool) {
      std::ostringstream os;
      os << type << ": allocated " << pool << " bytes cannot hold the model plus one "
         << seq << "-token sequence (" << need.bytes << " bytes)";
      throw InfeasibleError(os.str());
    }
  }
}

Simulation::Simulation(std::vector<GpuDeviceSpec> gpus, ModelProfile profile,
                       ServiceConfig config, std::vector<RequestRecord> workload,
                       SimOptions options)
    : gpus_(std::move(gpus)),
      profile_(profile),
      config_(std::move(config)),
      options_(options),
      requests_(std::move(workload)),
      router_rng_(options.seed),
      noise_rng_(options.seed ^ 0x9e3779b97f4a7c15ULL) {
  if (!(options_.tick > 0.0)) throw Error("simulation tick must be > 0");
  std::stable_sort(requests_.begin(), requests_.end(),
                   [](const RequestRecord& a, const RequestRecord& b) {
                     return a.arrival_time < b.arrival_time;
                   });
  for (const auto& r : requests_) {
    validate(r);
    max_input_tokens_ = std::max(max_input_tokens_, r.input_length);
  }
  check_feasible(config_, gpus_, profile_, max_input_tokens_);
  for (const auto& [type, dep] : config_.deployments) {
    for (int i = 0; i < dep.replicas; ++i) {
      replicas_.push_back(make_replica(type, dep, -std::numeric_limits<double>::infinity()));
    }
  }
}

const GpuDeviceSpec& Simulation::gpu(const GpuTypeId& type) const {
  for (const auto& g : gpus_) {
    if (g.gpu_type_id == type) return g;
  }
  throw Error("unknown GPU type '" + type + "'");
}

Simulation::Replica Simulation::make_replica(const GpuTypeId& type,
                                             const DeploymentConfig& dep,
                                             double boot_until) {
  const GpuDeviceSpec& spec = gpu(type);
  Replica r;
  r.id = next_replica_id_++;
  r.gpu_type = type;
  r.deployment = dep;
  r.capacity = spec.tokens_per_second_capacity * dep.parallel_size;
  r.overhead = spec.batch_overhead_s;
  r.memory_total = spec.memory_total;
  r.kv_budget = dep.gpu_memory * dep.parallel_size - profile_.static_bytes();
  r.restarting_until = boot_until;
  return r;
}

double Simulation::per_request_rate(const Replica& r) const {
  const double b = static_cast<double>(r.running.size());
  if (b == 0.0) return 0.0;
  return 1.0 / (r.overhead + b / r.capacity);
}

double Simulation::kv_used(const Replica& r) const {
  if (options_.kv_accounting == KvAccounting::kReserved) return r.reserved;
  const double b = static_cast<double>(r.running.size());
  const double tokens = r.input_tokens + b * r.clock - r.base_sum;
  return std::max(0.0, tokens) * profile_.token_mem;
}

double Simulation::time_to_event(const Replica& r) const {
  if (restarting(r)) return r.restarting_until - now_;
  if (r.running.empty()) return std::numeric_limits<double>::infinity();
  const double rate = per_request_rate(r);
  double remaining = std::numeric_limits<double>::infinity();
  for (const auto& a : r.running) {
    remaining = std::min(remaining, a.target - (r.clock - a.base));
  }
  double t = std::max(0.0, remaining) / rate;
  if (options_.admission == AdmissionPolicy::kOptimistic &&
      options_.kv_accounting == KvAccounting::kIncremental) {
    const double growth = static_cast<double>(r.running.size()) * rate * profile_.token_mem;
    const double room = r.kv_budget - kv_used(r);
    t = std::min(t, std::max(0.0, room) / growth);
  }
  return t;
}

void Simulation::advance(Replica& r, double dt) {
  r.acc_pending += static_cast<double>(r.pending.size()) * dt;
  device_seconds_ += r.deployment.parallel_size * dt;
  if (restarting(r) || r.running.empty()) {
    r.acc_kv += kv_used(r) * dt;
    return;
  }
  const double b = static_cast<double>(r.running.size());
  const double rate = per_request_rate(r);
  const double kv_before = kv_used(r);
  r.clock += rate * dt;
  const double kv_after = kv_used(r);
  r.acc_running += b * dt;
  r.acc_kv += 0.5 * (kv_before + kv_after) * dt;
  const double util = r.overhead > 0.0 ? b / (b + r.capacity * r.overhead) : 1.0;
  r.acc_util += util * dt;
  output_tokens_ += b * rate * dt;
}

void Simulation::finish_done(Replica& r) {
  auto done = [&](const Active& a) {
    return r.clock - a.base >= a.target - kFinishTolerance;
  };
  if (std::none_of(r.running.begin(), r.running.end(), done)) return;
  std::vector<Active> keep;
  keep.reserve(r.running.size());
  for (const auto& a : r.running) {
    if (!done(a)) {
      keep.push_back(a);
      continue;
    }
    RequestRecord rec = requests_[a.index];
    rec.finish_time = now_;
    r.finished += 1.0;
    r.exec_sum += now_ - *rec.start_time;
    r.input_tokens -= rec.input_length;
    r.base_sum -= a.base;
    r.reserved -= a.reservation;
    completed_.push_back(std::move(rec));
    completed_tokens_.push_back(a.target);
  }
  r.running = std::move(keep);
  if (r.running.empty()) {
    // Drop accumulated rounding so an idle replica reports exactly zero.
    r.input_tokens = 0.0;
    r.base_sum = 0.0;
    r.reserved = 0.0;
  }
}

void Simulation::admit(Replica& r) {
  if (restarting(r)) return;
  const bool reserved_mode = options_.kv_accounting == KvAccounting::kReserved;
  while (!r.pending.empty() &&
         static_cast<int>(r.running.size()) < r.deployment.max_num_seqs) {
    const Waiting w = r.pending.front();
    RequestRecord& rec = requests_[w.index];
    const int cap = config_.max_tokens_for(rec.community_id);
    const int target = std::min(rec.output_length_target, cap);
    const double reservation = static_cast<double>(rec.input_length + cap) * profile_.token_mem;
    bool fits;
    if (reserved_mode || options_.admission == AdmissionPolicy::kConservative) {
      fits = r.reserved + reservation <= r.kv_budget;
    } else {
      const double need = (rec.input_length + w.generated) * profile_.token_mem;
      fits = r.running.empty() ||
             kv_used(r) + need + kOptimisticWatermark * r.kv_budget <= r.kv_budget;
    }
    if (!fits) break;
    r.pending.pop_front();
    if (!rec.start_time) rec.start_time = now_;
    Active a{w.index, r.clock - w.generated, target, reservation, admit_counter_++};
    r.running.push_back(a);
    r.input_tokens += rec.input_length;
    r.base_sum += a.base;
    r.reserved += reservation;
  }
}

void Simulation::preempt_one(Replica& r) {
  auto victim = std::max_element(r.running.begin(), r.running.end(),
                                 [](const Active& a, const Active& b) { return a.order < b.order; });
  const Active a = *victim;
  r.running.erase(victim);
  const RequestRecord& rec = requests_[a.index];
  r.input_tokens -= rec.input_length;
  r.base_sum -= a.base;
  r.reserved -= a.reservation;
  r.pending.push_front({a.index, r.clock - a.base});
}

void Simulation::handle_events(Replica& r) {
  if (restarting(r)) return;
  finish_done(r);
  if (options_.admission == AdmissionPolicy::kOptimistic &&
      options_.kv_accounting == KvAccounting::kIncremental) {
    while (r.running.size() > 1 &&
           r.kv_budget - kv_used(r) <= profile_.token_mem * kFinishTolerance) {
      preempt_one(r);
    }
    if (r.running.size() == 1 &&
        r.kv_budget - kv_used(r) <= profile_.token_mem * kFinishTolerance) {
      // A lone request that outgrows the whole budget is cut at its current
      // length.
      Active& a = r.running.front();
      a.target = static_cast<int>(std::floor(r.clock - a.base + kFinishTolerance));
      finish_done(r);
    }
  }
  admit(r);
}

void Simulation::restart(Replica& r, const DeploymentConfig& dep, double delay) {
  std::vector<Active> running = std::move(r.running);
  r.running.clear();
  std::sort(running.begin(), running.end(),
            [](const Active& a, const Active& b) { return a.order < b.order; });
  // The KV cache is lost; requeued requests restart generation from scratch.
  for (auto it = running.rbegin(); it != running.rend(); ++it) {
    requests_[it->index].start_time.reset();
    r.pending.push_front({it->index, 0.0});
  }
  r.input_tokens = 0.0;
  r.base_sum = 0.0;
  r.reserved = 0.0;
  const GpuDeviceSpec& spec = gpu(r.gpu_type);
  r.deployment = dep;
  r.capacity = spec.tokens_per_second_capacity * dep.parallel_size;
  r.kv_budget = dep.gpu_memory * dep.parallel_size - profile_.static_bytes();
  r.restarting_until = now_ + delay;
}

void Simulation::route(std::size_t request_index) {
  RequestRecord& rec = requests_[request_index];
  if (classifier_) rec.community_id = classifier_(rec);
  ++arrived_;

  // Tier 0: serving replicas; tier 1: booting/restarting; tier 2: draining.
  auto tier = [&](const Replica& r) { return r.draining ? 2 : (restarting(r) ? 1 : 0); };
  int best_tier = 3;
  for (const auto& r : replicas_) best_tier = std::min(best_tier, tier(r));
  if (best_tier == 3) throw Error("no replica available to route request");

  std::map<GpuTypeId, std::vector<std::size_t>> by_type;
  for (std::size_t i = 0; i < replicas_.size(); ++i) {
    if (tier(replicas_[i]) == best_tier) by_type[replicas_[i].gpu_type].push_back(i);
  }
  double total = 0.0;
  std::vector<std::pair<const GpuTypeId*, double>> shares;
  for (const auto& [type, idx] : by_type) {
    auto dep = config_.deployments.find(type);
    const double w = dep != config_.deployments.end() ? dep->second.weight : 1.0;
    shares.emplace_back(&type, w * static_cast<double>(idx.size()));
    total += shares.back().second;
  }
  const GpuTypeId* chosen = shares.back().first;
  if (shares.size() > 1 && total > 0.0) {
    double u = std::uniform_real_distribution<double>(0.0, total)(router_rng_);
    for (const auto& [type, share] : shares) {
      if (u < share) {
        chosen = type;
        break;
      }
      u -= share;
    }
  }
  const auto& candidates = by_type[*chosen];
  std::size_t& rr = round_robin_[*chosen];
  Replica& target = replicas_[candidates[rr++ % candidates.size()]];
  target.arrivals += 1.0;
  target.pending.push_back({request_index, 0.0});
  admit(target);
}

MetricSample Simulation::replica_sample(Replica& r, double dt) {
  MetricSample s;
  s.ts = now_;
  s.n_f = r.finished / dt;
  s.n_r = r.acc_running / dt;
  s.n_a = r.arrivals / dt;
  s.n_p = r.acc_pending / dt;
  if (r.finished > 0.0) r.last_t_r = r.exec_sum / r.finished;
  s.t_r = r.last_t_r;
  const double footprint = profile_.static_bytes() + r.acc_kv / dt;
  double mu = footprint / (r.deployment.parallel_size * r.memory_total);
  if (options_.memory_noise_sigma > 0.0) {
    mu += std::normal_distribution<double>(0.0, options_.memory_noise_sigma)(noise_rng_);
  }
  s.m_u = std::clamp(mu, 0.0, 1.0);
  s.g_u = std::clamp(r.acc_util / dt, 0.0, 1.0);
  r.acc_running = r.acc_pending = r.acc_kv = r.acc_util = 0.0;
  r.finished = r.exec_sum = r.arrivals = 0.0;
  return s;
}

Simulation::TickOutput Simulation::step(double dt) {
  if (!(dt > 0.0)) throw Error("step: dt must be > 0");
  const double end = now_ + dt;
  int stalled = 0;
  while (true) {
    double next = end;
    if (next_arrival_ < requests_.size()) {
      next = std::min(next, std::max(now_, requests_[next_arrival_].arrival_time));
    }
    for (const auto& r : replicas_) next = std::min(next, now_ + time_to_event(r));
    const double delta = next - now_;
    if (delta > 0.0) {
      for (auto& r : replicas_) advance(r, delta);
      now_ = next;
      stalled = 0;
    } else if (++stalled > 100000) {
      throw Error("simulation made no progress");
    }
    while (next_arrival_ < requests_.size() &&
           requests_[next_arrival_].arrival_time <= now_ &&
           requests_[next_arrival_].arrival_time < end) {
      route(next_arrival_++);
    }
    for (auto& r : replicas_) handle_events(r);
    if (now_ >= end) break;
  }
  now_ = end;

  TickOutput out;
  MetricSample agg;
  agg.ts = now_;
  double finished = 0.0, exec_weighted = 0.0, devices = 0.0, mu = 0.0, gu = 0.0;
  for (auto& r : replicas_) {
    const double fin = r.finished;
    MetricSample s = replica_sample(r, dt);
    out.per_replica[r.id] = s;
    replica_traces_[r.id].push_back(s);
    agg.n_f += s.n_f;
    agg.n_r += s.n_r;
    agg.n_a += s.n_a;
    agg.n_p += s.n_p;
    finished += fin;
    exec_weighted += fin * s.t_r;
    const double d = r.deployment.parallel_size;
    devices += d;
    mu += d * s.m_u;
    gu += d * s.g_u;
  }
  if (finished > 0.0) last_aggregate_t_r_ = exec_weighted / finished;
  agg.t_r = last_aggregate_t_r_;
  if (devices > 0.0) {
    agg.m_u = std::clamp(mu / devices, 0.0, 1.0);
    agg.g_u = std::clamp(gu / devices, 0.0, 1.0);
  }
  out.aggregate = agg;
  trace_.push_back(agg);

  std::erase_if(replicas_, [](const Replica& r) {
    return r.draining && r.running.empty() && r.pending.empty();
  });
  return out;
}

bool Simulation::apply_config(const ServiceConfig& config, double restart_delay) {
  check_feasible(config, gpus_, profile_, max_input_tokens_);
  if (config == config_) return false;
  config_ = config;
  std::map<GpuTypeId, std::vector<Replica*>> active;
  for (auto& r : replicas_) {
    if (!r.draining) active[r.gpu_type].push_back(&r);
  }
  std::vector<Replica> added;
  for (const auto& [type, dep] : config_.deployments) {
    auto& current = active[type];
    const std::size_t keep = std::min<std::size_t>(current.size(), dep.replicas);
    for (std::size_t i = 0; i < keep; ++i) {
      Replica& r = *current[i];
      if (!same_shape(r.deployment, dep)) {
        restart(r, dep, restart_delay);
      } else {
        r.deployment = dep;
      }
    }
    for (std::size_t i = keep; i < current.size(); ++i) current[i]->draining = true;
    for (int i = static_cast<int>(current.size()); i < dep.replicas; ++i) {
      added.push_back(make_replica(type, dep, now_ + restart_delay));
    }
  }
  for (auto& [type, list] : active) {
    if (!config_.deployments.contains(type)) {
      for (Replica* r : list) r->draining = true;
    }
  }
  for (auto& r : added) replicas_.push_back(std::move(r));
  return true;
}

std::vector<ReplicaView> Simulation::replicas() const {
  std::vector<ReplicaView> out;
  for (const auto& r : replicas_) {
    ReplicaView v;
    v.id = r.id;
    v.gpu_type = r.gpu_type;
    v.deployment = r.deployment;
    v.running = r.running.size();
    v.pending = r.pending.size();
    v.kv_bytes_used = kv_used(r);
    v.kv_budget = r.kv_budget;
    v.restarting = restarting(r);
    v.draining = r.draining;
    out.push_back(v);
  }
  return out;
}

bool Simulation::any_restarting() const {
  return std::any_of(replicas_.begin(), replicas_.end(),
                     [&](const Replica& r) { return restarting(r); });
}

int Simulation::active_replicas() const {
  return static_cast<int>(std::count_if(replicas_.begin(), replicas_.end(),
                                        [](const Replica& r) { return !r.draining; }));
}

std::uint64_t Simulation::pending() const {
  std::uint64_t n = 0;
  for (const auto& r : replicas_) n += r.pending.size();
  return n;
}

std::uint64_t Simulation::running() const {
  std::uint64_t n = 0;
  for (const auto& r : replicas_) n += r.running.size();
  return n;
}

SimResult Simulation::result() const {
  SimResult out;
  out.trace = trace_;
  out.replica_traces = replica_traces_;
  out.completed = completed_;
  out.arrived = arrived_;
  out.pending_at_end = pending();
  out.running_at_end = running();
  out.output_tokens = output_tokens_;
  out.device_seconds = device_seconds_;
  out.throughput = device_seconds_ > 0.0 ? output_tokens_ / device_seconds_ : 0.0;
  double lat = 0.0;
  for (std::size_t i = 0; i < completed_.size(); ++i) {
    lat += (*completed_[i].finish_time - completed_[i].arrival_time) / completed_tokens_[i];
  }
  out.latency = completed_.empty() ? 0.0 : lat / static_cast<double>(completed_.size());
  return out;
}

SimResult run(const WorkloadSpec& workload, const ServiceConfig& config,
              std::span<const GpuDeviceSpec> gpus, const ModelProfile& profile,
              const SimOptions& options) {
  Simulation sim(std::vector<GpuDeviceSpec>(gpus.begin(), gpus.end()), profile, config,
                 generate_workload(workload), options);
  const auto ticks = static_cast<std::size_t>(std::ceil(workload.duration / options.tick - 1e-9));
  for (std::size_t i = 0; i < ticks; ++i) sim.step();
  return sim.result();
}

}  // namespace enova
