#include "enova/recommender.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "enova/simulator.hpp"

namespace enova {

namespace {

bool varies(const std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi - *lo > 1e-12;
}

// Finished-weighted trailing mean of t_r: the mean execution time of every
// request that finished inside the trailing window.
std::vector<double> smooth_exec_time(const MetricWindow& w, std::size_t width) {
  std::vector<double> out(w.size());
  double fin = 0.0, weighted = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    fin += w[i].n_f;
    weighted += w[i].n_f * w[i].t_r;
    if (i >= width) {
      fin -= w[i - width].n_f;
      weighted -= w[i - width].n_f * w[i - width].t_r;
    }
    out[i] = fin > 1e-9 ? weighted / fin : w[i].t_r;
  }
  return out;
}

template <class T>
std::vector<T> tail_from(const std::vector<T>& v, std::size_t start) {
  return std::vector<T>(v.begin() + static_cast<std::ptrdiff_t>(start), v.end());
}

}  // namespace

CapacityEstimate estimate_capacity(const MetricWindow& window, const CapacityOptions& options) {
  if (window.size() < std::max<std::size_t>(options.min_samples, 3)) {
    throw Error("estimate_capacity: need at least " + std::to_string(options.min_samples) +
                " samples, got " + std::to_string(window.size()));
  }
  const auto n_f = window.column(&MetricSample::n_f);
  const auto n_r = window.column(&MetricSample::n_r);
  if (!varies(n_r)) {
    throw Error("estimate_capacity: n_r does not vary over the window; run a load probe");
  }
  CapacityEstimate est;
  est.quantile = options.quantile;
  est.fit = stats::ols_fit(n_r, n_f);
  est.saturated = !est.fit.significant(options.alpha);

  const std::size_t width = std::max<std::size_t>(1, options.smoothing);
  // Drop partial windows at the start when enough samples remain.
  const std::size_t start = window.size() >= width - 1 + options.min_samples ? width - 1 : 0;
  const auto rate = tail_from(stats::trailing_mean(n_f, width), start);
  const auto exec = tail_from(smooth_exec_time(window, width), start);

  std::vector<double> limits, times;
  if (est.saturated) {
    const std::size_t block = std::max<std::size_t>(1, options.block_size);
    for (std::size_t b = 0; b < rate.size(); b += block) {
      const std::size_t e = std::min(rate.size(), b + block);
      const auto top = std::max_element(rate.begin() + static_cast<std::ptrdiff_t>(b),
                                        rate.begin() + static_cast<std::ptrdiff_t>(e));
      limits.push_back(*top);
      times.push_back(exec[static_cast<std::size_t>(top - rate.begin())]);
    }
  } else {
    limits = rate;
    times = exec;
  }
  est.n_limit = stats::kde_quantile(stats::kde_fit(limits), options.quantile);
  est.t_r_limit = stats::kde_quantile(stats::kde_fit(times), options.quantile);
  if (!(est.n_limit > 0.0) || !(est.t_r_limit > 0.0)) {
    throw Error("estimate_capacity: no finished requests in the window");
  }
  return est;
}

int determine_max_num_seqs(const CapacityEstimate& cap) {
  const double v = std::ceil(cap.n_limit * cap.t_r_limit - 1e-9);
  if (!std::isfinite(v)) throw Error("determine_max_num_seqs: non-finite capacity");
  return std::max(1, static_cast<int>(v));
}

MemoryModel fit_memory_model(const MetricWindow& window) {
  const auto n_r = window.column(&MetricSample::n_r);
  if (window.size() < 3 || !varies(n_r)) {
    throw Error("fit_memory_model: n_r does not vary over the window; run a load probe");
  }
  MemoryModel m;
  m.fit = stats::ols_fit(n_r, window.column(&MetricSample::m_u));
  m.slope = m.fit.slope;
  m.intercept = m.fit.intercept;
  if (m.slope < 0.0) {
    std::ostringstream os;
    os << "fit_memory_model: negative slope " << m.slope
       << " (memory cannot shrink with load; check the trace)";
    throw Error(os.str());
  }
  return m;
}

MemoryPlan determine_gpu_memory(const MemoryModel& model, int max_num_seqs,
                                const GpuDeviceSpec& device, double safety_cap) {
  if (!(safety_cap > 0.0 && safety_cap <= 1.0)) throw Error("safety_cap must be in (0, 1]");
  MemoryPlan p;
  p.fraction = model.predict(static_cast<double>(max_num_seqs));
  p.gpu_memory = std::min(p.fraction, safety_cap) * device.memory_total;
  p.parallel_size = std::max(1, static_cast<int>(std::ceil(p.fraction / safety_cap - 1e-12)));
  return p;
}

MaxTokensResult determine_max_tokens(const CommunityModel& communities, double coverage_q) {
  MaxTokensResult out;
  std::vector<double> all;
  for (const auto& c : communities.communities) {
    all.insert(all.end(), c.output_lengths.begin(), c.output_lengths.end());
  }
  if (all.empty()) return out;
  out.global = static_cast<int>(
      std::ceil(stats::kde_quantile(stats::kde_fit(all), coverage_q) - 1e-9));
  for (const auto& c : communities.communities) {
    if (c.output_lengths.size() >= kMinCommunityLengths) {
      const auto model = c.length_model ? *c.length_model : stats::kde_fit(c.output_lengths);
      out.max_tokens[c.id] =
          std::max(1, static_cast<int>(std::ceil(stats::kde_quantile(model, coverage_q) - 1e-9)));
    } else {
      out.max_tokens[c.id] = std::max(1, out.global);
      out.fallback.push_back(c.id);
    }
  }
  return out;
}

PlacementPlan solve_placement(const PlacementProblem& problem) {
  if (!(problem.demand > 0.0)) throw Error("solve_placement: demand must be > 0");
  struct Item {
    std::size_t index;
    double score;
    double n_limit;
    int upper;
  };
  std::vector<Item> items;
  double max_capacity = 0.0;
  for (std::size_t i = 0; i < problem.options.size(); ++i) {
    const auto& o = problem.options[i];
    if (o.score < 0.0) throw Error("solve_placement: negative score for " + o.gpu_type);
    const int upper = o.parallel_size > 0 ? std::max(0, o.device_count / o.parallel_size) : 0;
    if (upper == 0 || !(o.n_limit > 0.0)) continue;
    items.push_back({i, o.score, o.n_limit, upper});
    max_capacity += o.n_limit * upper;
  }
  const double need = problem.demand * (1.0 - 1e-12);
  if (max_capacity < need) {
    std::ostringstream os;
    os << "no placement covers demand " << problem.demand << " req/s; the devices sustain at most "
       << max_capacity << " req/s";
    throw InfeasibleError(os.str(), max_capacity);
  }
  // Most cost-efficient types first so good incumbents appear early.
  std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
    return a.score / a.n_limit < b.score / b.n_limit;
  });
  // Lower bound on the cost of covering `rest` with types from index i on.
  std::vector<double> best_ratio(items.size() + 1, std::numeric_limits<double>::infinity());
  std::vector<double> cap_after(items.size() + 1, 0.0);
  for (std::size_t i = items.size(); i-- > 0;) {
    best_ratio[i] = std::min(best_ratio[i + 1], items[i].score / items[i].n_limit);
    cap_after[i] = cap_after[i + 1] + items[i].n_limit * items[i].upper;
  }

  double best_cost = std::numeric_limits<double>::infinity();
  std::vector<int> best, current(items.size(), 0);
  auto search = [&](auto&& self, std::size_t i, double cost, double covered) -> void {
    if (covered >= need) {
      if (cost < best_cost - 1e-12) {
        best_cost = cost;
        best = current;
      }
      return;
    }
    if (i == items.size()) return;
    const double rest = need - covered;
    if (cap_after[i] < rest) return;
    if (cost + rest * best_ratio[i] >= best_cost - 1e-12) return;
    const Item& it = items[i];
    const int useful = std::min(it.upper, static_cast<int>(std::ceil(rest / it.n_limit)));
    for (int r = useful; r >= 0; --r) {
      current[i] = r;
      self(self, i + 1, cost + r * it.score, covered + r * it.n_limit);
    }
    current[i] = 0;
  };
  search(search, 0, 0.0, 0.0);

  PlacementPlan plan;
  plan.objective = best_cost;
  double top = 0.0;
  for (std::size_t k = 0; k < items.size(); ++k) {
    if (best[k] == 0) continue;
    const auto& o = problem.options[items[k].index];
    plan.replicas[o.gpu_type] = best[k];
    plan.capacity += best[k] * o.n_limit;
    top = std::max(top, o.n_limit);
  }
  for (const auto& [type, _] : plan.replicas) {
    for (const auto& o : problem.options) {
      if (o.gpu_type == type) plan.weights[type] = o.n_limit / top;
    }
  }
  return plan;
}

double estimate_demand(const MetricWindow& window, double quantile, std::size_t smoothing) {
  if (window.empty()) throw Error("estimate_demand: empty window");
  const auto n_a = window.column(&MetricSample::n_a);
  const std::size_t width = std::max<std::size_t>(1, smoothing);
  const std::size_t start = n_a.size() > 2 * width ? width - 1 : 0;
  const auto smoothed = tail_from(stats::trailing_mean(n_a, width), start);
  return stats::kde_quantile(stats::kde_fit(smoothed), quantile);
}

Recommendation recommend(const RecommendInputs& in) {
  Recommendation rec;
  if (in.windows.empty()) throw Error("recommend: no metric windows");

  if (in.communities && !in.communities->empty()) {
    rec.max_tokens = determine_max_tokens(*in.communities, in.coverage_q);
    for (CommunityId id : rec.max_tokens.fallback) {
      rec.warnings.push_back("community " + std::to_string(id) +
                             " has too few observations; using the global length quantile");
    }
  } else {
    rec.warnings.push_back("no request corpus; max_tokens falls back to the default " +
                           std::to_string(in.default_max_tokens));
  }
  ServiceConfig config;
  config.default_max_tokens =
      rec.max_tokens.global > 0 ? rec.max_tokens.global : in.default_max_tokens;
  config.max_tokens = rec.max_tokens.max_tokens;
  int largest_cap = config.default_max_tokens;
  for (const auto& [_, t] : config.max_tokens) largest_cap = std::max(largest_cap, t);
  const double seq_bytes =
      static_cast<double>(in.max_input_tokens + largest_cap) * in.profile.token_mem;

  if (in.demand) {
    rec.demand = *in.demand;
  } else {
    for (const auto& [type, w] : in.windows) {
      try {
        rec.demand += estimate_demand(w, 0.95, in.capacity.smoothing);
      } catch (const Error& e) {
        throw Error("gpu type " + type + ": " + e.what());
      }
    }
  }

  PlacementProblem problem;
  problem.demand = rec.demand;
  for (const auto& [type, window] : in.windows) {
    auto dev = std::find_if(in.devices.begin(), in.devices.end(),
                            [&](const GpuDeviceSpec& g) { return g.gpu_type_id == type; });
    if (dev == in.devices.end()) throw Error("recommend: no device spec for gpu type " + type);
    TypeRecommendation t;
    try {
      t.capacity = estimate_capacity(window, in.capacity);
      t.max_num_seqs = determine_max_num_seqs(t.capacity);
      t.memory = fit_memory_model(window);
      t.plan = determine_gpu_memory(t.memory, t.max_num_seqs, *dev, in.safety_cap);
    } catch (const Error& e) {
      throw Error("gpu type " + type + ": " + e.what());
    }
    // The pool must also hold the model plus one longest request.
    const double cap_bytes = dev->memory_total * in.safety_cap;
    const double needed = in.profile.static_bytes() + seq_bytes;
    while (t.plan.parallel_size <= dev->device_count &&
           t.plan.gpu_memory * t.plan.parallel_size < needed) {
      const double per_device = needed / t.plan.parallel_size;
      if (per_device <= cap_bytes) {
        t.plan.gpu_memory = per_device;
      } else {
        t.plan.gpu_memory = cap_bytes;
        ++t.plan.parallel_size;
      }
    }
    if (t.plan.parallel_size > dev->device_count) {
      t.skipped = "needs " + std::to_string(t.plan.parallel_size) + " devices per replica, " +
                  std::to_string(dev->device_count) + " available";
      rec.warnings.push_back("gpu type " + type + ": " + t.skipped);
    } else {
      t.score = std::fabs(t.plan.gpu_memory - dev->memory_total) / dev->memory_total;
      problem.options.push_back(
          {type, t.score, t.capacity.n_limit, t.plan.parallel_size, dev->device_count});
    }
    rec.per_type[type] = t;
  }
  if (problem.options.empty()) {
    throw InfeasibleError("recommend: no GPU type can host the model", 0.0);
  }
  rec.placement = solve_placement(problem);
  for (const auto& [type, n] : rec.placement.replicas) {
    const auto& t = rec.per_type[type];
    DeploymentConfig d;
    d.parallel_size = t.plan.parallel_size;
    d.gpu_memory = t.plan.gpu_memory;
    d.max_num_seqs = t.max_num_seqs;
    d.replicas = n;
    d.weight = rec.placement.weights.at(type);
    config.deployments[type] = d;
  }
  check_feasible(config, in.devices, in.profile, in.max_input_tokens);
  rec.config = std::move(config);
  return rec;
}

}  // namespace enova
