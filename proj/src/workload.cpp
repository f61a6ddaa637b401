#include "enova/workload.hpp"

#include <algorithm>
#include <cmath>

namespace enova {

int LengthDist::sample(std::mt19937_64& rng) const {
  double v = a;
  switch (kind) {
    case Kind::kFixed:
      break;
    case Kind::kUniform:
      v = std::uniform_real_distribution<double>(a, b)(rng);
      break;
    case Kind::kLognormal:
      v = std::lognormal_distribution<double>(a, b)(rng);
      break;
  }
  return std::max(1, static_cast<int>(std::lround(v)));
}

double LengthDist::mean() const {
  switch (kind) {
    case Kind::kFixed:
      return a;
    case Kind::kUniform:
      return 0.5 * (a + b);
    case Kind::kLognormal:
      return std::exp(a + 0.5 * b * b);
  }
  return a;
}

double LengthDist::max_value() const {
  switch (kind) {
    case Kind::kFixed:
      return a;
    case Kind::kUniform:
      return b;
    case Kind::kLognormal:
      return std::exp(a + 3.719 * b);
  }
  return a;
}

void LengthDist::validate() const {
  switch (kind) {
    case Kind::kFixed:
      if (!(a >= 1.0)) throw Error("length distribution: fixed value must be >= 1");
      break;
    case Kind::kUniform:
      if (!(a >= 1.0 && b >= a)) throw Error("length distribution: need 1 <= low <= high");
      break;
    case Kind::kLognormal:
      if (!(b >= 0.0) || !std::isfinite(a)) {
        throw Error("length distribution: lognormal sigma must be >= 0");
      }
      break;
  }
}

double WorkloadSpec::rate_at(double t) const {
  if (phases.empty()) return arrival_rate;
  double rate = 0.0;
  for (const auto& p : phases) {
    if (p.start <= t) rate = p.rate;
  }
  return rate;
}

double WorkloadSpec::mean_output_length() const {
  if (communities.empty()) return output_length_dist.mean();
  double m = 0.0;
  for (const auto& c : communities) m += c.probability * c.output_length.mean();
  return m;
}

int WorkloadSpec::max_input_length() const {
  double m = input_length_dist.max_value();
  for (const auto& c : communities) m = std::max(m, c.input_length.max_value());
  return static_cast<int>(std::ceil(m));
}

void WorkloadSpec::validate() const {
  if (!(duration > 0.0)) throw Error("workload: duration must be > 0");
  if (!(arrival_rate >= 0.0)) throw Error("workload: arrival rate must be >= 0");
  for (std::size_t i = 0; i < phases.size(); ++i) {
    if (!(phases[i].rate >= 0.0)) throw Error("workload: phase rate must be >= 0");
    if (i > 0 && !(phases[i].start > phases[i - 1].start)) {
      throw Error("workload: phase starts must increase");
    }
  }
  input_length_dist.validate();
  output_length_dist.validate();
  if (!communities.empty()) {
    double total = 0.0;
    for (const auto& c : communities) {
      if (!(c.probability >= 0.0)) throw Error("workload: negative community probability");
      total += c.probability;
      c.input_length.validate();
      c.output_length.validate();
    }
    if (std::fabs(total - 1.0) > 1e-9) {
      throw Error("workload: community probabilities must sum to 1");
    }
  }
}

std::vector<RequestRecord> generate_workload(const WorkloadSpec& spec) {
  spec.validate();
  std::vector<RequestRecord> out;
  std::mt19937_64 rng(spec.rng_seed);

  // Phase boundaries, with the scalar rate as a single phase from t=0.
  std::vector<RatePhase> phases = spec.phases;
  if (phases.empty()) phases.push_back({0.0, spec.arrival_rate});
  if (phases.front().start > 0.0) phases.insert(phases.begin(), {0.0, 0.0});

  std::uint64_t next_id = 0;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t p = 0; p < phases.size(); ++p) {
    const double begin = phases[p].start;
    const double end = p + 1 < phases.size() ? std::min(phases[p + 1].start, spec.duration)
                                             : spec.duration;
    const double rate = phases[p].rate;
    if (!(rate > 0.0) || begin >= end) continue;
    std::exponential_distribution<double> gap(rate);
    double t = begin;
    while (true) {
      t += gap(rng);
      if (t >= end) break;
      RequestRecord r;
      r.request_id = next_id++;
      r.arrival_time = t;
      if (spec.communities.empty()) {
        r.input_length = spec.input_length_dist.sample(rng);
        r.output_length_target = spec.output_length_dist.sample(rng);
      } else {
        double u = unit(rng);
        const CommunitySpec* chosen = &spec.communities.back();
        for (const auto& c : spec.communities) {
          if (u < c.probability) {
            chosen = &c;
            break;
          }
          u -= c.probability;
        }
        r.community_id = chosen->id;
        r.input_length = chosen->input_length.sample(rng);
        r.output_length_target = chosen->output_length.sample(rng);
        if (!chosen->prompts.empty()) {
          std::uniform_int_distribution<std::size_t> pick(0, chosen->prompts.size() - 1);
          r.prompt_text = chosen->prompts[pick(rng)];
        }
      }
      out.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace enova
