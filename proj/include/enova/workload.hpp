#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "enova/core.hpp"

namespace enova {

// Token-length distribution; samples are rounded and clamped to >= 1.
struct LengthDist {
  enum class Kind { kFixed, kUniform, kLognormal };

  Kind kind = Kind::kFixed;
  double a = 128.0;  // fixed value | uniform low | lognormal mu
  double b = 0.0;    // uniform high | lognormal sigma

  static LengthDist fixed(double v) { return {Kind::kFixed, v, 0.0}; }
  static LengthDist uniform(double lo, double hi) { return {Kind::kUniform, lo, hi}; }
  static LengthDist lognormal(double mu, double sigma) { return {Kind::kLognormal, mu, sigma}; }

  int sample(std::mt19937_64& rng) const;
  double mean() const;
  double max_value() const;  // upper support bound; lognormal uses its 0.9999 quantile
  void validate() const;
};

struct CommunitySpec {
  CommunityId id = 0;
  double probability = 1.0;
  LengthDist input_length;
  LengthDist output_length;
  std::vector<std::string> prompts;
};

// Piecewise-constant arrival rate: `rate` applies from `start` until the next
// phase begins.
struct RatePhase {
  double start = 0.0;
  double rate = 0.0;
};

struct WorkloadSpec {
  double arrival_rate = 1.0;      // req/s, used when phases is empty
  std::vector<RatePhase> phases;  // optional schedule overriding arrival_rate
  LengthDist input_length_dist = LengthDist::fixed(128);
  LengthDist output_length_dist = LengthDist::fixed(128);
  std::vector<CommunitySpec> communities;  // empty: one unlabeled task type
  double duration = 900.0;
  std::uint64_t rng_seed = 1;

  double rate_at(double t) const;
  double mean_output_length() const;
  int max_input_length() const;
  void validate() const;
};

// Poisson arrivals (homogeneous within each phase) with lengths, community
// and prompt drawn per request. Deterministic in rng_seed.
std::vector<RequestRecord> generate_workload(const WorkloadSpec& spec);

}  // namespace enova
