#include "enova/core.hpp"

#include <cmath>
#include <sstream>

namespace enova {

namespace {

void require(bool ok, const char* field, const char* rule, double value) {
  if (!ok) {
    std::ostringstream os;
    os << "invalid metric sample: " << field << " " << rule << " (got "
       << value << ")";
    throw Error(os.str());
  }
}

}  // namespace

void validate(const MetricSample& s) {
  const double fields[] = {s.ts, s.n_f, s.n_r, s.n_a, s.n_p, s.t_r, s.m_u, s.g_u};
  for (double v : fields) {
    require(std::isfinite(v), "field", "must be finite", v);
  }
  require(s.ts >= 0.0, "ts", "must be >= 0", s.ts);
  require(s.n_f >= 0.0, "n_f", "must be >= 0", s.n_f);
  require(s.n_r >= 0.0, "n_r", "must be >= 0", s.n_r);
  require(s.n_a >= 0.0, "n_a", "must be >= 0", s.n_a);
  require(s.n_p >= 0.0, "n_p", "must be >= 0", s.n_p);
  require(s.t_r >= 0.0, "t_r", "must be >= 0", s.t_r);
  require(s.m_u >= 0.0 && s.m_u <= 1.0, "m_u", "must be in [0,1]", s.m_u);
  require(s.g_u >= 0.0 && s.g_u <= 1.0, "g_u", "must be in [0,1]", s.g_u);
}

std::array<double, kMetricDims> metric_vector(const MetricSample& s) {
  return {s.n_f, s.n_r, s.n_a, s.n_p, s.t_r, s.m_u, s.g_u};
}

MetricWindow::MetricWindow(std::vector<MetricSample> samples)
    : samples_(std::move(samples)) {
  for (std::size_t i = 1; i < samples_.size(); ++i) {
    if (!(samples_[i].ts > samples_[i - 1].ts)) {
      throw Error("metric window timestamps must be strictly increasing");
    }
  }
}

std::vector<double> MetricWindow::column(double MetricSample::*field) const {
  std::vector<double> out;
  out.reserve(samples_.size());
  for (const auto& s : samples_) out.push_back(s.*field);
  return out;
}

MetricWindow window(std::span<const MetricSample> samples, std::size_t w,
                    std::size_t end_index) {
  if (w == 0) throw Error("window length must be >= 1");
  if (end_index >= samples.size()) {
    throw Error("window end index " + std::to_string(end_index) +
                " beyond trace of " + std::to_string(samples.size()) +
                " samples");
  }
  if (end_index + 1 < w) {
    throw Error("insufficient history: window of " + std::to_string(w) +
                " samples needs end index >= " + std::to_string(w - 1) +
                ", got " + std::to_string(end_index));
  }
  auto first = samples.begin() + static_cast<std::ptrdiff_t>(end_index + 1 - w);
  return MetricWindow(std::vector<MetricSample>(first, first + static_cast<std::ptrdiff_t>(w)));
}

int ServiceConfig::max_tokens_for(std::optional<CommunityId> community) const {
  if (community) {
    auto it = max_tokens.find(*community);
    if (it != max_tokens.end()) return it->second;
  }
  return default_max_tokens;
}

int ServiceConfig::total_replicas() const {
  int n = 0;
  for (const auto& [_, d] : deployments) n += d.replicas;
  return n;
}

void validate(const RequestRecord& r) {
  if (r.input_length <= 0 || r.output_length_target <= 0) {
    throw Error("request " + std::to_string(r.request_id) +
                ": lengths must be positive");
  }
  if (r.start_time && *r.start_time < r.arrival_time) {
    throw Error("request " + std::to_string(r.request_id) +
                ": start before arrival");
  }
  if (r.finish_time && (!r.start_time || *r.finish_time < *r.start_time)) {
    throw Error("request " + std::to_string(r.request_id) +
                ": finish before start");
  }
}

}  // namespace enova
