#include "enova/trace_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace enova {

using nlohmann::json;

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error("cannot format number");
  return std::string(buf, ptr);
}

double parse_number(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
    text.remove_suffix(1);
  }
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw Error("not a number: '" + std::string(text) + "'");
  }
  return v;
}

std::string read_file(const std::filesystem::path& source) {
  std::ifstream in(source, std::ios::binary);
  if (!in) throw Error("cannot open " + source.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& destination, std::string_view contents) {
  std::ofstream out(destination, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + destination.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error("write failed: " + destination.string());
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view strip_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

void write_sample_fields(const MetricSample& s, std::ostream& out) {
  out << format_number(s.ts) << ',' << format_number(s.n_f) << ','
      << format_number(s.n_r) << ',' << format_number(s.n_a) << ','
      << format_number(s.n_p) << ',' << format_number(s.t_r) << ','
      << format_number(s.m_u) << ',' << format_number(s.g_u);
}

// Parses a CSV trace with `extra` trailing columns after the eight metric
// fields. Calls on_row(sample, extra_fields, line_no) for each data row.
template <typename OnRow>
void parse_csv_trace(std::istream& in, std::string_view header, std::size_t extra,
                     OnRow&& on_row) {
  std::string line;
  std::size_t line_no = 0;
  bool seen_header = false;
  double last_ts = 0.0;
  bool have_last = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = strip_cr(line);
    if (!seen_header) {
      if (view.empty()) continue;
      if (view != header) {
        throw ParseError("expected header '" + std::string(header) + "'", line_no);
      }
      seen_header = true;
      continue;
    }
    if (view.empty()) continue;
    auto fields = split_commas(view);
    if (fields.size() != 8 + extra) {
      throw ParseError("expected " + std::to_string(8 + extra) + " fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    MetricSample s;
    double* slots[] = {&s.ts, &s.n_f, &s.n_r, &s.n_a, &s.n_p, &s.t_r, &s.m_u, &s.g_u};
    try {
      for (std::size_t i = 0; i < 8; ++i) *slots[i] = parse_number(fields[i]);
      validate(s);
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(e.what(), line_no);
    }
    if (have_last && !(s.ts > last_ts)) {
      throw ParseError("timestamps must be strictly increasing", line_no);
    }
    last_ts = s.ts;
    have_last = true;
    on_row(s, std::span<const std::string_view>(fields).subspan(8), line_no);
  }
}

std::ofstream open_for_write(const std::filesystem::path& destination) {
  std::ofstream out(destination, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + destination.string());
  return out;
}

std::ifstream open_for_read(const std::filesystem::path& source) {
  std::ifstream in(source, std::ios::binary);
  if (!in) throw Error("cannot open " + source.string());
  return in;
}

}  // namespace

void write_trace(std::span<const MetricSample> samples, std::ostream& out) {
  if (samples.empty()) return;
  out << kTraceHeader << '\n';
  for (const auto& s : samples) {
    write_sample_fields(s, out);
    out << '\n';
  }
}

void write_trace(std::span<const MetricSample> samples,
                 const std::filesystem::path& destination) {
  auto out = open_for_write(destination);
  write_trace(samples, out);
  if (!out) throw Error("write failed: " + destination.string());
}

std::vector<MetricSample> read_trace(std::istream& in) {
  std::vector<MetricSample> out;
  parse_csv_trace(in, kTraceHeader, 0,
                  [&](const MetricSample& s, auto, std::size_t) { out.push_back(s); });
  return out;
}

std::vector<MetricSample> read_trace(const std::filesystem::path& source) {
  auto in = open_for_read(source);
  return read_trace(in);
}

namespace {
constexpr std::string_view kLabeledHeader = "ts,n_f,n_r,n_a,n_p,t_r,m_u,g_u,label";
}

void write_labeled_trace(const LabeledTrace& trace, std::ostream& out) {
  if (trace.samples.size() != trace.labels.size()) {
    throw Error("labeled trace: samples and labels differ in length");
  }
  if (trace.samples.empty()) return;
  out << kLabeledHeader << '\n';
  for (std::size_t i = 0; i < trace.samples.size(); ++i) {
    write_sample_fields(trace.samples[i], out);
    out << ',' << trace.labels[i] << '\n';
  }
}

void write_labeled_trace(const LabeledTrace& trace,
                         const std::filesystem::path& destination) {
  auto out = open_for_write(destination);
  write_labeled_trace(trace, out);
  if (!out) throw Error("write failed: " + destination.string());
}

LabeledTrace read_labeled_trace(std::istream& in) {
  LabeledTrace out;
  parse_csv_trace(in, kLabeledHeader, 1,
                  [&](const MetricSample& s, std::span<const std::string_view> extra,
                      std::size_t line_no) {
                    std::string_view f = extra[0];
                    int label = 0;
                    if (f == "1" || f == "+1") {
                      label = 1;
                    } else if (f == "-1") {
                      label = -1;
                    } else {
                      throw ParseError("label must be 1 or -1", line_no);
                    }
                    out.samples.push_back(s);
                    out.labels.push_back(label);
                  });
  return out;
}

LabeledTrace read_labeled_trace(const std::filesystem::path& source) {
  auto in = open_for_read(source);
  return read_labeled_trace(in);
}

void write_requests(std::span<const RequestRecord> requests, std::ostream& out) {
  for (const auto& r : requests) {
    json j;
    j["request_id"] = r.request_id;
    j["arrival_time"] = r.arrival_time;
    j["prompt_text"] = r.prompt_text;
    j["input_length"] = r.input_length;
    j["output_length_target"] = r.output_length_target;
    j["community_id"] = r.community_id ? json(*r.community_id) : json(nullptr);
    j["start_time"] = r.start_time ? json(*r.start_time) : json(nullptr);
    j["finish_time"] = r.finish_time ? json(*r.finish_time) : json(nullptr);
    out << j.dump() << '\n';
  }
}

void write_requests(std::span<const RequestRecord> requests,
                    const std::filesystem::path& destination) {
  auto out = open_for_write(destination);
  write_requests(requests, out);
  if (!out) throw Error("write failed: " + destination.string());
}

std::vector<RequestRecord> read_requests(std::istream& in) {
  std::vector<RequestRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (strip_cr(line).empty()) continue;
    try {
      json j = json::parse(line);
      RequestRecord r;
      r.request_id = j.at("request_id").get<std::uint64_t>();
      r.arrival_time = j.at("arrival_time").get<double>();
      r.prompt_text = j.value("prompt_text", std::string());
      r.input_length = j.at("input_length").get<int>();
      r.output_length_target = j.at("output_length_target").get<int>();
      if (j.contains("community_id") && !j["community_id"].is_null()) {
        r.community_id = j["community_id"].get<int>();
      }
      if (j.contains("start_time") && !j["start_time"].is_null()) {
        r.start_time = j["start_time"].get<double>();
      }
      if (j.contains("finish_time") && !j["finish_time"].is_null()) {
        r.finish_time = j["finish_time"].get<double>();
      }
      validate(r);
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ParseError(e.what(), line_no);
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return out;
}

std::vector<RequestRecord> read_requests(const std::filesystem::path& source) {
  auto in = open_for_read(source);
  return read_requests(in);
}

std::string service_config_to_json(const ServiceConfig& config) {
  json j;
  json deps = json::object();
  for (const auto& [type, d] : config.deployments) {
    deps[type] = {{"parallel_size", d.parallel_size},
                  {"gpu_memory", d.gpu_memory},
                  {"max_num_seqs", d.max_num_seqs},
                  {"replicas", d.replicas},
                  {"weight", d.weight}};
  }
  j["deployments"] = deps;
  json tokens = json::object();
  for (const auto& [c, t] : config.max_tokens) tokens[std::to_string(c)] = t;
  j["max_tokens"] = tokens;
  j["default_max_tokens"] = config.default_max_tokens;
  return j.dump(2);
}

ServiceConfig service_config_from_json(std::string_view text) {
  try {
    json j = json::parse(text);
    ServiceConfig c;
    for (const auto& [type, d] : j.at("deployments").items()) {
      DeploymentConfig dep;
      dep.parallel_size = d.at("parallel_size").get<int>();
      dep.gpu_memory = d.at("gpu_memory").get<double>();
      dep.max_num_seqs = d.at("max_num_seqs").get<int>();
      dep.replicas = d.at("replicas").get<int>();
      dep.weight = d.value("weight", 1.0);
      if (dep.parallel_size < 1 || dep.max_num_seqs < 1 || dep.replicas < 0 ||
          !(dep.gpu_memory > 0.0) || !(dep.weight > 0.0 && dep.weight <= 1.0)) {
        throw Error("service config: invalid deployment for " + type);
      }
      c.deployments[type] = dep;
    }
    if (j.contains("max_tokens")) {
      for (const auto& [k, v] : j["max_tokens"].items()) {
        c.max_tokens[std::stoi(k)] = v.get<int>();
      }
    }
    c.default_max_tokens = j.value("default_max_tokens", 2048);
    return c;
  } catch (const json::exception& e) {
    throw Error(std::string("service config: ") + e.what());
  }
}

ServiceConfig read_service_config(const std::filesystem::path& source) {
  return service_config_from_json(read_file(source));
}

}  // namespace enova
