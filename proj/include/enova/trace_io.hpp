#pragma once

// Text formats shared by the simulator, recommender, detector and CLI.
//
// Metric trace: CSV, header `ts,n_f,n_r,n_a,n_p,t_r,m_u,g_u`, one sample per
// line. Numbers are written in shortest round-trip form so a read after a
// write reproduces every bit. An empty trace is an empty file.
//
// Labeled trace: the metric trace with a trailing `label` column (+1 normal,
// -1 anomalous).
//
// Request trace: JSON lines, one RequestRecord per line.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "enova/core.hpp"

namespace enova {

// Raised for malformed input; line() is 1-based, 0 when not line-specific.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

std::string format_number(double v);
double parse_number(std::string_view text);

inline constexpr std::string_view kTraceHeader = "ts,n_f,n_r,n_a,n_p,t_r,m_u,g_u";

void write_trace(std::span<const MetricSample> samples, std::ostream& out);
void write_trace(std::span<const MetricSample> samples,
                 const std::filesystem::path& destination);
std::vector<MetricSample> read_trace(std::istream& in);
std::vector<MetricSample> read_trace(const std::filesystem::path& source);

struct LabeledTrace {
  std::vector<MetricSample> samples;
  std::vector<int> labels;
};

void write_labeled_trace(const LabeledTrace& trace, std::ostream& out);
void write_labeled_trace(const LabeledTrace& trace,
                         const std::filesystem::path& destination);
LabeledTrace read_labeled_trace(std::istream& in);
LabeledTrace read_labeled_trace(const std::filesystem::path& source);

void write_requests(std::span<const RequestRecord> requests, std::ostream& out);
void write_requests(std::span<const RequestRecord> requests,
                    const std::filesystem::path& destination);
std::vector<RequestRecord> read_requests(std::istream& in);
std::vector<RequestRecord> read_requests(const std::filesystem::path& source);

// ServiceConfig as a JSON document.
std::string service_config_to_json(const ServiceConfig& config);
ServiceConfig service_config_from_json(std::string_view text);
ServiceConfig read_service_config(const std::filesystem::path& source);

// Whole-file helpers that throw Error naming the path on failure.
std::string read_file(const std::filesystem::path& source);
void write_file(const std::filesystem::path& destination, std::string_view contents);

}  // namespace enova
