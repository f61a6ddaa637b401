#pragma once

// Static SVG charts and CSV tables for the figure analogs. Output only.

#include <array>
#include <string>
#include <vector>

#include "enova/core.hpp"
#include "enova/embedding.hpp"

namespace enova {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool points = false;  // scatter instead of a polyline
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  bool log_y = false;
};

// Panels stacked vertically in one document. Byte-stable for equal input.
std::string render_svg(const std::vector<Chart>& panels, int width = 720, int panel_height = 260);

// Comma-separated table; cells use the shortest round-trip number form.
std::string to_csv(const std::vector<std::string>& header,
                   const std::vector<std::vector<double>>& rows);

// Time-series panels of a metric trace: requests (n_r, n_p), rates (n_a,
// n_f) and utilization (m_u, g_u).
std::vector<Chart> trace_charts(const std::vector<MetricSample>& trace, const std::string& title);

// Projection onto the two leading principal components. Rows are centered;
// component signs are fixed so the largest-magnitude loading is positive.
std::vector<std::array<double, 2>> pca_2d(const std::vector<EmbeddingVector>& vectors);

}  // namespace enova
