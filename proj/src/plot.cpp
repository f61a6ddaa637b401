#include "enova/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "enova/trace_io.hpp"

namespace enova {

namespace {

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void settle() {
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-12) {
      const double pad = std::max(std::abs(hi) * 0.05, 0.5);
      lo -= pad;
      hi += pad;
    }
  }
};

void render_panel(std::ostringstream& out, const Chart& chart, double top, int width, int height) {
  const double left = 70, right = 150, pad_top = 28, pad_bottom = 40;
  const double pw = width - left - right, ph = height - pad_top - pad_bottom;
  const double y0 = top + pad_top;

  auto ty = [&](double v) { return chart.log_y ? std::log10(std::max(v, 1e-12)) : v; };
  Range xr, yr;
  for (const auto& s : chart.series) {
    for (double v : s.x) xr.add(v);
    for (double v : s.y) yr.add(ty(v));
  }
  xr.settle();
  yr.settle();
  auto px = [&](double v) { return left + (v - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double v) { return y0 + ph - (ty(v) - yr.lo) / (yr.hi - yr.lo) * ph; };

  out << "<text x=\"" << fixed(left) << "\" y=\"" << fixed(top + 18)
      << "\" font-size=\"14\" font-weight=\"bold\">" << escape(chart.title) << "</text>\n";
  out << "<rect x=\"" << fixed(left) << "\" y=\"" << fixed(y0) << "\" width=\"" << fixed(pw)
      << "\" height=\"" << fixed(ph) << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = xr.lo + (xr.hi - xr.lo) * i / 4.0;
    const double fy = yr.lo + (yr.hi - yr.lo) * i / 4.0;
    const double gx = left + pw * i / 4.0, gy = y0 + ph - ph * i / 4.0;
    out << "<text x=\"" << fixed(gx) << "\" y=\"" << fixed(y0 + ph + 14)
        << "\" font-size=\"10\" text-anchor=\"middle\">" << tick_label(fx) << "</text>\n";
    out << "<text x=\"" << fixed(left - 4) << "\" y=\"" << fixed(gy + 3)
        << "\" font-size=\"10\" text-anchor=\"end\">"
        << tick_label(chart.log_y ? std::pow(10.0, fy) : fy) << "</text>\n";
  }
  out << "<text x=\"" << fixed(left + pw / 2) << "\" y=\"" << fixed(y0 + ph + 32)
      << "\" font-size=\"11\" text-anchor=\"middle\">" << escape(chart.x_label) << "</text>\n";
  out << "<text x=\"14\" y=\"" << fixed(y0 + ph / 2) << "\" font-size=\"11\" text-anchor=\"middle\""
      << " transform=\"rotate(-90 14 " << fixed(y0 + ph / 2) << ")\">" << escape(chart.y_label)
      << "</text>\n";

  for (std::size_t k = 0; k < chart.series.size(); ++k) {
    const auto& s = chart.series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    const std::size_t n = std::min(s.x.size(), s.y.size());
    if (s.points) {
      for (std::size_t i = 0; i < n; ++i) {
        out << "<circle cx=\"" << fixed(px(s.x[i])) << "\" cy=\"" << fixed(py(s.y[i]))
            << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
      }
    } else if (n > 0) {
      out << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << color << "\" points=\"";
      for (std::size_t i = 0; i < n; ++i) {
        out << (i ? " " : "") << fixed(px(s.x[i])) << "," << fixed(py(s.y[i]));
      }
      out << "\"/>\n";
    }
    const double ly = y0 + 12 + 16 * static_cast<double>(k);
    out << "<rect x=\"" << fixed(left + pw + 10) << "\" y=\"" << fixed(ly - 8)
        << "\" width=\"10\" height=\"10\" fill=\"" << color << "\"/>\n";
    out << "<text x=\"" << fixed(left + pw + 24) << "\" y=\"" << fixed(ly)
        << "\" font-size=\"11\">" << escape(s.label) << "</text>\n";
  }
}

}  // namespace

std::string render_svg(const std::vector<Chart>& panels, int width, int panel_height) {
  std::ostringstream out;
  const int height = panel_height * static_cast<int>(std::max<std::size_t>(panels.size(), 1));
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" font-family=\"sans-serif\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t i = 0; i < panels.size(); ++i) {
    render_panel(out, panels[i], static_cast<double>(panel_height) * static_cast<double>(i), width,
                 panel_height);
  }
  out << "</svg>\n";
  return out.str();
}

std::string to_csv(const std::vector<std::string>& header,
                   const std::vector<std::vector<double>>& rows) {
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
  out += '\n';
  for (const auto& row : rows) {
    if (row.size() != header.size()) throw Error("csv: row width does not match header");
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + format_number(row[i]);
    out += '\n';
  }
  return out;
}

std::vector<Chart> trace_charts(const std::vector<MetricSample>& trace, const std::string& title) {
  auto series = [&](const char* label, double MetricSample::*f) {
    Series s{label, {}, {}, false};
    for (const auto& m : trace) {
      s.x.push_back(m.ts);
      s.y.push_back(m.*f);
    }
    return s;
  };
  return {
      Chart{title + ": requests", "time (s)", "requests",
            {series("running", &MetricSample::n_r), series("pending", &MetricSample::n_p)}, false},
      Chart{title + ": rates", "time (s)", "req/s",
            {series("arriving", &MetricSample::n_a), series("finished", &MetricSample::n_f)},
            false},
      Chart{title + ": utilization", "time (s)", "fraction",
            {series("memory", &MetricSample::m_u), series("compute", &MetricSample::g_u)}, false},
  };
}

std::vector<std::array<double, 2>> pca_2d(const std::vector<EmbeddingVector>& vectors) {
  if (vectors.empty()) return {};
  const auto n = static_cast<Eigen::Index>(vectors.size());
  const auto d = static_cast<Eigen::Index>(vectors.front().size());
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(vectors[i].size()) != d) throw Error("pca: ragged vectors");
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = vectors[i][j];
  }
  x.rowwise() -= x.colwise().mean();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(x.transpose() * x);
  std::vector<std::array<double, 2>> out(vectors.size(), {0.0, 0.0});
  for (int c = 0; c < 2 && c < d; ++c) {
    Eigen::VectorXd axis = eig.eigenvectors().col(d - 1 - c);
    Eigen::Index at = 0;
    axis.cwiseAbs().maxCoeff(&at);
    if (axis(at) < 0) axis = -axis;
    const Eigen::VectorXd proj = x * axis;
    for (Eigen::Index i = 0; i < n; ++i) out[i][c] = proj(i);
  }
  return out;
}

}  // namespace enova
