#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "anf/analytics/connectivity.hpp"
#include "anf/error.hpp"

namespace anf::analytics {

namespace detail {

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ls(line);
  while (std::getline(ls, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace detail

inline constexpr const char* kTimelineHeader = "step,relevant_mean,noise_mean,network";
inline constexpr const char* kSnapshotHeader = "step,neuron_index,count,is_relevant";

// Timeline CSV; an absent noise mean is an empty cell.
inline void write_timeline_csv(const std::vector<ConnectivityTimeline>& timelines, std::ostream& os) {
  os << kTimelineHeader << '\n';
  for (const auto& t : timelines)
    for (std::size_t i = 0; i < t.size(); ++i)
      os << t.steps[i] << ',' << detail::num(t.relevant_mean[i]) << ','
         << (t.noise_mean[i] ? detail::num(*t.noise_mean[i]) : std::string()) << ',' << t.network << '\n';
}

inline std::vector<ConnectivityTimeline> read_timeline_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kTimelineHeader) throw IoError("timeline csv: unexpected header");
  std::vector<ConnectivityTimeline> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = detail::split(line);
    if (cells.size() != 4) throw IoError("timeline csv: bad row '" + line + "'");
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& t) { return t.network == cells[3]; });
    if (it == out.end()) {
      out.push_back(ConnectivityTimeline{cells[3], {}, {}, {}});
      it = std::prev(out.end());
    }
    it->steps.push_back(std::stoll(cells[0]));
    it->relevant_mean.push_back(std::stod(cells[1]));
    it->noise_mean.push_back(cells[2].empty() ? std::nullopt : std::optional<double>(std::stod(cells[2])));
  }
  return out;
}

inline void write_snapshot_csv(const std::vector<NeuronSnapshot>& snaps, std::ostream& os) {
  os << kSnapshotHeader << '\n';
  for (const auto& s : snaps)
    for (std::size_t j = 0; j < s.counts.size(); ++j)
      os << s.step << ',' << j << ',' << s.counts[j] << ',' << (s.relevant[j] ? 1 : 0) << '\n';
}

inline std::vector<NeuronSnapshot> read_snapshot_csv(std::istream& is, const std::string& network = "actor") {
  std::string line;
  if (!std::getline(is, line) || line != kSnapshotHeader) throw IoError("snapshot csv: unexpected header");
  std::vector<NeuronSnapshot> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = detail::split(line);
    if (cells.size() != 4) throw IoError("snapshot csv: bad row '" + line + "'");
    const auto step = std::stoll(cells[0]);
    if (out.empty() || out.back().step != step) {
      out.push_back(NeuronSnapshot{step, network, {}, {}});
    }
    out.back().counts.push_back(std::stoll(cells[2]));
    out.back().relevant.push_back(cells[3] == "1");
  }
  return out;
}

// A named series for the SVG line chart.
struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> band;  // optional symmetric half-width per point
};

// Minimal self-contained SVG line chart: one <polyline> per series, plus a
// translucent <polygon> for each series that carries a band.
inline std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                                  const std::vector<Series>& series) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  const double W = 640, H = 400, L = 70, R = 160, T = 40, B = 50;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double b = i < s.band.size() ? s.band[i] : 0.0;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i] - b);
      y1 = std::max(y1, s.y[i] + b);
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
  char buf[128];
  auto f = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">" << x_label << "</text>\n";
  os << "<text x=\"15\" y=\"" << (T + H - B) / 2 << "\" transform=\"rotate(-90 15 " << (T + H - B) / 2
     << ")\" text-anchor=\"middle\">" << y_label << "</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double yv = y0 + (y1 - y0) * k / 4.0, xv = x0 + (x1 - x0) * k / 4.0;
    os << "<text x=\"" << L - 5 << "\" y=\"" << f(py(yv) + 4) << "\" text-anchor=\"end\">" << f(yv) << "</text>\n";
    os << "<text x=\"" << f(px(xv)) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << f(xv) << "</text>\n";
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = palette[k % 8];
    if (!s.band.empty() && s.band.size() == s.x.size()) {
      os << "<polygon fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) os << f(px(s.x[i])) << ',' << f(py(s.y[i] + s.band[i])) << ' ';
      for (std::size_t i = s.x.size(); i-- > 0;) os << f(px(s.x[i])) << ',' << f(py(s.y[i] - s.band[i])) << ' ';
      os << "\"/>\n";
    }
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) os << f(px(s.x[i])) << ',' << f(py(s.y[i])) << (i + 1 < s.x.size() ? " " : "");
    os << "\"/>\n";
    os << "<text x=\"" << W - R + 10 << "\" y=\"" << T + 16 * (k + 1) << "\" fill=\"" << color << "\">" << s.name << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

// Bar chart of per-neuron connection counts; relevant neurons highlighted.
inline std::string neuron_bar_svg(const NeuronSnapshot& snap, const std::string& title) {
  const double W = 640, H = 300, L = 50, R = 20, T = 40, B = 40;
  const auto n = snap.counts.size();
  const double maxc = n ? static_cast<double>(*std::max_element(snap.counts.begin(), snap.counts.end())) : 1.0;
  const double bw = n ? (W - L - R) / static_cast<double>(n) : 0.0;
  std::ostringstream os;
  char buf[64];
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  for (std::size_t j = 0; j < n; ++j) {
    const double h = maxc > 0 ? static_cast<double>(snap.counts[j]) / maxc * (H - T - B) : 0.0;
    std::snprintf(buf, sizeof buf, "%.2f", L + bw * static_cast<double>(j));
    os << "<rect x=\"" << buf << "\" y=\"";
    std::snprintf(buf, sizeof buf, "%.2f", H - B - h);
    os << buf << "\" width=\"";
    std::snprintf(buf, sizeof buf, "%.2f", std::max(bw - 0.5, 0.5));
    os << buf << "\" height=\"";
    std::snprintf(buf, sizeof buf, "%.2f", h);
    os << buf << "\" fill=\"" << (snap.relevant[j] ? "#d62728" : "#1f77b4") << "\"/>\n";
  }
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">input neuron</text>\n";
  os << "</svg>\n";
  return os.str();
}

inline std::vector<Series> timeline_series(const ConnectivityTimeline& t) {
  Series rel{t.network + " relevant", {}, {}, {}}, noise{t.network + " noise", {}, {}, {}};
  for (std::size_t i = 0; i < t.size(); ++i) {
    rel.x.push_back(static_cast<double>(t.steps[i]));
    rel.y.push_back(t.relevant_mean[i]);
    if (t.noise_mean[i]) {
      noise.x.push_back(static_cast<double>(t.steps[i]));
      noise.y.push_back(*t.noise_mean[i]);
    }
  }
  std::vector<Series> out{rel};
  if (!noise.x.empty()) out.push_back(noise);
  return out;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  os << content;
  if (!os) throw IoError("write failed for " + path);
}

}  // namespace anf::analytics
