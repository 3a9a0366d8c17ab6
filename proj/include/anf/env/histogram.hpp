#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "anf/error.hpp"
#include "anf/rng.hpp"

namespace anf::env {

// Piecewise-uniform density: a bin is drawn from the pmf, then a value
// uniformly inside it.
struct HistogramDistribution {
  std::vector<double> bin_edges;  // sorted, size = pmf.size() + 1
  std::vector<double> pmf;

  void validate() const {
    if (pmf.empty() || bin_edges.size() != pmf.size() + 1) throw ConfigError("histogram: need len(pmf) = len(edges) - 1 > 0");
    if (!std::is_sorted(bin_edges.begin(), bin_edges.end())) throw ConfigError("histogram: bin edges must be sorted");
    double sum = 0.0;
    for (double p : pmf) {
      if (!(p >= 0.0)) throw ConfigError("histogram: pmf entries must be non-negative");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("histogram: pmf must sum to 1");
  }

  double sample(Rng& rng) const {
    const double u = rng.uniform();
    double acc = 0.0;
    std::size_t bin = pmf.size() - 1;
    for (std::size_t i = 0; i < pmf.size(); ++i) {
      acc += pmf[i];
      if (u < acc) {
        bin = i;
        break;
      }
    }
    // skip trailing zero-mass bins reached through rounding of the cumulative sum
    while (bin > 0 && pmf[bin] == 0.0) --bin;
    const double lo = bin_edges[bin], hi = bin_edges[bin + 1];
    return lo == hi ? lo : rng.uniform(lo, hi);
  }

  bool operator==(const HistogramDistribution&) const = default;
};

inline void to_json(nlohmann::json& j, const HistogramDistribution& h) {
  j = nlohmann::json{{"bin_edges", h.bin_edges}, {"pmf", h.pmf}};
}
inline void from_json(const nlohmann::json& j, HistogramDistribution& h) {
  j.at("bin_edges").get_to(h.bin_edges);
  j.at("pmf").get_to(h.pmf);
}

// One equal-width histogram per column of `records` (rows are states),
// spanning the observed min..max. Constant columns get a single zero-width bin.
inline std::vector<HistogramDistribution> fit_histograms(const Eigen::MatrixXd& records, int bins) {
  if (records.rows() < 1000) throw ConfigError("fit_histograms: at least 1000 recorded states are required");
  if (bins < 1) throw ConfigError("fit_histograms: bins must be positive");
  std::vector<HistogramDistribution> out;
  const auto n = static_cast<double>(records.rows());
  for (Eigen::Index f = 0; f < records.cols(); ++f) {
    const double lo = records.col(f).minCoeff(), hi = records.col(f).maxCoeff();
    HistogramDistribution h;
    if (!(hi > lo)) {
      h.bin_edges = {lo, lo};
      h.pmf = {1.0};
      out.push_back(std::move(h));
      continue;
    }
    const double width = (hi - lo) / bins;
    std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
    for (Eigen::Index r = 0; r < records.rows(); ++r) {
      auto b = static_cast<int>((records(r, f) - lo) / width);
      counts[static_cast<std::size_t>(std::clamp(b, 0, bins - 1))] += 1.0;
    }
    h.bin_edges.resize(static_cast<std::size_t>(bins) + 1);
    for (int i = 0; i <= bins; ++i) h.bin_edges[static_cast<std::size_t>(i)] = lo + width * i;
    h.bin_edges.back() = hi;
    h.pmf.resize(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) h.pmf[i] = counts[i] / n;
    const double sum = std::accumulate(h.pmf.begin(), h.pmf.end(), 0.0);
    for (auto& p : h.pmf) p /= sum;
    out.push_back(std::move(h));
  }
  return out;
}

// Noise feature j is drawn from histogram j mod (number of histograms).
inline Eigen::VectorXd sample_imitated(const std::vector<HistogramDistribution>& histograms, std::size_t count, Rng& rng) {
  if (histograms.empty()) throw ConfigError("sample_imitated: no histograms");
  Eigen::VectorXd out(static_cast<Eigen::Index>(count));
  for (std::size_t j = 0; j < count; ++j) out(static_cast<Eigen::Index>(j)) = histograms[j % histograms.size()].sample(rng);
  return out;
}

inline void save_histograms(const std::vector<HistogramDistribution>& hs, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write histogram file " + path);
  os << nlohmann::json(hs).dump(1) << '\n';
  if (!os) throw IoError("write failed for " + path);
}

inline std::vector<HistogramDistribution> load_histograms(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read histogram file " + path);
  std::vector<HistogramDistribution> hs;
  try {
    hs = nlohmann::json::parse(is).get<std::vector<HistogramDistribution>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad histogram file " + path + ": " + e.what());
  }
  for (const auto& h : hs) h.validate();
  return hs;
}

// Recorded rollouts: CSV with header f0,f1,...; one state per row.
inline void save_rollouts_csv(const Eigen::MatrixXd& records, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write rollout file " + path);
  for (Eigen::Index c = 0; c < records.cols(); ++c) os << (c ? "," : "") << 'f' << c;
  os << '\n';
  char buf[32];
  for (Eigen::Index r = 0; r < records.rows(); ++r) {
    for (Eigen::Index c = 0; c < records.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", records(r, c));
      os << (c ? "," : "") << buf;
    }
    os << '\n';
  }
}

inline Eigen::MatrixXd load_rollouts_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read rollout file " + path);
  std::string line;
  if (!std::getline(is, line)) throw IoError("empty rollout file " + path);
  const auto cols = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ',') + 1);
  std::vector<double> values;
  Eigen::Index rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    Eigen::Index c = 0;
    while (std::getline(ls, cell, ',')) {
      values.push_back(std::stod(cell));
      ++c;
    }
    if (c != cols) throw IoError("rollout file " + path + ": row " + std::to_string(rows + 2) + " has wrong column count");
    ++rows;
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = values[static_cast<std::size_t>(r * cols + c)];
  return m;
}

}  // namespace anf::env
