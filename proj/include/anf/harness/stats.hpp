#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "anf/error.hpp"
#include "anf/harness/metrics.hpp"

namespace anf::harness {

// Mean evaluation return over the last 10% of training (eval steps > 0.9 T).
inline double final_score(const std::vector<EvalRecord>& evals, std::int64_t total_steps) {
  if (evals.size() < 10) throw UsageError("final_score: need at least 10 evaluation points");
  const double cutoff = 0.9 * static_cast<double>(total_steps);
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& e : evals)
    if (static_cast<double>(e.step) > cutoff) {
      sum += e.mean_return;
      ++n;
    }
  if (n == 0) throw UsageError("final_score: no evaluation in the last 10% of training");
  return sum / static_cast<double>(n);
}

inline double final_score(const MetricsLog& log) { return final_score(log.evals, log.total_steps); }

struct CurvePoint {
  std::int64_t step = 0;
  double mean = 0.0;
  double half_width = 0.0;  // 1.96 * sample std / sqrt(seeds)
  double lower() const { return mean - half_width; }
  double upper() const { return mean + half_width; }
};

struct MeanCi {
  double mean = 0.0;
  double half_width = 0.0;
  double std_error = 0.0;
};

inline MeanCi mean_ci(const std::vector<double>& xs) {
  MeanCi r;
  if (xs.empty()) return r;
  const auto n = static_cast<double>(xs.size());
  for (double x : xs) r.mean += x;
  r.mean /= n;
  if (xs.size() < 2) return r;
  double ss = 0.0;
  for (double x : xs) ss += (x - r.mean) * (x - r.mean);
  r.std_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  r.half_width = 1.96 * r.std_error;
  return r;
}

// Pointwise mean and normal-approximation 95% band over seeds.
inline std::vector<CurvePoint> aggregate_seeds(const std::vector<std::vector<EvalRecord>>& logs) {
  if (logs.size() < 2) throw UsageError("aggregate_seeds: need at least two logs");
  const auto& ref = logs.front();
  for (const auto& l : logs) {
    if (l.size() != ref.size()) throw UsageError("aggregate_seeds: evaluation grids differ in length");
    for (std::size_t i = 0; i < l.size(); ++i)
      if (l[i].step != ref[i].step) throw UsageError("aggregate_seeds: evaluation grids are misaligned");
  }
  std::vector<CurvePoint> out;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    std::vector<double> xs;
    for (const auto& l : logs) xs.push_back(l[i].mean_return);
    const auto m = mean_ci(xs);
    out.push_back({ref[i].step, m.mean, m.half_width});
  }
  return out;
}

// Standard error of the difference of two independent sample means.
inline double pooled_standard_error(const std::vector<double>& a, const std::vector<double>& b) {
  const auto sa = mean_ci(a).std_error, sb = mean_ci(b).std_error;
  return std::sqrt(sa * sa + sb * sb);
}

}  // namespace anf::harness
