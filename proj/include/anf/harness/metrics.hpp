#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <cereal/types/string.hpp>
#include <cereal/types/vector.hpp>

#include "anf/analytics/connectivity.hpp"
#include "anf/error.hpp"

namespace anf::harness {

struct EvalRecord {
  std::int64_t step = 0;
  double mean_return = 0.0;
  std::int64_t gradient_steps = 0;
  double critic_loss = 0.0;  // mean over train calls since the previous evaluation
  double actor_loss = 0.0;
  double actor_global_sparsity = 0.0;

  bool operator==(const EvalRecord&) const = default;

  template <class Archive>
  void serialize(Archive& ar) {
    ar(step, mean_return, gradient_steps, critic_loss, actor_loss, actor_global_sparsity);
  }
};

struct MetricsLog {
  std::vector<EvalRecord> evals;
  std::vector<analytics::ConnectivityTimeline> connectivity;
  std::vector<std::int64_t> snapshot_steps;
  std::vector<std::vector<std::int64_t>> actor_input_counts;    // per snapshot step
  std::vector<std::vector<std::size_t>> relevant_indices;       // per snapshot step
  std::int64_t total_steps = 0;
  std::size_t original_dim = 0;
  std::size_t state_dim = 0;
  std::size_t actor_params = 0;  // existing actor weights at the end
  double final_actor_global_sparsity = 0.0;

  template <class Archive>
  void serialize(Archive& ar) {
    ar(evals, connectivity, snapshot_steps, actor_input_counts, relevant_indices, total_steps, original_dim, state_dim,
       actor_params, final_actor_global_sparsity);
  }
};

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline const char* kMetricsHeader = "step,mean_return,gradient_steps,critic_loss,actor_loss,actor_global_sparsity";

inline void write_metrics_csv(const MetricsLog& log, std::ostream& os) {
  os << kMetricsHeader << '\n';
  for (const auto& e : log.evals)
    os << e.step << ',' << format_double(e.mean_return) << ',' << e.gradient_steps << ',' << format_double(e.critic_loss)
       << ',' << format_double(e.actor_loss) << ',' << format_double(e.actor_global_sparsity) << '\n';
}

inline std::vector<EvalRecord> read_metrics_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kMetricsHeader) throw IoError("metrics csv: unexpected header");
  std::vector<EvalRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) throw IoError("metrics csv: bad row '" + line + "'");
    EvalRecord e;
    e.step = std::stoll(cells[0]);
    e.mean_return = std::stod(cells[1]);
    e.gradient_steps = std::stoll(cells[2]);
    e.critic_loss = std::stod(cells[3]);
    e.actor_loss = std::stod(cells[4]);
    e.actor_global_sparsity = std::stod(cells[5]);
    out.push_back(e);
  }
  return out;
}

}  // namespace anf::harness
