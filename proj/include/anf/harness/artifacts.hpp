#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "anf/analytics/export.hpp"
#include "anf/harness/stats.hpp"
#include "anf/harness/training.hpp"

namespace anf::harness {

inline void append_manifest(const std::filesystem::path& path, const nlohmann::json& record) {
  std::ofstream os(path, std::ios::app);
  if (!os) throw IoError("cannot append to manifest " + path.string());
  os << record.dump() << '\n';
  if (!os) throw IoError("write failed for manifest " + path.string());
}

inline nlohmann::json manifest_base(const ExperimentConfig& cfg, std::uint64_t seed) {
  return {{"config_hash", hex64(config_hash(cfg))},
          {"name", cfg.name},
          {"seed", seed},
          {"env", cfg.env},
          {"algorithm", agents::to_string(cfg.algorithm)},
          {"variant", agents::to_string(cfg.variant)},
          {"noise_fraction", cfg.ene.noise_fraction},
          {"d_og", cfg.original_state_dim()},
          {"d_ene", cfg.ene_state_dim()},
          {"total_steps", cfg.run.total_steps}};
}

inline std::optional<double> try_final_score(const MetricsLog& log) {
  try {
    return final_score(log);
  } catch (const UsageError&) {
    return std::nullopt;
  }
}

struct RunOutcome {
  MetricsLog log;
  std::optional<double> score;
  double wall_seconds = 0.0;
};

inline void write_run_files(const MetricsLog& log, const std::filesystem::path& dir, bool svg) {
  {
    std::ofstream os(dir / "metrics.csv");
    if (!os) throw IoError("cannot write " + (dir / "metrics.csv").string());
    write_metrics_csv(log, os);
  }
  {
    std::ofstream os(dir / "connectivity.csv");
    if (!os) throw IoError("cannot write " + (dir / "connectivity.csv").string());
    analytics::write_timeline_csv(log.connectivity, os);
  }
  std::vector<analytics::NeuronSnapshot> snaps;
  for (std::size_t i = 0; i < log.snapshot_steps.size(); ++i) {
    analytics::NeuronSnapshot s{log.snapshot_steps[i], "actor", log.actor_input_counts[i], {}};
    s.relevant.assign(s.counts.size(), false);
    for (auto r : log.relevant_indices[i])
      if (r < s.relevant.size()) s.relevant[r] = true;
    snaps.push_back(std::move(s));
  }
  {
    std::ofstream os(dir / "snapshots.csv");
    if (!os) throw IoError("cannot write " + (dir / "snapshots.csv").string());
    analytics::write_snapshot_csv(snaps, os);
  }
  if (svg) {
    analytics::Series curve{"return", {}, {}, {}};
    for (const auto& e : log.evals) {
      curve.x.push_back(static_cast<double>(e.step));
      curve.y.push_back(e.mean_return);
    }
    analytics::write_text_file((dir / "learning_curve.svg").string(),
                               analytics::line_chart_svg("Evaluation return", "env steps", "return", {curve}));
    std::vector<analytics::Series> conn;
    for (const auto& t : log.connectivity) {
      auto s = analytics::timeline_series(t);
      conn.insert(conn.end(), s.begin(), s.end());
    }
    if (!conn.empty())
      analytics::write_text_file((dir / "connectivity.svg").string(),
                                 analytics::line_chart_svg("Average input-layer connections", "env steps",
                                                           "connections per input neuron", conn));
    if (!snaps.empty())
      analytics::write_text_file((dir / "neurons_final.svg").string(),
                                 analytics::neuron_bar_svg(snaps.back(), "Actor connections per input neuron"));
  }
}

// Full artifact-producing run: manifest "started" record first, periodic and
// final checkpoints, CSV outputs, then a "completed" (or "failed") record.
inline RunOutcome execute_run(const ExperimentConfig& cfg, std::uint64_t seed, const std::filesystem::path& dir,
                              const std::filesystem::path& manifest, const std::string& resume_from = "", bool svg = false) {
  std::filesystem::create_directories(dir);
  auto rec = manifest_base(cfg, seed);
  rec["event"] = "started";
  rec["run_dir"] = dir.string();
  append_manifest(manifest, rec);
  const auto t0 = std::chrono::steady_clock::now();
  TrainingSession<Real> session(cfg, seed);
  try {
    if (!resume_from.empty()) session.load_checkpoint(resume_from);
    session.run(std::nullopt, (dir / "checkpoint.bin").string());
    session.save_checkpoint((dir / "checkpoint.bin").string());
  } catch (const std::exception& e) {
    auto fail = manifest_base(cfg, seed);
    fail["event"] = "failed";
    fail["error"] = e.what();
    fail["step"] = session.step();
    append_manifest(manifest, fail);
    throw;
  }
  RunOutcome out;
  out.log = session.log();
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.score = try_final_score(out.log);
  write_run_files(out.log, dir, svg);
  auto done = manifest_base(cfg, seed);
  done["event"] = "completed";
  done["final_score"] = out.score ? nlohmann::json(*out.score) : nlohmann::json(nullptr);
  done["actor_params"] = out.log.actor_params;
  done["actor_global_sparsity"] = out.log.final_actor_global_sparsity;
  done["gradient_steps"] = session.gradient_steps();
  done["wall_seconds"] = out.wall_seconds;
  append_manifest(manifest, done);
  return out;
}

}  // namespace anf::harness
