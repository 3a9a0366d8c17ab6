#pragma once

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "anf/dst/sparsity.hpp"
#include "anf/env/histogram.hpp"
#include "anf/harness/artifacts.hpp"
#include "anf/harness/stats.hpp"

namespace anf::harness {

struct SuiteEntry {
  std::string label;
  ExperimentConfig config;
};

struct SuiteDefinition {
  std::string name;
  std::string description;
  std::vector<SuiteEntry> entries;
};

inline std::vector<std::string> suite_names() {
  return {"ene",          "noise-sweep", "louder-noise",   "pene",          "imitate",
          "static-ablation", "sparsity-sweep", "noise-mean", "matching-sparsity"};
}

// States visited by the scripted controller on the noise-free task; the
// stand-in for a trained agent's state distribution.
inline Eigen::MatrixXd record_scripted_states(const std::string& env_name, std::int64_t horizon, std::size_t min_states,
                                              std::uint64_t seed) {
  auto e = env::make_builtin_env(env_name, horizon);
  Rng rng(seed);
  std::vector<env::State> states;
  while (states.size() < min_states) {
    auto s = e->reset(rng);
    for (;;) {
      states.push_back(s);
      auto r = e->step(*e->scripted_action(s));
      s = r.state;
      if (r.done()) break;
    }
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(states.size()), static_cast<Eigen::Index>(e->state_dim()));
  for (std::size_t i = 0; i < states.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = states[i].transpose();
  return m;
}

namespace detail {

inline std::string variant_label(const ExperimentConfig& c) {
  std::string alg = agents::to_string(c.algorithm);
  for (auto& ch : alg) ch = static_cast<char>(std::toupper(ch));
  switch (c.variant) {
    case agents::Variant::dense: return alg;
    case agents::Variant::anf: return "ANF-" + alg;
    case agents::Variant::static_anf: return "Static-ANF-" + alg;
    case agents::Variant::sparser_anf: {
      std::ostringstream os;
      os << "Sparser(" << std::lround(*c.sparsity.global_sparsity * 100) << "%)-ANF-" << alg;
      return os.str();
    }
  }
  return alg;
}

inline ExperimentConfig with_variant(ExperimentConfig c, agents::Variant v) {
  c.variant = v;
  return c;
}

inline ExperimentConfig with_algorithm(ExperimentConfig c, agents::Algorithm a) {
  auto hidden = c.agent.hidden;
  c.algorithm = a;
  c.agent = agents::AgentHyperparams::defaults(a);
  c.agent.hidden = hidden;
  return c;
}

inline std::string fmt(double v, int prec = 2) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v;
  return os.str();
}

}  // namespace detail

// Config cross-products mirroring the experiment families. `base` supplies
// env, run length and every unswept setting.
inline SuiteDefinition make_suite(const std::string& name, const ExperimentConfig& base) {
  using agents::Algorithm;
  using agents::Variant;
  using detail::variant_label;
  using detail::with_variant;
  SuiteDefinition def;
  def.name = name;
  auto add = [&](ExperimentConfig c, std::string label) {
    c.name = name + "/" + label;
    def.entries.push_back({std::move(label), std::move(c)});
  };
  auto anf_dense = [&](const ExperimentConfig& c, const std::string& suffix) {
    for (auto v : {Variant::anf, Variant::dense}) {
      auto cv = with_variant(c, v);
      add(cv, variant_label(cv) + suffix);
    }
  };
  if (name == "ene") {
    def.description = "ANF vs dense for TD3 and SAC at the base noise fraction";
    for (auto a : {Algorithm::td3, Algorithm::sac}) anf_dense(detail::with_algorithm(base, a), "");
  } else if (name == "noise-sweep") {
    def.description = "noise fraction sweep";
    for (double nf : {0.8, 0.9, 0.95, 0.98, 0.99}) {
      auto c = base;
      c.ene.noise_fraction = nf;
      anf_dense(c, " n_f=" + detail::fmt(nf));
    }
  } else if (name == "louder-noise") {
    def.description = "noise amplitude sweep";
    for (double sigma : {1.0, 2.0, 4.0, 8.0, 16.0}) {
      auto c = base;
      c.ene.noise_amplitude = sigma;
      anf_dense(c, " sigma=" + detail::fmt(sigma, 0));
    }
  } else if (name == "pene") {
    def.description = "permuted ENE, four sub-environments";
    auto c = base;
    c.pene.enabled = true;
    c.pene.period = 0;
    // each sub-environment gets the base run's budget and the buffer holds one of them
    c.run.total_steps = 4 * base.run.total_steps;
    c.run.buffer_capacity = std::clamp<std::size_t>(static_cast<std::size_t>(base.run.total_steps), 1, c.run.buffer_capacity);
    anf_dense(c, " PENE");
  } else if (name == "imitate") {
    def.description = "noise imitating the original feature distributions";
    auto c = base;
    c.ene.distribution = env::NoiseDistribution::imitate;
    if (c.ene.imitate_histograms.empty())
      c.ene.imitate_histograms = env::fit_histograms(record_scripted_states(c.env, c.horizon, 5000, 12345), c.histogram_bins);
    anf_dense(c, " imitate");
  } else if (name == "static-ablation") {
    def.description = "dynamic vs frozen sparse topology";
    for (auto v : {Variant::anf, Variant::static_anf, Variant::dense}) {
      auto c = with_variant(base, v);
      add(c, variant_label(c));
    }
  } else if (name == "sparsity-sweep") {
    def.description = "global sparsity sweep with sparse hidden layers";
    add(with_variant(base, Variant::anf), variant_label(with_variant(base, Variant::anf)));
    for (double s : {0.80, 0.90, 0.95, 0.98}) {
      auto c = with_variant(base, Variant::sparser_anf);
      c.sparsity.global_sparsity = s;
      add(c, variant_label(c));
    }
    add(with_variant(base, Variant::dense), variant_label(with_variant(base, Variant::dense)));
  } else if (name == "noise-mean") {
    def.description = "non-zero-centered noise N(mu, 1) at n_f = 0.98";
    for (double mu : {0.0, 1.0, -2.0, 4.0}) {
      auto c = base;
      c.ene.noise_fraction = 0.98;
      c.ene.noise_mean = mu;
      anf_dense(c, " mu=" + detail::fmt(mu, 0));
    }
  } else if (name == "matching-sparsity") {
    def.description = "input-layer sparsity matched to the noise fraction vs fixed 80%";
    for (double nf : {0.9, 0.95, 0.98, 0.99}) {
      auto c = with_variant(base, Variant::anf);
      c.ene.noise_fraction = nf;
      auto matched = c;
      matched.sparsity.input_layer_sparsity = nf;
      add(matched, variant_label(c) + " s_i=n_f n_f=" + detail::fmt(nf));
      c.sparsity.input_layer_sparsity = 0.8;
      add(c, variant_label(c) + " s_i=0.80 n_f=" + detail::fmt(nf));
    }
  } else {
    std::string names;
    for (const auto& n : suite_names()) names += (names.empty() ? "" : ", ") + n;
    throw ConfigError("unknown suite '" + name + "'; available: " + names);
  }
  return def;
}

struct SuiteRun {
  std::string label;
  std::uint64_t seed = 0;
  bool ok = false;
  std::optional<double> score;
  std::size_t actor_params = 0;
  std::string error;
};

struct SuiteRow {
  std::string label;
  std::string algorithm;
  std::string env;
  double mean = 0.0;
  double ci_half_width = 0.0;
  std::size_t params = 0;  // actor weights
  std::size_t runs_ok = 0;
  std::size_t runs_failed = 0;
};

struct SuiteResult {
  std::string name;
  std::vector<SuiteRun> runs;
  std::vector<SuiteRow> rows;
};

using RunFunction = std::function<RunOutcome(const ExperimentConfig&, std::uint64_t, const std::filesystem::path&)>;

// Cross product of entries x seeds on `jobs` worker threads. A failing run is
// recorded and the suite continues. Rows aggregate successful runs per entry.
inline SuiteResult run_suite(const SuiteDefinition& def, const std::vector<std::uint64_t>& seeds,
                             const std::filesystem::path& out_dir, unsigned jobs = 1, RunFunction runner = {},
                             std::function<void(const SuiteRun&)> on_done = {}) {
  std::filesystem::create_directories(out_dir);
  const auto manifest = out_dir / "manifest.jsonl";
  if (!runner)
    runner = [&manifest](const ExperimentConfig& c, std::uint64_t seed, const std::filesystem::path& dir) {
      return execute_run(c, seed, dir, manifest);
    };
  struct Task {
    std::size_t entry;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (std::size_t i = 0; i < def.entries.size(); ++i)
    for (auto s : seeds) tasks.push_back({i, s});
  SuiteResult result;
  result.name = def.name;
  result.runs.resize(tasks.size());
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  auto worker = [&]() {
    for (;;) {
      const auto k = next.fetch_add(1);
      if (k >= tasks.size()) return;
      const auto& task = tasks[k];
      const auto& entry = def.entries[task.entry];
      SuiteRun run;
      run.label = entry.label;
      run.seed = task.seed;
      try {
        const auto dir = out_dir / ("run_" + std::to_string(task.entry) + "_seed" + std::to_string(task.seed));
        auto outcome = runner(entry.config, task.seed, dir);
        run.ok = true;
        run.score = outcome.score;
        run.actor_params = outcome.log.actor_params;
      } catch (const std::exception& e) {
        run.error = e.what();
      }
      std::lock_guard lock(mu);
      result.runs[k] = run;
      if (on_done) on_done(run);
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(tasks.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (std::size_t i = 0; i < def.entries.size(); ++i) {
    const auto& e = def.entries[i];
    SuiteRow row;
    row.label = e.label;
    row.algorithm = agents::to_string(e.config.algorithm);
    row.env = e.config.env;
    std::vector<double> scores;
    for (const auto& r : result.runs) {
      if (r.label != e.label) continue;
      if (r.ok && r.score) {
        scores.push_back(*r.score);
        row.params = r.actor_params;
        ++row.runs_ok;
      } else {
        ++row.runs_failed;
      }
    }
    const auto m = mean_ci(scores);
    row.mean = m.mean;
    row.ci_half_width = m.half_width;
    result.rows.push_back(row);
  }
  return result;
}

// Human-readable comparison table: algorithm, env, return +- CI, # params.
inline std::string format_table(const SuiteResult& r) {
  std::ostringstream os;
  os << std::left << std::setw(40) << "Algorithm" << std::setw(18) << "Environment" << std::right << std::setw(22)
     << "Return (up)" << std::setw(14) << "# Params (dn)" << std::setw(8) << "runs" << '\n';
  for (const auto& row : r.rows) {
    std::string ret = row.runs_ok ? detail::fmt(row.mean) + " +- " + detail::fmt(row.ci_half_width) : "n/a";
    os << std::left << std::setw(40) << row.label << std::setw(18) << row.env << std::right << std::setw(22) << ret
       << std::setw(14) << row.params << std::setw(5) << row.runs_ok << '/' << (row.runs_ok + row.runs_failed) << '\n';
  }
  return os.str();
}

inline nlohmann::json table_json(const SuiteResult& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"label", row.label},
                    {"algorithm", row.algorithm},
                    {"env", row.env},
                    {"mean_return", row.mean},
                    {"ci_half_width", row.ci_half_width},
                    {"params", row.params},
                    {"runs_ok", row.runs_ok},
                    {"runs_failed", row.runs_failed}});
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& run : r.runs)
    runs.push_back({{"label", run.label},
                    {"seed", run.seed},
                    {"ok", run.ok},
                    {"final_score", run.score ? nlohmann::json(*run.score) : nlohmann::json(nullptr)},
                    {"actor_params", run.actor_params},
                    {"error", run.error}});
  return {{"suite", r.name}, {"rows", rows}, {"runs", runs}};
}

}  // namespace anf::harness
