#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "anf/analytics/export.hpp"
#include "anf/harness/artifacts.hpp"
#include "anf/harness/conjecture.hpp"
#include "anf/harness/suites.hpp"

namespace fs = std::filesystem;
using namespace anf;

namespace {

enum ExitCode { kOk = 0, kFail = 1, kUsage = 2, kNumerical = 3, kIo = 4 };

std::string config_reference() {
  harness::ExperimentConfig defaults;
  std::ostringstream os;
  os << "Config keys (YAML nesting or --override a.b=value), with defaults:\n";
  for (const auto& key : harness::config_schema(defaults))
    os << "  " << std::left << std::setw(34) << key.path << std::setw(22) << key.get().dump() << key.doc << '\n';
  os << "Presets: ";
  bool first = true;
  for (const auto& [name, text] : harness::builtin_presets()) {
    os << (first ? "" : ", ") << name;
    first = false;
  }
  os << "\nExit codes: 0 ok, 1 check failed, 2 usage/config, 3 numerical abort, 4 IO\n";
  return os.str();
}

std::vector<std::uint64_t> seed_list(const std::vector<std::uint64_t>& explicit_seeds, int count,
                                     const std::vector<std::uint64_t>& from_config) {
  if (!explicit_seeds.empty()) return explicit_seeds;
  if (count > 0) {
    std::vector<std::uint64_t> s(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) s[static_cast<std::size_t>(i)] = static_cast<std::uint64_t>(i);
    return s;
  }
  return from_config;
}

struct TrainArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::vector<std::uint64_t> seeds;
  std::string out;
  std::string resume;
  bool svg = false;
  bool json = false;
};

int cmd_train(const TrainArgs& a) {
  auto cfg = harness::load_config(a.config, a.overrides);
  const auto seeds = seed_list(a.seeds, 0, {cfg.run.seeds.front()});
  if (!a.resume.empty() && seeds.size() != 1) throw ConfigError("--resume needs exactly one seed");
  const fs::path root = a.out.empty() ? fs::path(cfg.run.output_dir) / cfg.name : fs::path(a.out);
  fs::create_directories(root);
  nlohmann::json results = nlohmann::json::array();
  for (auto seed : seeds) {
    const auto dir = root / ("seed" + std::to_string(seed));
    auto outcome = harness::execute_run(cfg, seed, dir, root / "manifest.jsonl", a.resume, a.svg);
    nlohmann::json r = {{"seed", seed},
                        {"run_dir", dir.string()},
                        {"final_score", outcome.score ? nlohmann::json(*outcome.score) : nlohmann::json(nullptr)},
                        {"final_return", outcome.log.evals.empty() ? 0.0 : outcome.log.evals.back().mean_return},
                        {"actor_params", outcome.log.actor_params},
                        {"wall_seconds", outcome.wall_seconds}};
    if (!a.json) {
      std::cout << "seed " << seed << ": final_score "
                << (outcome.score ? harness::detail::fmt(*outcome.score) : std::string("n/a")) << ", actor params "
                << outcome.log.actor_params << ", " << harness::detail::fmt(outcome.wall_seconds, 1) << " s -> "
                << dir.string() << '\n';
    }
    results.push_back(r);
  }
  if (a.json) std::cout << results.dump(2) << '\n';
  return kOk;
}

struct SuiteArgs {
  std::string name;
  std::string config = "toy_anf_td3";
  std::vector<std::string> overrides;
  int seed_count = 0;
  std::vector<std::uint64_t> seeds;
  unsigned jobs = 1;
  std::string out;
  bool json = false;
  bool dry_run = false;
};

int cmd_suite(const SuiteArgs& a) {
  auto base = harness::load_config(a.config, a.overrides);
  auto def = harness::make_suite(a.name, base);
  const auto seeds = seed_list(a.seeds, a.seed_count, base.run.seeds);
  if (a.dry_run) {
    for (const auto& e : def.entries) std::cout << e.label << '\n';
    std::cout << def.entries.size() << " configs x " << seeds.size() << " seeds\n";
    return kOk;
  }
  const fs::path out = a.out.empty() ? fs::path(base.run.output_dir) / ("suite_" + a.name) : fs::path(a.out);
  auto result = harness::run_suite(def, seeds, out, a.jobs, {}, [&](const harness::SuiteRun& r) {
    std::cerr << (r.ok ? "done   " : "FAILED ") << r.label << " seed " << r.seed
              << (r.ok ? "" : ": " + r.error) << '\n';
  });
  const auto table = harness::format_table(result);
  const auto js = harness::table_json(result);
  analytics::write_text_file((out / "table.txt").string(), table);
  analytics::write_text_file((out / "table.json").string(), js.dump(2) + "\n");
  if (a.json)
    std::cout << js.dump(2) << '\n';
  else
    std::cout << def.description << "\n\n" << table;
  for (const auto& r : result.runs)
    if (!r.ok) return kFail;
  return kOk;
}

struct AnalyzeArgs {
  std::vector<std::string> runs;
  bool svg = false;
  bool json = false;
};

// Final score per run dir plus final connectivity split, aggregated over dirs.
int cmd_analyze(const AnalyzeArgs& a) {
  nlohmann::json out = nlohmann::json::array();
  std::vector<double> scores;
  std::vector<std::vector<harness::EvalRecord>> curves;
  for (const auto& run : a.runs) {
    const fs::path dir(run);
    std::ifstream mf(dir / "metrics.csv");
    if (!mf) throw IoError("cannot read " + (dir / "metrics.csv").string());
    auto evals = harness::read_metrics_csv(mf);
    if (evals.empty()) throw IoError("no evaluations in " + (dir / "metrics.csv").string());
    nlohmann::json r = {{"run", run}};
    const auto total = evals.back().step;
    try {
      const double s = harness::final_score(evals, total);
      scores.push_back(s);
      r["final_score"] = s;
    } catch (const UsageError& e) {
      r["final_score"] = nullptr;
      r["note"] = e.what();
    }
    std::vector<analytics::ConnectivityTimeline> timelines;
    if (std::ifstream cf(dir / "connectivity.csv"); cf) timelines = analytics::read_timeline_csv(cf);
    for (const auto& t : timelines) {
      if (t.steps.empty()) continue;
      nlohmann::json c = {{"relevant_mean", t.relevant_mean.back()}};
      if (t.noise_mean.back()) {
        c["noise_mean"] = *t.noise_mean.back();
        if (*t.noise_mean.back() > 0) c["ratio"] = t.relevant_mean.back() / *t.noise_mean.back();
      }
      r["connectivity"][t.network] = c;
    }
    if (a.svg) {
      analytics::Series curve{"return", {}, {}, {}};
      for (const auto& e : evals) {
        curve.x.push_back(static_cast<double>(e.step));
        curve.y.push_back(e.mean_return);
      }
      analytics::write_text_file((dir / "learning_curve.svg").string(),
                                 analytics::line_chart_svg("Evaluation return", "env steps", "return", {curve}));
      for (const auto& t : timelines)
        analytics::write_text_file((dir / ("connectivity_" + t.network + ".svg")).string(),
                                   analytics::line_chart_svg("Average connections (" + t.network + ")", "env steps",
                                                             "connections per input neuron", analytics::timeline_series(t)));
    }
    curves.push_back(std::move(evals));
    out.push_back(r);
  }
  const auto m = harness::mean_ci(scores);
  nlohmann::json summary = {{"runs", out}, {"mean_final_score", m.mean}, {"ci_half_width", m.half_width}};
  if (a.json) {
    std::cout << summary.dump(2) << '\n';
  } else {
    for (const auto& r : out) {
      std::cout << r["run"].get<std::string>() << ": final_score "
                << (r["final_score"].is_null() ? std::string("n/a") : harness::detail::fmt(r["final_score"].get<double>()));
      if (r.contains("connectivity"))
        for (const auto& [net, c] : r["connectivity"].items())
          if (c.contains("ratio"))
            std::cout << ", " << net << " relevant/noise " << harness::detail::fmt(c["ratio"].get<double>());
      std::cout << '\n';
    }
    if (scores.size() > 1)
      std::cout << "mean " << harness::detail::fmt(m.mean) << " +- " << harness::detail::fmt(m.half_width) << " (95% CI, "
                << scores.size() << " runs)\n";
  }
  if (a.svg && curves.size() > 1) {
    try {
      auto agg = harness::aggregate_seeds(curves);
      analytics::Series s{"mean", {}, {}, {}};
      for (const auto& p : agg) {
        s.x.push_back(static_cast<double>(p.step));
        s.y.push_back(p.mean);
        s.band.push_back(p.half_width);
      }
      analytics::write_text_file((fs::path(a.runs.front()).parent_path() / "learning_curve_mean.svg").string(),
                                 analytics::line_chart_svg("Mean evaluation return", "env steps", "return", {s}));
    } catch (const UsageError& e) {
      std::cerr << "skipping aggregate curve: " << e.what() << '\n';
    }
  }
  return kOk;
}

int cmd_env_info(const std::string& env_name, double noise_fraction, bool table, bool json) {
  if (table) {
    const std::vector<double> fractions{0.8, 0.9, 0.95, 0.98, 0.99};
    nlohmann::json rows = nlohmann::json::array();
    if (!json) {
      std::cout << std::left << std::setw(16) << "Environment" << std::right << std::setw(8) << "d_og" << std::setw(8)
                << "action";
      for (double f : fractions) std::cout << std::setw(10) << ("n_f=" + harness::detail::fmt(f));
      std::cout << '\n';
    }
    for (const auto& t : env::reference_task_dims()) {
      nlohmann::json r = {{"env", t.name}, {"d_og", t.state_dim}, {"action_dim", t.action_dim}};
      if (!json) std::cout << std::left << std::setw(16) << t.name << std::right << std::setw(8) << t.state_dim << std::setw(8) << t.action_dim;
      for (double f : fractions) {
        const auto d = env::ene_dim(t.state_dim, f);
        r["d_ene"][harness::detail::fmt(f)] = d;
        if (!json) std::cout << std::setw(10) << d;
      }
      if (!json) std::cout << '\n';
      rows.push_back(r);
    }
    if (json) std::cout << rows.dump(2) << '\n';
    return kOk;
  }
  auto e = env::make_builtin_env(env_name, 150);
  const auto d_ene = env::ene_dim(e->state_dim(), noise_fraction);
  if (json)
    std::cout << nlohmann::json{{"env", env_name}, {"d_og", e->state_dim()}, {"action_dim", e->action_dim()},
                                {"noise_fraction", noise_fraction}, {"d_ene", d_ene}}
                     .dump(2)
              << '\n';
  else
    std::cout << "env " << env_name << "\nd_og " << e->state_dim() << "\naction_dim " << e->action_dim()
              << "\nnoise_fraction " << noise_fraction << "\nd_ene " << d_ene << '\n';
  return kOk;
}

struct ConjectureArgs {
  double mu = 0.0;
  double a = 2.0;
  double lr = 0.01;
  std::int64_t steps = 20000;
  std::uint64_t seed = 0;
  std::string out;
  bool json = false;
};

int cmd_conjecture(const ConjectureArgs& c) {
  const auto r = harness::conjecture_oracle(c.a, c.mu, c.lr, c.steps, c.seed);
  if (!c.out.empty()) {
    std::ostringstream os;
    os << "step,w1,w2\n";
    for (const auto& p : r.trajectory)
      os << p.step << ',' << harness::format_double(p.w1) << ',' << harness::format_double(p.w2) << '\n';
    analytics::write_text_file(c.out, os.str());
  }
  const bool pass = !r.diverged && std::abs(r.final_w2) < 1e-3 && std::abs(r.final_w1 - c.a) < 1e-2;
  if (c.json) {
    std::cout << nlohmann::json{{"mu", c.mu}, {"target_a", c.a}, {"lr", c.lr}, {"steps", c.steps},
                                {"final_w1", r.final_w1}, {"final_w2", r.final_w2}, {"diverged", r.diverged},
                                {"pass", pass}}
                     .dump(2)
              << '\n';
  } else if (r.diverged) {
    std::cout << "FAIL: diverged (lr " << c.lr << " is past the stability boundary; last w1 " << r.final_w1 << ", w2 "
              << r.final_w2 << ")\n";
  } else {
    std::cout << (pass ? "PASS" : "FAIL") << ": w1 " << r.final_w1 << " (target " << c.a << "), w2 " << r.final_w2
              << " (mu " << c.mu << ")\n";
  }
  return pass ? kOk : kFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Automatic noise filtering for TD3/SAC on noisy desk-scale tasks"};
  app.require_subcommand(1);
  app.footer(config_reference());

  TrainArgs train;
  auto* tr = app.add_subcommand("train", "train one config for one or more seeds");
  tr->add_option("config,--config", train.config, "YAML file or preset name")->required();
  tr->add_option("--seed", train.seeds, "seed (repeatable; default: first of run.seeds)");
  tr->add_option("-o,--override", train.overrides, "config override key=value (repeatable)");
  tr->add_option("--out", train.out, "output directory (default: run.output_dir/name)");
  tr->add_option("--resume", train.resume, "resume from a checkpoint file");
  tr->add_flag("--svg", train.svg, "also write SVG charts");
  tr->add_flag("--json", train.json, "machine-readable output");

  SuiteArgs suite;
  auto* su = app.add_subcommand("suite", "run a named experiment suite and print a comparison table");
  std::string suite_help = "suite name: ";
  for (const auto& n : harness::suite_names()) suite_help += n + " ";
  su->add_option("name", suite.name, suite_help)->required();
  su->add_option("--config", suite.config, "base config (YAML file or preset)")->capture_default_str();
  su->add_option("-o,--override", suite.overrides, "override on the base config (repeatable)");
  su->add_option("--seeds", suite.seed_count, "number of seeds 0..N-1 (default: run.seeds)");
  su->add_option("--seed", suite.seeds, "explicit seed (repeatable)");
  su->add_option("-j,--jobs", suite.jobs, "parallel runs")->capture_default_str();
  su->add_option("--out", suite.out, "output directory");
  su->add_flag("--json", suite.json, "machine-readable table");
  su->add_flag("--dry-run", suite.dry_run, "list configs without running");

  AnalyzeArgs analyze;
  auto* an = app.add_subcommand("analyze", "summarize finished run directories");
  an->add_option("runs", analyze.runs, "run directories")->required();
  an->add_flag("--svg", analyze.svg, "write SVG charts next to the data");
  an->add_flag("--json", analyze.json, "machine-readable output");

  std::string env_name = "point_mass_reach";
  double noise_fraction = 0.9;
  bool table = false, env_json = false;
  auto* ei = app.add_subcommand("env-info", "print state dimensions with and without noise features");
  ei->add_option("env,--env", env_name, "built-in env")->capture_default_str();
  ei->add_option("--noise-fraction", noise_fraction, "noise fraction n_f")->capture_default_str();
  ei->add_flag("--table", table, "reference task dimensions for every noise fraction");
  ei->add_flag("--json", env_json, "machine-readable output");

  ConjectureArgs conj;
  auto* cj = app.add_subcommand("conjecture", "check that gradient descent zeroes the weight on a noise input");
  cj->add_option("--mu", conj.mu, "mean of the noise input")->capture_default_str();
  cj->add_option("--target-a", conj.a, "true coefficient a")->capture_default_str();
  cj->add_option("--lr", conj.lr, "learning rate")->capture_default_str();
  cj->add_option("--steps", conj.steps, "gradient steps")->capture_default_str();
  cj->add_option("--seed", conj.seed, "seed")->capture_default_str();
  cj->add_option("--out", conj.out, "trajectory CSV");
  cj->add_flag("--json", conj.json, "machine-readable output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*tr) return cmd_train(train);
    if (*su) return cmd_suite(suite);
    if (*an) return cmd_analyze(analyze);
    if (*ei) return cmd_env_info(env_name, noise_fraction, table, env_json);
    if (*cj) return cmd_conjecture(conj);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << '\n';
    return kNumerical;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFail;
  }
  return kUsage;
}
