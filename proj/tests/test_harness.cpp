#include <atomic>
#include <filesystem>
#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "anf/harness/conjecture.hpp"
#include "anf/harness/stats.hpp"
#include "anf/harness/suites.hpp"
#include "anf/harness/training.hpp"

using namespace anf;
using namespace anf::harness;

namespace {

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

ExperimentConfig tiny_config() {
  auto c = load_config("toy_anf_td3");
  c.agent.hidden = {16, 16};
  c.run.total_steps = 3000;
  c.run.initial_collect = 500;
  c.run.eval_interval = 500;
  c.run.eval_episodes = 2;
  c.run.buffer_capacity = 5000;
  return c;
}

std::vector<EvalRecord> evals_at(std::initializer_list<std::pair<std::int64_t, double>> pts) {
  std::vector<EvalRecord> out;
  for (auto [s, r] : pts) {
    EvalRecord e;
    e.step = s;
    e.mean_return = r;
    out.push_back(e);
  }
  return out;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("anf_test_" + name);
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

}  // namespace

TEST(Config, DefaultsAreValid) {
  ExperimentConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.agent.hidden, (std::vector<std::size_t>{256, 256}));
  EXPECT_EQ(c.ene_state_dim(), 80u);
}

TEST(Config, ErrorsNameSourceAndLine) {
  auto msg = error_of([] { parse_config_text("name: x\nagent:\n  lr: fast\n", "cfg.yaml"); });
  EXPECT_NE(msg.find("cfg.yaml:3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("agent.lr"), std::string::npos) << msg;

  msg = error_of([] { parse_config_text("agent:\n  learning_rate: 0.1\n", "cfg.yaml"); });
  EXPECT_NE(msg.find("cfg.yaml:2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("unknown key 'agent.learning_rate'"), std::string::npos) << msg;

  msg = error_of([] { parse_config_text("\nalgorithm: ppo\n", "cfg.yaml"); });
  EXPECT_NE(msg.find("cfg.yaml:2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("algorithm"), std::string::npos) << msg;

  msg = error_of([] { parse_config_text("agent: [1, 2\n", "broken.yaml"); });
  EXPECT_NE(msg.find("broken.yaml:"), std::string::npos) << msg;
}

TEST(Config, ValidationRejectsOutOfRange) {
  EXPECT_THROW(load_config("toy_anf_td3", {"ene.noise_fraction=1.0"}), ConfigError);
  EXPECT_THROW(load_config("toy_anf_td3", {"agent.tau=0"}), ConfigError);
  EXPECT_THROW(load_config("toy_anf_td3", {"env.name=humanoid"}), ConfigError);
  EXPECT_THROW(load_config("toy_anf_td3", {"run.seeds=[1, 1]"}), ConfigError);
  EXPECT_THROW(load_config("toy_anf_td3", {"noequals"}), ConfigError);
  EXPECT_THROW(load_config("no_such_preset_or_file"), ConfigError);
}

TEST(Config, OverridesApply) {
  const auto c = load_config("toy_anf_td3", {"ene.noise_fraction=0.95", "agent.hidden=[32, 8]", "algorithm=sac", "run.seeds=[3,4]"});
  EXPECT_EQ(c.ene.noise_fraction, 0.95);
  EXPECT_EQ(c.ene_state_dim(), 160u);
  EXPECT_EQ(c.agent.hidden, (std::vector<std::size_t>{32, 8}));
  EXPECT_EQ(c.algorithm, agents::Algorithm::sac);
  EXPECT_EQ(c.run.seeds, (std::vector<std::uint64_t>{3, 4}));
}

TEST(Config, SchemaCoversEveryKeyOnce) {
  ExperimentConfig c;
  std::set<std::string> seen;
  for (const auto& k : config_schema(c)) {
    EXPECT_TRUE(seen.insert(k.path).second) << k.path;
    EXPECT_FALSE(k.doc.empty()) << k.path;
  }
  for (const char* k : {"ene.noise_fraction", "sparsity.input_layer_sparsity", "sparsity.drop_fraction",
                        "sparsity.topology_period", "pene.period", "agent.lr", "run.total_steps"})
    EXPECT_TRUE(seen.count(k)) << k;
  // config -> json -> yaml round trip is lossless
  const auto j = config_to_json(tiny_config());
  ExperimentConfig back;
  std::vector<std::string> ov;
  for (auto it = j.begin(); it != j.end(); ++it) ov.push_back(it.key() + "=" + it.value().dump());
  apply_overrides(back, ov);
  EXPECT_EQ(config_to_json(back), j);
}

TEST(Config, PresetsAndShippedFilesLoad) {
  for (const auto& [name, text] : builtin_presets()) EXPECT_NO_THROW(load_config(name)) << name;
  for (const auto& f : std::filesystem::directory_iterator(std::filesystem::path(ANF_SOURCE_DIR) / "configs")) {
    if (f.path().extension() != ".yaml") continue;
    EXPECT_NO_THROW(load_config(f.path().string())) << f.path();
  }
}

TEST(Config, TopologyPeriodScalesForShortRuns) {
  ExperimentConfig c;
  c.run.total_steps = 1000000;
  EXPECT_EQ(c.effective_topology_period(), 1000);
  c.run.total_steps = 60000;
  EXPECT_EQ(c.effective_topology_period(), 1000);
  c.run.total_steps = 30000;
  EXPECT_EQ(c.effective_topology_period(), 600);
  c.run.scale_topology_period = false;
  EXPECT_EQ(c.effective_topology_period(), 1000);
  c.run.total_steps = 1000000;
  EXPECT_EQ(c.effective_pene_period(), 250000);
}

TEST(Training, NoGradientStepsBeforeInitialCollect) {
  auto c = tiny_config();
  c.run.total_steps = 400;
  c.run.initial_collect = 1000;
  c.run.eval_interval = 100;
  TrainingSession<float> s(c, 0);
  s.run();
  EXPECT_EQ(s.gradient_steps(), 0);
  ASSERT_EQ(s.log().evals.size(), 4u);
  for (const auto& e : s.log().evals) {
    EXPECT_EQ(e.gradient_steps, 0);
    EXPECT_TRUE(std::isfinite(e.mean_return));
  }
  EXPECT_EQ(s.buffer().size(), 400u);
}

TEST(Training, ZeroStepsIsValid) {
  auto c = tiny_config();
  c.run.total_steps = 0;
  TrainingSession<float> s(c, 0);
  s.run();
  EXPECT_TRUE(s.log().evals.empty());
  EXPECT_THROW(final_score(s.log()), UsageError);
}

TEST(Training, GradientStepCount) {
  auto c = tiny_config();
  c.agent.critic_interval = 2;
  TrainingSession<float> s(c, 0);
  s.run();
  EXPECT_EQ(s.gradient_steps(), (3000 - 500) / 2);
  EXPECT_EQ(s.log().evals.size(), 6u);
}

TEST(Training, SameSeedIsBitwiseReproducible) {
  const auto c = tiny_config();
  TrainingSession<float> a(c, 7), b(c, 7), other(c, 8);
  a.run();
  b.run();
  other.run();
  EXPECT_EQ(a.log().evals, b.log().evals);
  EXPECT_EQ(a.log().actor_input_counts, b.log().actor_input_counts);
  EXPECT_NE(a.log().evals, other.log().evals);
}

TEST(Training, ResumeMatchesUninterruptedRun) {
  for (auto algo : {"td3", "sac"}) {
    auto c = tiny_config();
    apply_overrides(c, {std::string("algorithm=") + algo});
    c.validate();
    const auto dir = temp_dir("resume");
    TrainingSession<float> full(c, 3);
    full.set_trace_actions(true);
    full.run();

    TrainingSession<float> first(c, 3);
    first.run(1700);
    first.save_checkpoint((dir / "ckpt.bin").string());
    TrainingSession<float> second(c, 3);
    second.load_checkpoint((dir / "ckpt.bin").string());
    EXPECT_EQ(second.step(), 1700);
    second.set_trace_actions(true);
    second.run();
    EXPECT_EQ(second.log().evals, full.log().evals) << algo;
    const auto& fa = full.action_trace();
    const auto& sa = second.action_trace();
    ASSERT_EQ(sa.size(), 1300u);
    for (std::size_t i = 0; i < sa.size(); ++i) ASSERT_EQ(sa[i], fa[1700 + i]) << algo << " step " << 1701 + i;

    // a checkpoint from another seed is refused
    TrainingSession<float> wrong(c, 4);
    EXPECT_THROW(wrong.load_checkpoint((dir / "ckpt.bin").string()), ConfigError);
    EXPECT_THROW(wrong.load_checkpoint((dir / "missing.bin").string()), IoError);
  }
}

TEST(Training, TopologyEvolvesOnlyForDynamicVariant) {
  auto c = tiny_config();
  TrainingSession<float> dyn(c, 1);
  dyn.run();
  c.variant = agents::Variant::static_anf;
  TrainingSession<float> stat(c, 1);
  stat.run();
  const auto& dl = dyn.log().actor_input_counts;
  const auto& sl = stat.log().actor_input_counts;
  ASSERT_GE(dl.size(), 2u);
  EXPECT_NE(dl.front(), dl.back());
  EXPECT_EQ(sl.front(), sl.back());
  // the same number of connections either way
  EXPECT_EQ(dyn.agent().actor().existing_weights(), stat.agent().actor().existing_weights());
}

TEST(Training, PeneRelevantIndicesFollowSchedule) {
  auto c = tiny_config();
  c.pene.enabled = true;
  TrainingSession<float> s(c, 2);
  EXPECT_EQ(s.relevant_indices(0), (std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7}));
  const auto later = s.relevant_indices(2999);
  EXPECT_EQ(later.size(), 8u);
  EXPECT_NE(later, s.relevant_indices(0));
  // no fifth sub-environment at the end of the run
  const auto T = c.run.total_steps;
  EXPECT_EQ(s.relevant_indices(T), s.relevant_indices(T - 1));
  EXPECT_EQ(s.relevant_indices(T - 1), s.relevant_indices(T - c.effective_pene_period()));
}

TEST(Training, DenseTd3LearnsNoiseFreeTask) {
  auto c = load_config("toy_dense_td3", {"ene.noise_fraction=0", "run.total_steps=30000"});
  TrainingSession<float> s(c, 0);
  s.run();
  // scripted controller on the same evaluation protocol
  auto env = env::make_builtin_env(c.env, c.horizon);
  Rng rng(99);
  double scripted = 0.0;
  const int episodes = 20;
  for (int ep = 0; ep < episodes; ++ep) {
    auto st = env->reset(rng);
    for (;;) {
      auto r = env->step(*env->scripted_action(st));
      scripted += r.reward;
      st = r.state;
      if (r.done()) break;
    }
  }
  scripted /= episodes;
  double best = -1e9;
  for (const auto& e : s.log().evals) best = std::max(best, e.mean_return);
  EXPECT_GE(best, 0.9 * scripted) << "best " << best << " scripted " << scripted;
}

TEST(Stats, FinalScoreAveragesLastTenPercent) {
  std::vector<EvalRecord> ev;
  for (int i = 1; i <= 100; ++i) {
    EvalRecord e;
    e.step = i * 1000;
    e.mean_return = i;
    ev.push_back(e);
  }
  EXPECT_DOUBLE_EQ(final_score(ev, 100000), 95.5);  // evals 91..100
  for (auto& e : ev) e.mean_return = 3.25;
  EXPECT_DOUBLE_EQ(final_score(ev, 100000), 3.25);
}

TEST(Stats, FinalScoreEdgeCases) {
  std::vector<EvalRecord> ev;
  for (int i = 1; i <= 10; ++i) ev.push_back({i * 10, static_cast<double>(i)});
  EXPECT_DOUBLE_EQ(final_score(ev, 100), 10.0);  // only step 100 is past 90
  EXPECT_THROW(final_score(std::vector<EvalRecord>(ev.begin(), ev.begin() + 9), 100), UsageError);
  EXPECT_THROW(final_score(ev, 1000), UsageError);
}

TEST(Stats, ConfidenceBand) {
  const auto a = evals_at({{1, 0.0}, {2, 5.0}});
  const auto b = evals_at({{1, 2.0}, {2, 5.0}});
  const auto pts = aggregate_seeds({a, b});
  ASSERT_EQ(pts.size(), 2u);
  EXPECT_DOUBLE_EQ(pts[0].mean, 1.0);
  EXPECT_NEAR(pts[0].half_width, 1.96, 1e-12);  // std sqrt(2), n 2
  EXPECT_DOUBLE_EQ(pts[1].half_width, 0.0);
  EXPECT_THROW(aggregate_seeds({a}), UsageError);
  EXPECT_THROW(aggregate_seeds({a, evals_at({{1, 0.0}, {3, 1.0}})}), UsageError);

  const auto m = mean_ci({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_NEAR(m.std_error, std::sqrt(5.0 / 3.0) / 2.0, 1e-12);
  EXPECT_NEAR(pooled_standard_error({1.0, 2.0, 3.0, 4.0}, {5.0, 5.0}), m.std_error, 1e-12);
}

TEST(Conjecture, IrrelevantWeightVanishes) {
  for (double mu : {0.0, 1.0, -2.0, 4.0}) {
    const auto r = conjecture_oracle(2.0, mu, 0.01, 20000, 5);
    ASSERT_FALSE(r.diverged) << mu;
    EXPECT_LT(std::abs(r.final_w2), 1e-3) << mu;
    EXPECT_NEAR(r.final_w1, 2.0, 1e-2) << mu;
    EXPECT_EQ(r.trajectory.back().step, 20000);
  }
}

TEST(Conjecture, ZeroTargetDrivesBothToZero) {
  const auto r = conjecture_oracle(0.0, 1.0, 0.01, 20000, 6, 1.5, -0.7);
  EXPECT_LT(std::abs(r.final_w1), 1e-3);
  EXPECT_LT(std::abs(r.final_w2), 1e-3);
}

TEST(Conjecture, LargeStepDivergesCleanly) {
  const auto r = conjecture_oracle(2.0, 4.0, 10.0, 20000, 7);
  EXPECT_TRUE(r.diverged);
  EXPECT_LT(r.trajectory.back().step, 20000);
  EXPECT_THROW(conjecture_oracle(2.0, 0.0, 0.0, 10), ConfigError);
}

TEST(Suites, CrossProducts) {
  const auto base = load_config("toy_anf_td3");
  std::set<double> nf;
  const auto sweep = make_suite("noise-sweep", base);
  ASSERT_EQ(sweep.entries.size(), 10u);
  for (const auto& e : sweep.entries) nf.insert(e.config.ene.noise_fraction);
  EXPECT_EQ(nf, (std::set<double>{0.8, 0.9, 0.95, 0.98, 0.99}));

  std::set<double> sig;
  for (const auto& e : make_suite("louder-noise", base).entries) sig.insert(e.config.ene.noise_amplitude);
  EXPECT_EQ(sig, (std::set<double>{1, 2, 4, 8, 16}));

  const auto ab = make_suite("static-ablation", base);
  ASSERT_EQ(ab.entries.size(), 3u);
  EXPECT_EQ(ab.entries[0].label, "ANF-TD3");
  EXPECT_EQ(ab.entries[1].label, "Static-ANF-TD3");
  EXPECT_EQ(ab.entries[2].label, "TD3");

  const auto ene = make_suite("ene", base);
  ASSERT_EQ(ene.entries.size(), 4u);
  EXPECT_EQ(ene.entries[3].label, "SAC");
  EXPECT_EQ(ene.entries[3].config.agent.actor_interval, 1);
  EXPECT_EQ(ene.entries[3].config.agent.hidden, base.agent.hidden);

  for (const auto& e : make_suite("pene", base).entries) {
    EXPECT_TRUE(e.config.pene.enabled);
    EXPECT_EQ(e.config.effective_pene_period(), base.run.total_steps);
    EXPECT_EQ(static_cast<std::int64_t>(e.config.run.buffer_capacity), std::min<std::int64_t>(base.run.total_steps, 100000));
  }
  for (const auto& e : make_suite("matching-sparsity", base).entries) EXPECT_TRUE(e.config.variant == agents::Variant::anf);
  for (const auto& e : make_suite("noise-mean", base).entries) EXPECT_EQ(e.config.ene.noise_fraction, 0.98);

  for (const auto& n : suite_names())
    for (const auto& e : make_suite(n, base).entries) EXPECT_NO_THROW(e.config.validate()) << n << " " << e.label;

  const auto msg = error_of([&] { make_suite("nope", base); });
  EXPECT_NE(msg.find("static-ablation"), std::string::npos);
}

TEST(Suites, ImitateHistogramsFitFromScriptedStates) {
  const auto base = load_config("toy_anf_td3");
  const auto def = make_suite("imitate", base);
  for (const auto& e : def.entries) {
    EXPECT_EQ(e.config.ene.distribution, env::NoiseDistribution::imitate);
    EXPECT_EQ(e.config.ene.imitate_histograms.size(), base.original_state_dim());
  }
  const auto states = record_scripted_states(base.env, base.horizon, 5000, 12345);
  EXPECT_GE(states.rows(), 5000);
  EXPECT_EQ(states.cols(), 8);
}

TEST(Suites, RunnerCollectsFailuresAndAggregates) {
  const auto base = load_config("toy_anf_td3");
  const auto def = make_suite("static-ablation", base);
  std::atomic<int> calls{0};
  RunFunction fake = [&](const ExperimentConfig& c, std::uint64_t seed, const std::filesystem::path&) {
    ++calls;
    if (c.variant == agents::Variant::static_anf && seed == 1) throw NumericalError("boom");
    RunOutcome o;
    o.score = 10.0 * static_cast<double>(static_cast<int>(c.variant)) + static_cast<double>(seed);
    o.log.actor_params = 100 + static_cast<std::size_t>(c.variant);
    return o;
  };
  const auto dir = temp_dir("suite");
  const auto r = run_suite(def, {0, 1, 2}, dir, 2, fake);
  EXPECT_EQ(calls.load(), 9);
  ASSERT_EQ(r.rows.size(), 3u);
  EXPECT_EQ(r.rows[0].runs_ok, 3u);
  EXPECT_DOUBLE_EQ(r.rows[0].mean, 11.0);  // anf = 1
  EXPECT_EQ(r.rows[1].runs_ok, 2u);
  EXPECT_EQ(r.rows[1].runs_failed, 1u);
  EXPECT_DOUBLE_EQ(r.rows[1].mean, 21.0);  // seeds 0 and 2
  EXPECT_EQ(r.rows[2].params, 100u);
  bool saw_error = false;
  for (const auto& run : r.runs) saw_error |= run.error.find("boom") != std::string::npos;
  EXPECT_TRUE(saw_error);
  const auto table = format_table(r);
  EXPECT_NE(table.find("Static-ANF-TD3"), std::string::npos);
  EXPECT_EQ(table_json(r)["rows"].size(), 3u);
}

TEST(Suites, SparserParamsMatchAllocation) {
  const auto base = load_config("toy_anf_td3");
  for (const auto& e : make_suite("sparsity-sweep", base).entries) {
    if (e.config.variant != agents::Variant::sparser_anf) continue;
    auto agent = agents::make_agent<float>(e.config.agent_config(), 0);
    const auto total = static_cast<double>(agent->actor().total_weights());
    const double want = (1.0 - *e.config.sparsity.global_sparsity) * total;
    EXPECT_NEAR(static_cast<double>(agent->actor().existing_weights()), want, 3.0) << e.label;
  }
}

TEST(Artifacts, ExecuteRunWritesFilesAndManifest) {
  auto c = tiny_config();
  const auto dir = temp_dir("artifacts");
  const auto out = execute_run(c, 0, dir / "seed0", dir / "manifest.jsonl", "", true);
  EXPECT_TRUE(std::filesystem::exists(dir / "seed0" / "checkpoint.bin"));
  EXPECT_TRUE(std::filesystem::exists(dir / "seed0" / "metrics.csv"));
  std::ifstream is(dir / "manifest.jsonl");
  std::vector<nlohmann::json> recs;
  for (std::string line; std::getline(is, line);) recs.push_back(nlohmann::json::parse(line));
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0]["event"], "started");
  EXPECT_EQ(recs[1]["event"], "completed");
  EXPECT_EQ(recs[1]["actor_params"], out.log.actor_params);
}
