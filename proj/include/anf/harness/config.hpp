#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include "anf/agents/agent.hpp"
#include "anf/env/ene.hpp"
#include "anf/env/toy_envs.hpp"
#include "anf/error.hpp"

namespace anf::harness {

struct PeneSettings {
  bool enabled = false;
  std::int64_t period = 0;  // 0: a quarter of the run length
};

struct RunSettings {
  std::int64_t total_steps = 60000;
  std::int64_t initial_collect = 2000;
  std::size_t buffer_capacity = 100000;
  std::int64_t eval_interval = 1000;
  int eval_episodes = 10;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::string output_dir = "runs";
  std::int64_t checkpoint_interval = 0;  // 0: only at the end
  bool record_connectivity = true;
  // Shrink the topology period so that a short run still sees >= 50 updates.
  bool scale_topology_period = true;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::string env = "point_mass_reach";
  std::int64_t horizon = 150;
  env::EneConfig ene;
  std::string histogram_file;  // imitate mode: JSON written by fit_histograms
  int histogram_bins = 50;
  PeneSettings pene;
  agents::Algorithm algorithm = agents::Algorithm::td3;
  agents::Variant variant = agents::Variant::anf;
  dst::SparsityConfig sparsity;
  agents::AgentHyperparams agent = agents::AgentHyperparams::defaults(agents::Algorithm::td3);
  RunSettings run;

  std::int64_t effective_topology_period() const {
    const auto p = sparsity.topology_period;
    if (run.scale_topology_period && run.total_steps < 50 * p) return std::max<std::int64_t>(1, run.total_steps / 50);
    return p;
  }

  std::int64_t effective_pene_period() const {
    return pene.period > 0 ? pene.period : std::max<std::int64_t>(1, run.total_steps / 4);
  }

  std::size_t original_state_dim() const { return env::make_builtin_env(env, horizon)->state_dim(); }
  std::size_t action_dim() const { return env::make_builtin_env(env, horizon)->action_dim(); }
  std::size_t ene_state_dim() const { return env::ene_dim(original_state_dim(), ene.noise_fraction); }

  agents::AgentConfig agent_config() const {
    agents::AgentConfig c;
    c.algorithm = algorithm;
    c.variant = variant;
    c.hyper = agent;
    c.sparsity = sparsity;
    c.sparsity.topology_period = effective_topology_period();
    c.sparsity.mode = variant == agents::Variant::static_anf ? dst::TopologyMode::static_ : dst::TopologyMode::dynamic;
    c.sparsity.sparse_layers =
        variant == agents::Variant::sparser_anf ? dst::SparseLayers::input_and_hidden : dst::SparseLayers::input_only;
    c.state_dim = ene_state_dim();
    c.action_dim = action_dim();
    return c;
  }

  void validate() const {
    const auto names = env::builtin_env_names();
    if (std::find(names.begin(), names.end(), env) == names.end())
      throw ConfigError("unknown environment '" + env + "'");
    if (horizon <= 0 || horizon > 400) throw ConfigError("env.horizon must be in [1, 400]");
    auto e = ene;
    if (e.distribution == env::NoiseDistribution::imitate && e.imitate_histograms.empty() && histogram_file.empty())
      throw ConfigError("ene.distribution = imitate needs ene.histogram_file");
    if (e.distribution == env::NoiseDistribution::imitate) e.distribution = env::NoiseDistribution::gaussian;
    e.validate();
    if (histogram_bins < 1) throw ConfigError("ene.histogram_bins must be positive");
    agent_config().validate();
    if (run.total_steps < 0) throw ConfigError("run.total_steps must be non-negative");
    if (run.initial_collect < 0) throw ConfigError("run.initial_collect must be non-negative");
    if (run.buffer_capacity == 0) throw ConfigError("run.buffer_capacity must be positive");
    if (run.eval_interval <= 0) throw ConfigError("run.eval_interval must be positive");
    if (run.eval_episodes <= 0) throw ConfigError("run.eval_episodes must be positive");
    if (run.checkpoint_interval < 0) throw ConfigError("run.checkpoint_interval must be non-negative");
    if (run.seeds.empty()) throw ConfigError("run.seeds must not be empty");
    auto seeds = run.seeds;
    std::sort(seeds.begin(), seeds.end());
    if (std::adjacent_find(seeds.begin(), seeds.end()) != seeds.end()) throw ConfigError("run.seeds must be distinct");
    if (pene.period < 0) throw ConfigError("pene.period must be non-negative");
  }
};

inline std::string to_string(env::NoiseDistribution d) { return d == env::NoiseDistribution::gaussian ? "gaussian" : "imitate"; }

// One documented configuration key.
struct ConfigKey {
  std::string path;
  std::string doc;
  std::function<void(const YAML::Node&)> set;
  std::function<nlohmann::json()> get;
};

namespace detail {

template <class T>
ConfigKey scalar_key(std::string path, std::string doc, T& ref) {
  return {std::move(path), std::move(doc), [&ref](const YAML::Node& n) { ref = n.as<T>(); },
          [&ref]() { return nlohmann::json(ref); }};
}

template <class E>
ConfigKey enum_key(std::string path, std::string doc, E& ref, std::vector<std::pair<std::string, E>> names) {
  return {std::move(path), std::move(doc),
          [&ref, names](const YAML::Node& n) {
            const auto s = n.as<std::string>();
            for (const auto& [k, v] : names)
              if (k == s) {
                ref = v;
                return;
              }
            std::string allowed;
            for (const auto& [k, v] : names) allowed += (allowed.empty() ? "" : ", ") + k;
            throw ConfigError("expected one of {" + allowed + "}, got '" + s + "'");
          },
          [&ref, names]() {
            for (const auto& [k, v] : names)
              if (v == ref) return nlohmann::json(k);
            return nlohmann::json(nullptr);
          }};
}

}  // namespace detail

// The full key schema, bound to `c`.
inline std::vector<ConfigKey> config_schema(ExperimentConfig& c) {
  using agents::Algorithm;
  using agents::Variant;
  using detail::enum_key;
  using detail::scalar_key;
  std::vector<ConfigKey> k;
  k.push_back(scalar_key("name", "experiment label", c.name));
  k.push_back(scalar_key("env.name", "built-in task: point_mass_reach | linear_tracker", c.env));
  k.push_back(scalar_key("env.horizon", "episode length in steps (<= 400)", c.horizon));
  k.push_back(scalar_key("ene.noise_fraction", "fraction n_f of state features that are noise, [0, 1)", c.ene.noise_fraction));
  k.push_back(scalar_key("ene.noise_mean", "mean of Gaussian noise features", c.ene.noise_mean));
  k.push_back(scalar_key("ene.noise_amplitude", "standard deviation of Gaussian noise features", c.ene.noise_amplitude));
  k.push_back(enum_key("ene.distribution", "noise distribution: gaussian | imitate", c.ene.distribution,
                       {{"gaussian", env::NoiseDistribution::gaussian}, {"imitate", env::NoiseDistribution::imitate}}));
  k.push_back(scalar_key("ene.histogram_file", "histogram JSON for imitate mode", c.histogram_file));
  k.push_back(scalar_key("ene.histogram_bins", "bins per feature when fitting histograms", c.histogram_bins));
  k.push_back(scalar_key("pene.enabled", "permute all features every pene.period steps", c.pene.enabled));
  k.push_back(scalar_key("pene.period", "permutation period T_p in env steps (0: total_steps / 4)", c.pene.period));
  // algorithm is handled before the agent block so its defaults apply first
  k.push_back(enum_key("algorithm", "td3 | sac", c.algorithm, {{"td3", Algorithm::td3}, {"sac", Algorithm::sac}}));
  k.push_back(enum_key("variant", "dense | anf | static_anf | sparser_anf", c.variant,
                       {{"dense", Variant::dense}, {"anf", Variant::anf}, {"static_anf", Variant::static_anf},
                        {"sparser_anf", Variant::sparser_anf}}));
  k.push_back(scalar_key("sparsity.input_layer_sparsity", "input-layer sparsity s_i", c.sparsity.input_layer_sparsity));
  k.push_back(scalar_key("sparsity.drop_fraction", "drop fraction d_f per topology update", c.sparsity.drop_fraction));
  k.push_back(scalar_key("sparsity.topology_period", "topology-change period in env steps", c.sparsity.topology_period));
  k.push_back({"sparsity.global_sparsity", "target global sparsity for sparser_anf",
               [&c](const YAML::Node& n) {
                 if (n.IsNull()) c.sparsity.global_sparsity.reset();
                 else c.sparsity.global_sparsity = n.as<double>();
               },
               [&c]() { return c.sparsity.global_sparsity ? nlohmann::json(*c.sparsity.global_sparsity) : nlohmann::json(nullptr); }});
  k.push_back(scalar_key("sparsity.protect_new_growth", "keep fresh connections out of the next drop", c.sparsity.protect_new_growth));
  k.push_back(scalar_key("agent.gamma", "discount", c.agent.gamma));
  k.push_back(scalar_key("agent.tau", "target smoothing coefficient", c.agent.tau));
  k.push_back(scalar_key("agent.lr", "Adam learning rate", c.agent.lr));
  k.push_back(scalar_key("agent.weight_decay", "L2 weight decay on weights", c.agent.weight_decay));
  k.push_back(scalar_key("agent.batch_size", "minibatch size n", c.agent.batch_size));
  k.push_back(scalar_key("agent.critic_interval", "train every k_c env steps", c.agent.critic_interval));
  k.push_back(scalar_key("agent.actor_interval", "actor update every k_a train calls (td3: 2, sac: 1)", c.agent.actor_interval));
  k.push_back(scalar_key("agent.target_interval", "target update every k_tar train calls (td3: 2, sac: 1)", c.agent.target_interval));
  k.push_back(scalar_key("agent.alpha", "SAC temperature (fixed)", c.agent.alpha));
  k.push_back(scalar_key("agent.exploration_noise", "TD3 exploration noise std", c.agent.exploration_noise));
  k.push_back(scalar_key("agent.target_noise", "TD3 target policy noise std", c.agent.target_noise));
  k.push_back(scalar_key("agent.target_noise_clip", "TD3 target noise clip", c.agent.target_noise_clip));
  k.push_back(scalar_key("agent.hidden", "hidden layer widths", c.agent.hidden));
  k.push_back(scalar_key("run.total_steps", "env steps T", c.run.total_steps));
  k.push_back(scalar_key("run.initial_collect", "random-action steps b_init before training", c.run.initial_collect));
  k.push_back(scalar_key("run.buffer_capacity", "replay buffer capacity", c.run.buffer_capacity));
  k.push_back(scalar_key("run.eval_interval", "env steps between evaluations", c.run.eval_interval));
  k.push_back(scalar_key("run.eval_episodes", "episodes per evaluation", c.run.eval_episodes));
  k.push_back(scalar_key("run.seeds", "seeds for suites / multi-seed training", c.run.seeds));
  k.push_back(scalar_key("run.output_dir", "artifact directory", c.run.output_dir));
  k.push_back(scalar_key("run.checkpoint_interval", "env steps between checkpoints (0: end only)", c.run.checkpoint_interval));
  k.push_back(scalar_key("run.record_connectivity", "track input-layer connectivity", c.run.record_connectivity));
  k.push_back(scalar_key("run.scale_topology_period", "shrink the topology period for short runs", c.run.scale_topology_period));
  return k;
}

inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  auto copy = cfg;
  nlohmann::json j = nlohmann::json::object();
  for (const auto& key : config_schema(copy)) j[key.path] = key.get();
  return j;
}

// FNV-1a over the canonical JSON dump.
inline std::uint64_t config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : config_to_json(cfg).dump()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

namespace detail {

inline void flatten(const YAML::Node& node, const std::string& prefix, std::vector<std::pair<std::string, YAML::Node>>& out) {
  if (node.IsMap()) {
    for (const auto& kv : node) {
      const auto key = kv.first.as<std::string>();
      flatten(kv.second, prefix.empty() ? key : prefix + "." + key, out);
    }
  } else {
    out.emplace_back(prefix, node);
  }
}

inline std::string where(const std::string& source, const YAML::Node& n) {
  const auto mark = n.Mark();
  if (mark.line < 0) return source;
  return source + ":" + std::to_string(mark.line + 1);
}

}  // namespace detail

// Apply a parsed YAML document on top of `cfg`. Errors name the source line.
inline void apply_yaml(ExperimentConfig& cfg, const YAML::Node& root, const std::string& source) {
  if (!root || root.IsNull()) return;
  if (!root.IsMap()) throw ConfigError(source + ": top level must be a mapping");
  std::vector<std::pair<std::string, YAML::Node>> entries;
  detail::flatten(root, "", entries);
  auto schema = config_schema(cfg);
  auto find = [&](const std::string& p) -> ConfigKey* {
    for (auto& k : schema)
      if (k.path == p) return &k;
    return nullptr;
  };
  // algorithm first: it selects agent defaults that later keys may override
  for (const auto& [path, node] : entries) {
    if (path != "algorithm") continue;
    try {
      find(path)->set(node);
    } catch (const std::exception& e) {
      throw ConfigError(detail::where(source, node) + ": bad value for 'algorithm': " + e.what());
    }
    auto hidden = cfg.agent.hidden;
    cfg.agent = agents::AgentHyperparams::defaults(cfg.algorithm);
    cfg.agent.hidden = hidden;
  }
  for (const auto& [path, node] : entries) {
    if (path == "algorithm") continue;
    auto* key = find(path);
    if (!key) throw ConfigError(detail::where(source, node) + ": unknown key '" + path + "'");
    try {
      key->set(node);
    } catch (const ConfigError& e) {
      throw ConfigError(detail::where(source, node) + ": bad value for '" + path + "': " + e.what());
    } catch (const YAML::Exception& e) {
      throw ConfigError(detail::where(source, node) + ": bad value for '" + path + "': " + e.msg);
    }
  }
}

// "a.b=value" overrides, applied after the file.
inline void apply_overrides(ExperimentConfig& cfg, const std::vector<std::string>& overrides) {
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + ov + "': expected key=value");
    const auto key = ov.substr(0, eq);
    YAML::Node value;
    try {
      value = YAML::Load(ov.substr(eq + 1));
    } catch (const YAML::Exception& e) {
      throw ConfigError("override '" + ov + "': " + e.msg);
    }
    // nest the dotted key so apply_yaml handles ordering and validation
    YAML::Node root;
    std::vector<std::string> parts;
    std::stringstream ss(key);
    for (std::string p; std::getline(ss, p, '.');) parts.push_back(p);
    YAML::Node leaf = value;
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
      YAML::Node m(YAML::NodeType::Map);
      m[*it] = leaf;
      leaf = m;
    }
    apply_yaml(cfg, leaf, "override '" + ov + "'");
  }
}

// Desk-scale presets addressable by name from the CLI.
inline std::map<std::string, std::string> builtin_presets() {
  const std::string desk = "agent:\n  hidden: [64, 64]\n";
  auto preset = [&](const std::string& name, const std::string& alg, const std::string& variant,
                    const std::string& extra = "") {
    return "name: " + name + "\nalgorithm: " + alg + "\nvariant: " + variant + "\n" + desk + extra;
  };
  // four sub-environments of one full desk run each; the buffer spans one of them
  const std::string pene =
      "pene:\n  enabled: true\nrun:\n  total_steps: 240000\n  buffer_capacity: 60000\n  eval_interval: 2000\n";
  return {
      {"toy_anf_td3", preset("toy_anf_td3", "td3", "anf")},
      {"toy_dense_td3", preset("toy_dense_td3", "td3", "dense")},
      {"toy_static_anf_td3", preset("toy_static_anf_td3", "td3", "static_anf")},
      {"toy_anf_sac", preset("toy_anf_sac", "sac", "anf")},
      {"toy_dense_sac", preset("toy_dense_sac", "sac", "dense")},
      {"toy_pene_anf_td3", preset("toy_pene_anf_td3", "td3", "anf", pene)},
      {"toy_pene_anf_sac", preset("toy_pene_anf_sac", "sac", "anf", pene)},
  };
}

inline ExperimentConfig parse_config_text(const std::string& text, const std::string& source) {
  ExperimentConfig cfg;
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  apply_yaml(cfg, root, source);
  return cfg;
}

// `spec` is a YAML file path or a preset name.
inline ExperimentConfig load_config(const std::string& spec, const std::vector<std::string>& overrides = {}) {
  ExperimentConfig cfg;
  if (std::filesystem::exists(spec)) {
    std::ifstream is(spec);
    std::stringstream buf;
    buf << is.rdbuf();
    cfg = parse_config_text(buf.str(), spec);
  } else {
    auto presets = builtin_presets();
    auto it = presets.find(spec);
    if (it == presets.end()) throw ConfigError("config file '" + spec + "' not found (and not a preset name)");
    cfg = parse_config_text(it->second, "preset " + spec);
  }
  apply_overrides(cfg, overrides);
  if (cfg.ene.distribution == env::NoiseDistribution::imitate && !cfg.histogram_file.empty() &&
      cfg.ene.imitate_histograms.empty())
    cfg.ene.imitate_histograms = env::load_histograms(cfg.histogram_file);
  cfg.validate();
  return cfg;
}

}  // namespace anf::harness
