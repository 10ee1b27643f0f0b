#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "softdice/bc.hpp"
#include "softdice/checkpoint.hpp"
#include "softdice/valuedice.hpp"

namespace softdice {

/// A fully-resolved experiment: which algorithm, which env, which demos,
/// which seeds, and the algorithm's own block. Flags override file fields;
/// defaults are materialized before anything runs so every run directory is
/// self-describing.
struct ExperimentConfig {
  std::string algorithm = "softdice";  // softdice | valuedice | bc
  std::string env = "point_mass";
  std::string demo_file;
  std::size_t n_trajectories = 0;  // 0 = use all trajectories in the file
  std::vector<std::uint64_t> seeds = {0};
  std::string output_dir = "runs/out";

  SoftDiceConfig softdice;
  ValueDiceConfig valuedice;
  BcConfig bc;

  void validate() const {
    if (algorithm != "softdice" && algorithm != "valuedice" && algorithm != "bc")
      throw contract_error("config: unknown algorithm '" + algorithm + "'");
    if (seeds.empty()) throw contract_error("config: seeds must be non-empty");
    if (demo_file.empty()) throw contract_error("config: demo_file is required");
    if (!std::filesystem::exists(demo_file))
      throw contract_error("config: demo_file '" + demo_file + "' does not exist");
    (void)make_env(env);  // validates the name
  }
};

namespace detail {

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline void read_common(const nlohmann::json& j, double& gamma, std::size_t& batch,
                        std::size_t& iters, std::size_t& eval_interval,
                        std::size_t& eval_episodes, std::size_t& width, std::size_t& layers) {
  read_field(j, "gamma", gamma);
  read_field(j, "batch_size", batch);
  read_field(j, "iterations", iters);
  read_field(j, "eval_interval", eval_interval);
  read_field(j, "eval_episodes", eval_episodes);
  read_field(j, "hidden_width", width);
  read_field(j, "hidden_layers", layers);
}

}  // namespace detail

inline void from_json_block(const nlohmann::json& j, SoftDiceConfig& c) {
  detail::read_common(j, c.gamma, c.batch_size, c.iterations, c.eval_interval, c.eval_episodes,
                      c.hidden_width, c.hidden_layers);
  detail::read_field(j, "beta", c.beta);
  detail::read_field(j, "gp_lambda", c.gp_lambda);
  detail::read_field(j, "lr_critic", c.lr_critic);
  detail::read_field(j, "lr_policy", c.lr_policy);
  detail::read_field(j, "orthogonal_reg", c.orthogonal_reg);
  detail::read_field(j, "online_alpha", c.online_alpha);
  detail::read_field(j, "rollout_every", c.rollout_every);
  detail::read_field(j, "online_capacity", c.online_capacity);
}

inline nlohmann::json to_json_block(const SoftDiceConfig& c) {
  return {{"gamma", c.gamma},
          {"beta", c.beta},
          {"gp_lambda", c.gp_lambda},
          {"lr_critic", c.lr_critic},
          {"lr_policy", c.lr_policy},
          {"batch_size", c.batch_size},
          {"iterations", c.iterations},
          {"eval_interval", c.eval_interval},
          {"eval_episodes", c.eval_episodes},
          {"hidden_width", c.hidden_width},
          {"hidden_layers", c.hidden_layers},
          {"orthogonal_reg", c.orthogonal_reg},
          {"online_alpha", c.online_alpha},
          {"rollout_every", c.rollout_every},
          {"online_capacity", c.online_capacity}};
}

inline void from_json_block(const nlohmann::json& j, ValueDiceConfig& c) {
  detail::read_common(j, c.gamma, c.batch_size, c.iterations, c.eval_interval, c.eval_episodes,
                      c.hidden_width, c.hidden_layers);
  detail::read_field(j, "alpha", c.alpha);
  detail::read_field(j, "lr_critic", c.lr_critic);
  detail::read_field(j, "lr_policy", c.lr_policy);
  detail::read_field(j, "exp_clamp", c.exp_clamp);
  detail::read_field(j, "rollout_every", c.rollout_every);
  detail::read_field(j, "online_capacity", c.online_capacity);
}

inline nlohmann::json to_json_block(const ValueDiceConfig& c) {
  return {{"gamma", c.gamma},
          {"alpha", c.alpha},
          {"lr_critic", c.lr_critic},
          {"lr_policy", c.lr_policy},
          {"batch_size", c.batch_size},
          {"iterations", c.iterations},
          {"eval_interval", c.eval_interval},
          {"eval_episodes", c.eval_episodes},
          {"hidden_width", c.hidden_width},
          {"hidden_layers", c.hidden_layers},
          {"exp_clamp", c.exp_clamp},
          {"rollout_every", c.rollout_every},
          {"online_capacity", c.online_capacity}};
}

inline void from_json_block(const nlohmann::json& j, BcConfig& c) {
  double unused_gamma = 0.0;
  detail::read_common(j, unused_gamma, c.batch_size, c.iterations, c.eval_interval,
                      c.eval_episodes, c.hidden_width, c.hidden_layers);
  detail::read_field(j, "lr", c.lr);
}

inline nlohmann::json to_json_block(const BcConfig& c) {
  return {{"lr", c.lr},
          {"batch_size", c.batch_size},
          {"iterations", c.iterations},
          {"eval_interval", c.eval_interval},
          {"eval_episodes", c.eval_episodes},
          {"hidden_width", c.hidden_width},
          {"hidden_layers", c.hidden_layers}};
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw contract_error("cannot open config file '" + path + "'");
  nlohmann::json j;
  in >> j;

  ExperimentConfig cfg;
  detail::read_field(j, "algorithm", cfg.algorithm);
  detail::read_field(j, "env", cfg.env);
  detail::read_field(j, "demo_file", cfg.demo_file);
  detail::read_field(j, "n_trajectories", cfg.n_trajectories);
  detail::read_field(j, "seeds", cfg.seeds);
  detail::read_field(j, "output_dir", cfg.output_dir);

  static const std::vector<std::string> known = {"algorithm",      "env",    "demo_file",
                                                 "n_trajectories", "seeds",  "output_dir",
                                                 "softdice",       "valuedice", "bc"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw contract_error("config: unknown key '" + it.key() + "'");
    if ((it.key() == "softdice" || it.key() == "valuedice" || it.key() == "bc") &&
        it.key() != cfg.algorithm)
      throw contract_error("config: block '" + it.key() + "' does not match algorithm '" +
                           cfg.algorithm + "'");
  }
  if (j.contains("softdice")) from_json_block(j.at("softdice"), cfg.softdice);
  if (j.contains("valuedice")) from_json_block(j.at("valuedice"), cfg.valuedice);
  if (j.contains("bc")) from_json_block(j.at("bc"), cfg.bc);
  return cfg;
}

inline nlohmann::json resolved_config_json(const ExperimentConfig& cfg, std::uint64_t seed) {
  nlohmann::json j = {{"algorithm", cfg.algorithm},
                      {"env", cfg.env},
                      {"demo_file", cfg.demo_file},
                      {"n_trajectories", cfg.n_trajectories},
                      {"seed", seed},
                      {"output_dir", cfg.output_dir}};
  if (cfg.algorithm == "softdice") j["softdice"] = to_json_block(cfg.softdice);
  if (cfg.algorithm == "valuedice") j["valuedice"] = to_json_block(cfg.valuedice);
  if (cfg.algorithm == "bc") j["bc"] = to_json_block(cfg.bc);
  return j;
}

struct SeedOutcome {
  std::uint64_t seed = 0;
  double final_return = 0.0;
  double final_entropy = 0.0;
  std::size_t demo_transitions = 0;  // transitions actually trained on
  bool diverged = false;
  std::string error;
};

/// Runs one seed of the experiment into out_dir: metrics.csv, checkpoint.json
/// and resolved-config.json. On divergence the partial metrics are kept and
/// the outcome is flagged.
inline SeedOutcome run_experiment_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                                       const std::vector<Trajectory>& trajectories,
                                       const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream rc(out_dir + "/resolved-config.json");
    rc << resolved_config_json(cfg, seed).dump(1) << "\n";
  }

  std::vector<Trajectory> used = cfg.n_trajectories > 0
                                     ? subsample_trajectories(trajectories, cfg.n_trajectories,
                                                              seed)
                                     : trajectories;
  DemoBuffer demo(used);
  auto env = make_env(cfg.env);
  MetricsWriter writer(out_dir + "/metrics.csv");

  SeedOutcome outcome;
  outcome.seed = seed;
  outcome.demo_transitions = demo.size();
  try {
    if (cfg.algorithm == "softdice") {
      SoftDiceConfig c = cfg.softdice;
      c.seed = seed;
      TrainResult r = train(c, demo, env.get(), &writer);
      outcome.final_return = r.final_return;
      Rng ent_rng(Rng::derive_seed(seed, 0xE27));
      outcome.final_entropy = measure_entropy(r.state->policy, demo.all_states(), ent_rng);
      auto named = r.state->policy.named_parameters("policy");
      auto critic_named = r.state->critic.named_parameters("critic");
      named.insert(named.end(), critic_named.begin(), critic_named.end());
      save_checkpoint(out_dir + "/checkpoint.json", named);
    } else if (cfg.algorithm == "valuedice") {
      ValueDiceConfig c = cfg.valuedice;
      c.seed = seed;
      ValueDiceTrainResult r = valuedice_train(c, demo, env.get(), &writer);
      outcome.final_return = r.final_return;
      Rng ent_rng(Rng::derive_seed(seed, 0xE27));
      outcome.final_entropy = measure_entropy(r.state->policy, demo.all_states(), ent_rng);
      auto named = r.state->policy.named_parameters("policy");
      auto critic_named = r.state->critic.named_parameters("critic");
      named.insert(named.end(), critic_named.begin(), critic_named.end());
      save_checkpoint(out_dir + "/checkpoint.json", named);
    } else {
      BcConfig c = cfg.bc;
      c.seed = seed;
      BcTrainResult r = bc_train(c, demo, env.get(), &writer);
      outcome.final_return = r.final_return;
      Rng ent_rng(Rng::derive_seed(seed, 0xE27));
      outcome.final_entropy = measure_entropy(r.state->policy, demo.all_states(), ent_rng);
      save_checkpoint(out_dir + "/checkpoint.json", r.state->policy.named_parameters("policy"));
    }
  } catch (const divergence_error& e) {
    writer.flush();
    outcome.diverged = true;
    outcome.error = e.what();
  }
  return outcome;
}

struct ExperimentResult {
  std::vector<SeedOutcome> outcomes;
  bool any_diverged = false;
};

/// All seeds, one subdirectory each, plus summary.json at the root.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<Trajectory> trajectories = load_demos(cfg.demo_file);
  if (trajectories.empty()) throw contract_error("demo file has no trajectories");

  std::filesystem::create_directories(cfg.output_dir);
  ExperimentResult result;
  std::vector<std::pair<std::uint64_t, double>> finals;
  nlohmann::json entropies = nlohmann::json::object();
  nlohmann::json demo_sizes = nlohmann::json::object();
  for (std::uint64_t seed : cfg.seeds) {
    SeedOutcome o = run_experiment_seed(cfg, seed, trajectories,
                                        cfg.output_dir + "/seed_" + std::to_string(seed));
    result.any_diverged = result.any_diverged || o.diverged;
    if (!o.diverged) {
      finals.emplace_back(seed, o.final_return);
      entropies[std::to_string(seed)] = o.final_entropy;
    }
    demo_sizes[std::to_string(seed)] = o.demo_transitions;
    result.outcomes.push_back(std::move(o));
  }
  write_summary(cfg.output_dir + "/summary.json", finals,
                {{"algorithm", cfg.algorithm},
                 {"final_entropy", entropies},
                 {"demo_transitions", demo_sizes}});
  return result;
}

}  // namespace softdice
