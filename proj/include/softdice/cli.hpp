#pragma once

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "softdice/experiment.hpp"
#include "softdice/verify_suite.hpp"

namespace softdice::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // verification or training failure
inline constexpr int kExitUsage = 2;    // bad flags, unknown names, bad config

struct GenDemosArgs {
  std::string env = "point_mass";
  std::size_t n_traj = 1;
  std::uint64_t seed = 0;
  std::string out = "demos.jsonl";
  double noise = -1.0;  // <0 = per-env default
  double gain = 3.0;
};

inline int cmd_gen_demos(const GenDemosArgs& a) {
  if (a.n_traj == 0) {
    std::cerr << "gen-demos: --n-traj must be >= 1\n";
    return kExitUsage;
  }
  std::unique_ptr<ContinuousEnv> env;
  try {
    env = make_env(a.env);
  } catch (const contract_error& e) {
    std::cerr << "gen-demos: " << e.what() << "\n";
    return kExitUsage;
  }
  const double noise = a.noise >= 0.0 ? a.noise : default_expert_noise(*env);
  GeneratedDemos demos = generate_demos(*env, make_expert(*env, a.gain), a.n_traj, noise, a.seed);
  save_demos(a.out, demos.trajectories);
  std::size_t transitions = 0;
  for (const auto& t : demos.trajectories) transitions += t.steps.size();
  double ret_std = 0.0;
  for (double r : demos.returns)
    ret_std += (r - demos.mean_return()) * (r - demos.mean_return());
  ret_std = demos.returns.size() > 1
                ? std::sqrt(ret_std / static_cast<double>(demos.returns.size() - 1))
                : 0.0;
  std::printf("wrote %zu trajectories (%zu transitions) to %s\n", demos.trajectories.size(),
              transitions, a.out.c_str());
  std::printf("expert return: mean %.6f std %.6f\n", demos.mean_return(), ret_std);
  return kExitOk;
}

struct TrainArgs {
  std::string config_path;
  // flag overrides; negative / empty means "keep the file's value"
  std::string out_dir;
  std::string seeds_csv;
  long long iterations = -1;
  std::string sweep;  // e.g. beta=0,0.01,0.1
  long long n_trajectories = -1;
};

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

inline void apply_sweep_value(ExperimentConfig& cfg, const std::string& field, double value) {
  if (cfg.algorithm == "softdice") {
    if (field == "beta") {
      cfg.softdice.beta = value;
      return;
    }
    if (field == "gp_lambda") {
      cfg.softdice.gp_lambda = value;
      return;
    }
    if (field == "gamma") {
      cfg.softdice.gamma = value;
      return;
    }
  }
  if (cfg.algorithm == "valuedice" && field == "alpha") {
    cfg.valuedice.alpha = value;
    return;
  }
  throw contract_error("sweep: field '" + field + "' is not sweepable for algorithm '" +
                       cfg.algorithm + "'");
}

}  // namespace detail

inline int cmd_train(const TrainArgs& a) {
  ExperimentConfig cfg;
  try {
    cfg = load_experiment_config(a.config_path);
    if (!a.out_dir.empty()) cfg.output_dir = a.out_dir;
    if (a.n_trajectories >= 0) cfg.n_trajectories = static_cast<std::size_t>(a.n_trajectories);
    if (!a.seeds_csv.empty()) {
      cfg.seeds.clear();
      for (const std::string& s : detail::split(a.seeds_csv, ','))
        cfg.seeds.push_back(std::stoull(s));
    }
    if (a.iterations >= 0) {
      cfg.softdice.iterations = static_cast<std::size_t>(a.iterations);
      cfg.valuedice.iterations = static_cast<std::size_t>(a.iterations);
      cfg.bc.iterations = static_cast<std::size_t>(a.iterations);
    }
    cfg.validate();
  } catch (const std::exception& e) {
    std::cerr << "train: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (!a.sweep.empty()) {
      const auto eq = a.sweep.find('=');
      if (eq == std::string::npos) {
        std::cerr << "train: --sweep expects field=v1,v2,...\n";
        return kExitUsage;
      }
      const std::string field = a.sweep.substr(0, eq);
      bool all_ok = true;
      for (const std::string& tok : detail::split(a.sweep.substr(eq + 1), ',')) {
        ExperimentConfig sub = cfg;
        detail::apply_sweep_value(sub, field, std::stod(tok));
        sub.output_dir = cfg.output_dir + "/" + field + "_" + tok;
        ExperimentResult r = run_experiment(sub);
        std::printf("sweep %s=%s -> %s/summary.json\n", field.c_str(), tok.c_str(),
                    sub.output_dir.c_str());
        all_ok = all_ok && !r.any_diverged;
      }
      return all_ok ? kExitOk : kExitFailure;
    }

    ExperimentResult r = run_experiment(cfg);
    for (const SeedOutcome& o : r.outcomes) {
      if (o.diverged)
        std::printf("seed %llu: DIVERGED (%s)\n", static_cast<unsigned long long>(o.seed),
                    o.error.c_str());
      else
        std::printf("seed %llu: final return %.6f\n", static_cast<unsigned long long>(o.seed),
                    o.final_return);
    }
    std::printf("summary: %s/summary.json\n", cfg.output_dir.c_str());
    return r.any_diverged ? kExitFailure : kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "train: " << e.what() << "\n";
    return kExitFailure;
  }
}

struct EvalArgs {
  std::string env = "point_mass";
  std::string checkpoint;
  std::size_t episodes = 30;
  std::uint64_t seed = 0;
  bool stochastic = false;
};

/// Rebuilds a policy from a checkpoint, inferring the architecture from the
/// stored shapes.
inline TanhGaussianPolicy policy_from_checkpoint(const std::string& path) {
  nlohmann::json j = read_checkpoint_json(path);
  std::size_t layers = 0;
  while (j.contains("policy.mean.w" + std::to_string(layers))) ++layers;
  if (layers == 0 || !j.contains("policy.log_std"))
    throw contract_error("checkpoint '" + path + "' does not contain a policy");
  auto w0_shape = j.at("policy.mean.w0").at("shape").get<std::vector<std::size_t>>();
  auto ls_shape = j.at("policy.log_std").at("shape").get<std::vector<std::size_t>>();
  const std::size_t state_dim = w0_shape[0];
  const std::size_t action_dim = ls_shape[1];
  const std::size_t hidden = layers > 1 ? w0_shape[1] : 0;
  Rng rng(0);
  TanhGaussianPolicy policy(state_dim, action_dim, layers > 1 ? hidden : 1, layers - 1, rng);
  load_checkpoint(path, policy.named_parameters("policy"));
  return policy;
}

inline int cmd_eval(const EvalArgs& a) {
  if (a.episodes == 0) {
    std::cerr << "eval: --episodes must be >= 1\n";
    return kExitUsage;
  }
  std::unique_ptr<ContinuousEnv> env;
  try {
    env = make_env(a.env);
  } catch (const contract_error& e) {
    std::cerr << "eval: " << e.what() << "\n";
    return kExitUsage;
  }
  try {
    TanhGaussianPolicy policy = policy_from_checkpoint(a.checkpoint);
    if (policy.state_dim() != env->state_dim() || policy.action_dim() != env->action_dim())
      throw contract_error("checkpoint dimensions (state " +
                           std::to_string(policy.state_dim()) + ", action " +
                           std::to_string(policy.action_dim()) + ") do not match env '" +
                           a.env + "' (state " + std::to_string(env->state_dim()) +
                           ", action " + std::to_string(env->action_dim()) + ")");
    EvalResult r = evaluate_policy(*env, policy, a.episodes, a.seed, !a.stochastic);
    nlohmann::json out = {{"mean", r.mean}, {"std", r.stddev}, {"episodes", r.episodes}};
    std::cout << out.dump() << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "eval: " << e.what() << "\n";
    return kExitFailure;
  }
}

struct VerifyArgs {
  std::uint64_t seed = 0;
  std::string only;
  bool inject_gamma_bug = false;  // negative-control hook used by the tests
};

inline int cmd_verify(const VerifyArgs& a) {
  analysis::VerifyOptions opt;
  opt.seed = a.seed;
  opt.only = a.only;
  opt.inject_gamma_bug = a.inject_gamma_bug;
  std::vector<analysis::PropertyResult> rows = analysis::run_verification_suite(opt);
  if (rows.empty()) {
    std::cerr << "verify: no properties match filter '" << a.only << "'\n";
    return kExitUsage;
  }
  bool all_pass = true;
  std::printf("%-18s %-6s %s\n", "property", "result", "detail");
  for (const auto& row : rows) {
    std::printf("%-18s %-6s %s\n", row.name.c_str(), row.pass ? "PASS" : "FAIL",
                row.detail.c_str());
    all_pass = all_pass && row.pass;
  }
  return all_pass ? kExitOk : kExitFailure;
}

inline int run(int argc, const char* const* argv) {
  CLI::App app{"offline imitation learning toolkit: SoftDICE, ValueDICE and "
               "behavioral cloning on toy control tasks, plus a numerical "
               "verification suite"};
  app.require_subcommand(1);

  GenDemosArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen-demos", "generate expert demonstrations");
  gen_cmd->add_option("--env", gen.env, "environment name (point_mass | pendulum)");
  gen_cmd->add_option("--n-traj", gen.n_traj, "number of trajectories");
  gen_cmd->add_option("--seed", gen.seed, "generation seed");
  gen_cmd->add_option("--out", gen.out, "output JSONL path")->required();
  gen_cmd->add_option("--noise", gen.noise, "expert action noise (default: per-env)");
  gen_cmd->add_option("--gain", gen.gain, "point-mass expert gain");

  TrainArgs tr;
  CLI::App* train_cmd = app.add_subcommand("train", "run a training experiment");
  train_cmd->add_option("--config", tr.config_path, "experiment config JSON")->required();
  train_cmd->add_option("--out", tr.out_dir, "override output directory");
  train_cmd->add_option("--seeds", tr.seeds_csv, "override seed list, comma-separated");
  train_cmd->add_option("--iterations", tr.iterations, "override iteration count");
  train_cmd->add_option("--n-traj", tr.n_trajectories, "override trajectory subsample count");
  train_cmd->add_option("--sweep", tr.sweep, "sweep a field, e.g. beta=0,0.01,0.1");

  EvalArgs ev;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--env", ev.env, "environment name");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "checkpoint JSON path")->required();
  eval_cmd->add_option("--episodes", ev.episodes, "number of evaluation episodes");
  eval_cmd->add_option("--seed", ev.seed, "evaluation seed");
  eval_cmd->add_flag("--stochastic", ev.stochastic, "sample actions instead of tanh(mu)");

  VerifyArgs vf;
  CLI::App* verify_cmd = app.add_subcommand("verify", "run the numerical verification suite");
  verify_cmd->add_option("--seed", vf.seed, "randomization seed");
  verify_cmd->add_option("--only", vf.only, "run only properties whose name contains this");
  verify_cmd->add_flag("--inject-gamma-bug", vf.inject_gamma_bug,
                       "negative control: misapply gamma so telescoping fails");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitUsage;
  }

  if (gen_cmd->parsed()) return cmd_gen_demos(gen);
  if (train_cmd->parsed()) return cmd_train(tr);
  if (eval_cmd->parsed()) return cmd_eval(ev);
  if (verify_cmd->parsed()) return cmd_verify(vf);
  return kExitUsage;
}

}  // namespace softdice::cli
