// temporary calibration harness; not part of the deliverable
#include <chrono>
#include <cstdio>
#include <string>

#include "softdice/bc.hpp"
#include "softdice/softdice.hpp"

using namespace softdice;

int main(int argc, char** argv) {
  std::string mode = argc > 1 ? argv[1] : "reference";

  if (mode == "reference") {
    // expert and random reference lines on point mass over 100 seeds
    PointMass2D env;
    auto expert = make_expert(env);
    EvalResult exp_eval = evaluate_actions(
        env, [&](const std::vector<double>& s, Rng&) { return expert(s); }, 100, 0xE0);
    EvalResult rnd_eval = evaluate_actions(
        env,
        [](const std::vector<double>&, Rng& rng) {
          return std::vector<double>{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        },
        100, 0xE1);
    std::printf("point_mass expert: mean %.6f std %.6f se %.6f\n", exp_eval.mean,
                exp_eval.stddev, exp_eval.stderr_mean());
    std::printf("point_mass random: mean %.6f std %.6f se %.6f\n", rnd_eval.mean,
                rnd_eval.stddev, rnd_eval.stderr_mean());

    Pendulum1D pend;
    auto pexpert = make_expert(pend);
    EvalResult pexp = evaluate_actions(
        pend, [&](const std::vector<double>& s, Rng&) { return pexpert(s); }, 100, 0xE2);
    EvalResult prnd = evaluate_actions(
        pend,
        [](const std::vector<double>&, Rng& rng) {
          return std::vector<double>{rng.uniform(-1.0, 1.0)};
        },
        100, 0xE3);
    std::printf("pendulum expert: mean %.6f std %.6f se %.6f\n", pexp.mean, pexp.stddev,
                pexp.stderr_mean());
    std::printf("pendulum random: mean %.6f std %.6f se %.6f\n", prnd.mean, prnd.stddev,
                prnd.stderr_mean());
    return 0;
  }

  if (mode == "speed") {
    PointMass2D env;
    auto expert = make_expert(env);
    GeneratedDemos demos = generate_demos(env, expert, 1, 0.0, 7);
    DemoBuffer demo(demos.trajectories);
    std::printf("demo transitions: %zu\n", demo.size());

    SoftDiceConfig cfg;
    cfg.batch_size = 64;
    cfg.hidden_width = 64;
    cfg.hidden_layers = 2;
    cfg.iterations = 200;
    cfg.seed = 1;
    auto t0 = std::chrono::steady_clock::now();
    TrainResult r = train(cfg, demo, nullptr);
    auto t1 = std::chrono::steady_clock::now();
    const double ms =
        std::chrono::duration_cast<std::chrono::microseconds>(t1 - t0).count() / 1000.0;
    std::printf("200 steps in %.1f ms -> %.2f ms/step\n", ms, ms / 200.0);
    return 0;
  }

  if (mode == "run") {
    // one SoftDICE run with the candidate acceptance config
    const std::uint64_t seed = argc > 2 ? std::stoull(argv[2]) : 0;
    const std::size_t iters = argc > 3 ? std::stoull(argv[3]) : 8000;
    const double lr_pi = argc > 4 ? std::stod(argv[4]) : 3e-4;
    const double beta = argc > 5 ? std::stod(argv[5]) : 0.01;
    const double gamma_arg = argc > 6 ? std::stod(argv[6]) : 0.99;
    const double lambda_arg = argc > 7 ? std::stod(argv[7]) : 10.0;
    const std::size_t batch_arg = argc > 8 ? std::stoull(argv[8]) : 64;
    const double lr_c = argc > 9 ? std::stod(argv[9]) : 1e-3;

    PointMass2D env;
    auto expert = make_expert(env);
    GeneratedDemos demos = generate_demos(env, expert, 1, 0.0, Rng::derive_seed(100, seed));
    std::printf("demo: %zu transitions, expert return %.3f\n",
                demos.trajectories[0].steps.size(), demos.returns[0]);
    DemoBuffer demo(demos.trajectories);

    SoftDiceConfig cfg;
    cfg.batch_size = batch_arg;
    cfg.hidden_width = 64;
    cfg.hidden_layers = 2;
    cfg.gamma = gamma_arg;
    cfg.beta = beta;
    cfg.gp_lambda = lambda_arg;
    cfg.lr_critic = lr_c;
    cfg.lr_policy = lr_pi;
    cfg.iterations = iters;
    cfg.eval_interval = 2000;
    cfg.eval_episodes = 10;
    cfg.seed = seed;

    auto t0 = std::chrono::steady_clock::now();
    PointMass2D eval_env;
    TrainResult r = train(cfg, demo, &eval_env);
    auto t1 = std::chrono::steady_clock::now();
    for (const StepMetrics& m : r.log)
      if (m.has_eval)
        std::printf("step %6zu  j_e %8.4f  j_pi %8.4f  j_gp %7.4f  H %7.3f  eval %8.3f\n",
                    m.step, m.j_e, m.j_pi, m.j_gp, m.policy_entropy, m.eval_return_mean);
    std::printf("wall: %.1f s\n",
                std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count() / 1000.0);
    // probe: per-episode behavior of the final deterministic policy
    int reached = 0;
    double mean_final_d = 0.0, mean_ret = 0.0;
    for (int ep = 0; ep < 30; ++ep) {
      Rng erng(Rng::derive_seed(777, ep));
      PointMass2D penv;
      std::vector<double> s = penv.reset(erng);
      double ret = 0.0;
      bool done = false;
      bool goal = false;
      while (!done) {
        Tensor st(1, 2);
        st(0, 0) = s[0];
        st(0, 1) = s[1];
        Tensor a = r.state->policy.mean_action(st);
        StepResult sr = penv.step({a(0, 0), a(0, 1)});
        ret += EnvRewardTap::last_reward(penv);
        s = sr.next_state;
        done = sr.done;
        goal = goal || sr.reached_goal;
      }
      reached += goal ? 1 : 0;
      mean_final_d += penv.distance_to_goal(s);
      mean_ret += ret;
    }
    std::printf("probe: reached %d/30, mean final dist %.3f, mean return %.2f\n", reached,
                mean_final_d / 30.0, mean_ret / 30.0);
    return 0;
  }

  if (mode == "bc") {
    const std::uint64_t seed = argc > 2 ? std::stoull(argv[2]) : 0;
    const std::size_t n_traj = argc > 3 ? std::stoull(argv[3]) : 1;
    const std::size_t iters = argc > 4 ? std::stoull(argv[4]) : 8000;

    PointMass2D env;
    auto expert = make_expert(env);
    GeneratedDemos demos = generate_demos(env, expert, n_traj, 0.0, Rng::derive_seed(100, seed));
    DemoBuffer demo(demos.trajectories);
    std::printf("demo: %zu trajectories, %zu transitions\n", demo.n_trajectories(), demo.size());

    BcConfig cfg;
    cfg.batch_size = 64;
    cfg.hidden_width = 64;
    cfg.hidden_layers = 2;
    cfg.lr = 3e-4;
    cfg.iterations = iters;
    cfg.eval_interval = 2000;
    cfg.eval_episodes = 30;
    cfg.seed = seed;

    PointMass2D eval_env;
    BcTrainResult r = bc_train(cfg, demo, &eval_env);
    for (const StepMetrics& m : r.log)
      if (m.has_eval)
        std::printf("step %6zu  nll %8.4f  H %7.3f  eval %8.3f\n", m.step, m.j_e,
                    m.policy_entropy, m.eval_return_mean);
    return 0;
  }

  if (mode == "matrix") {
    const std::size_t iters = argc > 2 ? std::stoull(argv[2]) : 20000;
    for (auto region : {PointMass2D::ResetRegion::kQuadrant, PointMass2D::ResetRegion::kFullBox}) {
      const char* rname = region == PointMass2D::ResetRegion::kQuadrant ? "quadrant" : "fullbox";
      PointMass2D ref_env({0.0, 0.0}, region);
      auto expert = make_expert(ref_env);
      EvalResult ee = evaluate_actions(
          ref_env, [&](const std::vector<double>& s, Rng&) { return expert(s); }, 100, 0xE0);
      EvalResult re = evaluate_actions(
          ref_env,
          [](const std::vector<double>&, Rng& rng) {
            return std::vector<double>{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
          },
          100, 0xE1);
      const double bar = re.mean + 0.8 * (ee.mean - re.mean);
      std::printf("[%s] expert %.2f random %.2f bar %.2f\n", rname, ee.mean, re.mean, bar);
      for (std::uint64_t seed : {0ULL, 1ULL}) {
        PointMass2D env({0.0, 0.0}, region);
        GeneratedDemos demos =
            generate_demos(env, make_expert(env), 1, 0.0, Rng::derive_seed(100, seed));
        DemoBuffer demo(demos.trajectories);

        SoftDiceConfig cfg;
        cfg.batch_size = 64;
        cfg.hidden_width = 64;
        cfg.hidden_layers = 2;
        cfg.gamma = 0.99;
        cfg.beta = 0.1;
        cfg.gp_lambda = 10.0;
        cfg.lr_critic = 3e-4;
        cfg.lr_policy = 3e-4;
        cfg.iterations = iters;
        cfg.eval_interval = iters;
        cfg.eval_episodes = 30;
        cfg.seed = seed;
        PointMass2D eval_env({0.0, 0.0}, region);
        TrainResult sr = train(cfg, demo, &eval_env);

        BcConfig bcfg;
        bcfg.batch_size = 64;
        bcfg.hidden_width = 64;
        bcfg.hidden_layers = 2;
        bcfg.lr = 3e-4;
        bcfg.iterations = iters;
        bcfg.eval_interval = iters;
        bcfg.eval_episodes = 30;
        bcfg.seed = seed;
        PointMass2D eval_env2({0.0, 0.0}, region);
        BcTrainResult br = bc_train(bcfg, demo, &eval_env2);

        std::printf("[%s] seed %llu: softdice %.2f  bc %.2f\n", rname,
                    static_cast<unsigned long long>(seed), sr.final_return, br.final_return);
      }
    }
    return 0;
  }

  if (mode == "fullbox") {
    const std::size_t iters = argc > 2 ? std::stoull(argv[2]) : 20000;
    const double beta = argc > 3 ? std::stod(argv[3]) : 0.1;
    const std::size_t batch = argc > 4 ? std::stoull(argv[4]) : 64;
    const double lr_c = argc > 5 ? std::stod(argv[5]) : 3e-4;
    const double lr_p = argc > 6 ? std::stod(argv[6]) : 3e-4;
    for (std::uint64_t seed : {0ULL, 1ULL, 2ULL}) {
      PointMass2D env({0.0, 0.0}, PointMass2D::ResetRegion::kFullBox);
      GeneratedDemos demos =
          generate_demos(env, make_expert(env), 1, 0.0, Rng::derive_seed(100, seed));
      DemoBuffer demo(demos.trajectories);
      SoftDiceConfig cfg;
      cfg.batch_size = batch;
      cfg.hidden_width = 64;
      cfg.hidden_layers = 2;
      cfg.gamma = 0.99;
      cfg.beta = beta;
      cfg.gp_lambda = 10.0;
      cfg.lr_critic = lr_c;
      cfg.lr_policy = lr_p;
      cfg.iterations = iters;
      cfg.eval_interval = iters / 2;
      cfg.eval_episodes = 30;
      cfg.seed = seed;
      PointMass2D eval_env({0.0, 0.0}, PointMass2D::ResetRegion::kFullBox);
      TrainResult r = train(cfg, demo, &eval_env);
      std::printf("seed %llu (demo %zu steps): mid %.2f final %.2f\n",
                  static_cast<unsigned long long>(seed), demos.trajectories[0].steps.size(),
                  r.log[iters / 2 - 1].eval_return_mean, r.final_return);
      std::fflush(stdout);
    }
    return 0;
  }

  std::printf("unknown mode\n");
  return 2;
}
