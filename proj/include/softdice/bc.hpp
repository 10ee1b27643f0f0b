#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "softdice/softdice.hpp"

namespace softdice {

struct BcConfig {
  double lr = 3e-4;
  std::size_t batch_size = 256;
  std::size_t iterations = 0;
  std::size_t eval_interval = 0;
  std::size_t eval_episodes = 10;
  std::uint64_t seed = 0;
  std::size_t hidden_width = 256;
  std::size_t hidden_layers = 2;

  void validate() const {
    if (lr < 0.0) throw contract_error("BcConfig: lr must be >= 0");
    if (batch_size == 0) throw contract_error("BcConfig: batch_size must be >= 1");
  }
};

/// Negative mean log-likelihood of the demonstrated actions. Stored actions
/// may touch the [-1, 1] boundary (saturated experts), so they are clipped
/// to +-(1 - 1e-6) before the density evaluation.
inline Var bc_loss(const TanhGaussianPolicy& pi, const Tensor& states, const Tensor& actions) {
  if (states.rows() == 0) throw contract_error("bc_loss: empty batch");
  Tensor clipped = clamp(actions, -(1.0 - 1e-6), 1.0 - 1e-6);
  return neg(mean(pi.log_prob(constant(states), clipped)));
}

struct BcTrainState {
  TanhGaussianPolicy policy;
  Adam opt;
  std::size_t step = 0;
  Rng rng;

  BcTrainState(std::size_t state_dim, std::size_t action_dim, const BcConfig& cfg)
      : rng(Rng::derive_seed(cfg.seed, 2)) {
    Rng net_rng(Rng::derive_seed(cfg.seed, 1));
    policy = TanhGaussianPolicy(state_dim, action_dim, cfg.hidden_width, cfg.hidden_layers,
                                net_rng);
    opt = Adam(policy.parameters());
  }
};

inline StepMetrics bc_train_step(BcTrainState& st, const DemoBuffer& demo, const BcConfig& cfg) {
  ++st.step;
  Batch batch = demo.sample_transitions(cfg.batch_size, st.rng);
  Var loss = bc_loss(st.policy, batch.states, batch.actions);

  auto theta = st.policy.parameters();
  std::vector<Tensor> g = gradient(loss, theta);

  StepMetrics m;
  m.step = st.step;
  m.j_e = loss.value().item();
  m.policy_grad_norm = detail::grad_norm(g);
  {
    Rng ent_rng(Rng::derive_seed(cfg.seed, 50000 + st.step));
    auto s = st.policy.sample(constant(batch.states), ent_rng);
    m.policy_entropy = -mean_all(s.log_prob.value()).item();
  }

  st.opt.step(theta, g, cfg.lr);
  st.policy.project_parameters();
  detail::check_params_finite(theta, st.step, "policy");
  return m;
}

struct BcTrainResult {
  std::vector<StepMetrics> log;
  std::optional<BcTrainState> state;
  double final_return = 0.0;
  bool evaluated = false;
};

/// Plain maximum-likelihood descent with the shared evaluation cadence and
/// metrics format.
inline BcTrainResult bc_train(const BcConfig& cfg, const DemoBuffer& demo,
                              ContinuousEnv* eval_env, MetricsWriter* writer = nullptr) {
  cfg.validate();
  if (demo.empty()) throw contract_error("bc_train: demonstration buffer is empty");

  BcTrainResult result;
  result.state.emplace(demo.state_dim(), demo.action_dim(), cfg);
  BcTrainState& st = *result.state;

  for (std::size_t t = 1; t <= cfg.iterations; ++t) {
    StepMetrics m = bc_train_step(st, demo, cfg);
    const bool eval_now = cfg.eval_interval > 0 && eval_env != nullptr &&
                          (t % cfg.eval_interval == 0 || t == cfg.iterations);
    if (eval_now) {
      EvalResult er = evaluate_policy(*eval_env, st.policy, cfg.eval_episodes,
                                      Rng::derive_seed(cfg.seed, 1000 + t), true);
      m.has_eval = true;
      m.eval_return_mean = er.mean;
      m.eval_return_std = er.stddev;
      result.final_return = er.mean;
      result.evaluated = true;
    }
    if (writer) writer->append(m);
    result.log.push_back(m);
  }
  if (writer) writer->flush();
  return result;
}

}  // namespace softdice
