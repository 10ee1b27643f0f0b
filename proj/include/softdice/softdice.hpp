#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "softdice/envs.hpp"
#include "softdice/metrics.hpp"
#include "softdice/mlp.hpp"
#include "softdice/policy.hpp"
#include "softdice/replay.hpp"

namespace softdice {

struct SoftDiceConfig {
  double gamma = 0.99;
  double beta = 0.01;       // entropy coefficient
  double gp_lambda = 10.0;  // gradient-penalty weight
  double lr_critic = 1e-3;
  double lr_policy = 1e-5;
  std::size_t batch_size = 256;
  std::size_t iterations = 0;
  std::size_t eval_interval = 0;  // 0 disables evaluation entirely
  std::size_t eval_episodes = 10;
  std::uint64_t seed = 0;
  std::size_t hidden_width = 256;
  std::size_t hidden_layers = 2;
  double orthogonal_reg = 0.0;  // optional actor regularizer, off by default

  // online mode: mix rollout samples into the expert stream (off by default)
  double online_alpha = 0.0;
  std::size_t rollout_every = 5;
  std::size_t online_capacity = 100000;

  void validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0))
      throw contract_error("SoftDiceConfig: gamma must be in [0, 1)");
    if (beta < 0.0) throw contract_error("SoftDiceConfig: beta must be >= 0");
    if (gp_lambda < 0.0) throw contract_error("SoftDiceConfig: gp_lambda must be >= 0");
    if (lr_critic < 0.0 || lr_policy < 0.0)
      throw contract_error("SoftDiceConfig: learning rates must be >= 0");
    if (batch_size == 0) throw contract_error("SoftDiceConfig: batch_size must be >= 1");
    if (!(online_alpha >= 0.0 && online_alpha <= 1.0))
      throw contract_error("SoftDiceConfig: online_alpha must be in [0, 1]");
    if (hidden_width == 0) throw contract_error("SoftDiceConfig: hidden_width must be >= 1");
  }
};

/// Loss on expert samples:
///   mean[ f(s,a) - gamma (1-e) f(s', a') + beta log pi(a'|s') ],  a' ~ pi(.|s').
/// One reparametrized sample a' is shared between the bootstrap term and the
/// log-density term. Differentiable w.r.t. both policy and critic.
struct ExpertLossParts {
  Var loss;
  double mean_log_prob = 0.0;  // of the sampled a', for entropy reporting
};

inline ExpertLossParts loss_expert(const CriticF& f, const TanhGaussianPolicy& pi,
                                   const Batch& batch, double gamma, double beta,
                                   const Tensor& eps_next) {
  if (batch.size() == 0) throw contract_error("loss_expert: empty batch");
  Var s = constant(batch.states);
  Var a = constant(batch.actions);
  Var s2 = constant(batch.next_states);
  Var mask = constant(batch.mask);

  Var f_expert = f.apply(s, a);
  auto next = pi.sample_with_noise(s2, eps_next);
  Var f_next = f.apply(s2, next.action);
  Var body = sub(f_expert, scale(mul(mask, f_next), gamma));
  body = add(body, scale(next.log_prob, beta));
  ExpertLossParts out;
  out.loss = mean(body);
  out.mean_log_prob = mean_all(next.log_prob.value()).item();
  return out;
}

inline ExpertLossParts loss_expert(const CriticF& f, const TanhGaussianPolicy& pi,
                                   const Batch& batch, double gamma, double beta, Rng& rng) {
  return loss_expert(f, pi, batch, gamma, beta,
                     rng.normal_tensor(batch.size(), pi.action_dim()));
}

/// Loss on initial samples: (1 - gamma) mean[ f(s0, a0) ], a0 ~ pi(.|s0).
inline Var loss_initial(const CriticF& f, const TanhGaussianPolicy& pi,
                        const Tensor& initial_states, double gamma, const Tensor& eps0) {
  if (initial_states.rows() == 0) throw contract_error("loss_initial: empty batch");
  Var s0 = constant(initial_states);
  auto first = pi.sample_with_noise(s0, eps0);
  return scale(mean(f.apply(s0, first.action)), 1.0 - gamma);
}

inline Var loss_initial(const CriticF& f, const TanhGaussianPolicy& pi,
                        const Tensor& initial_states, double gamma, Rng& rng) {
  return loss_initial(f, pi, initial_states, gamma,
                      rng.normal_tensor(initial_states.rows(), pi.action_dim()));
}

/// Gradient penalty on expert samples: mean[ (||grad_{(s,a)} f||_2 - 1)^2 ].
/// Differentiable w.r.t. the critic parameters via the double backward pass.
inline Var gradient_penalty(const CriticF& f, const Batch& batch) {
  Tensor x = concat_cols(batch.states, batch.actions);
  Var grads = input_gradient([&f](const Var& v) { return f.apply(v); }, x);
  return mean(square(add_constant(l2_norm_rows(grads), -1.0)));
}

struct TrainState {
  TanhGaussianPolicy policy;
  CriticF critic;
  Adam policy_opt;
  Adam critic_opt;
  std::size_t step = 0;
  Rng rng;

  TrainState(std::size_t state_dim, std::size_t action_dim, const SoftDiceConfig& cfg)
      : rng(Rng::derive_seed(cfg.seed, 2)) {
    Rng net_rng(Rng::derive_seed(cfg.seed, 1));
    policy = TanhGaussianPolicy(state_dim, action_dim, cfg.hidden_width, cfg.hidden_layers,
                                net_rng);
    critic = CriticF(state_dim, action_dim, cfg.hidden_width, cfg.hidden_layers, net_rng);
    policy_opt = Adam(policy.parameters());
    critic_opt = Adam(critic.parameters());
  }
};

namespace detail {

inline double grad_norm(const std::vector<Tensor>& grads) {
  double s = 0.0;
  for (const Tensor& g : grads)
    for (double v : g.data()) s += v * v;
  return std::sqrt(s);
}

inline void check_params_finite(const std::vector<Var>& params, std::size_t step,
                                const char* who) {
  for (const Var& p : params)
    if (!p.value().all_finite())
      throw divergence_error(std::string("diverged: non-finite ") + who + " parameters", step);
}

}  // namespace detail

/// One alternating update. Both losses are computed from one sampled batch;
/// policy and critic gradients are taken from the same graph before either
/// update is applied. The critic ascends J_E - J_pi - lambda J_GP, the policy
/// descends J_E - J_pi.
inline StepMetrics train_step(TrainState& st, const DemoBuffer& demo, const SoftDiceConfig& cfg,
                              const OnlineBuffer* online = nullptr) {
  ++st.step;
  const std::size_t batch_size = cfg.batch_size;
  Batch batch = cfg.online_alpha > 0.0
                    ? mix_sample(demo, online, cfg.online_alpha, batch_size, st.rng)
                    : demo.sample_transitions(batch_size, st.rng);
  Tensor initial_states = demo.sample_initial_states(batch_size, st.rng);
  Tensor eps_next = st.rng.normal_tensor(batch_size, st.policy.action_dim());
  Tensor eps0 = st.rng.normal_tensor(batch_size, st.policy.action_dim());

  ExpertLossParts expert = loss_expert(st.critic, st.policy, batch, cfg.gamma, cfg.beta, eps_next);
  Var j_pi = loss_initial(st.critic, st.policy, initial_states, cfg.gamma, eps0);
  Var j_gp = gradient_penalty(st.critic, batch);

  Var policy_objective = sub(expert.loss, j_pi);
  if (cfg.orthogonal_reg > 0.0)
    policy_objective =
        add(policy_objective, scale(st.policy.mean_net().orthogonal_penalty(), cfg.orthogonal_reg));
  Var critic_objective = sub(sub(expert.loss, j_pi), scale(j_gp, cfg.gp_lambda));

  auto theta = st.policy.parameters();
  auto phi = st.critic.parameters();
  std::vector<Tensor> g_theta = gradient(policy_objective, theta);
  std::vector<Tensor> g_phi = gradient(critic_objective, phi);

  StepMetrics m;
  m.step = st.step;
  m.j_e = expert.loss.value().item();
  m.j_pi = j_pi.value().item();
  m.j_gp = j_gp.value().item();
  m.policy_entropy = -expert.mean_log_prob;
  m.policy_grad_norm = detail::grad_norm(g_theta);
  m.critic_grad_norm = detail::grad_norm(g_phi);

  for (Tensor& g : g_phi) g = neg(g);  // gradient ascent for the critic
  st.critic_opt.step(phi, g_phi, cfg.lr_critic);
  st.policy_opt.step(theta, g_theta, cfg.lr_policy);
  st.policy.project_parameters();

  detail::check_params_finite(theta, st.step, "policy");
  detail::check_params_finite(phi, st.step, "critic");
  return m;
}

struct TrainResult {
  std::vector<StepMetrics> log;
  std::optional<TrainState> state;
  double final_return = 0.0;  // last evaluation, if any
  bool evaluated = false;
};

void collect_rollout(ContinuousEnv& env, const TanhGaussianPolicy& policy, Rng& rng,
                     OnlineBuffer& online);

/// Runs the full loop: T alternating updates over the demonstration buffer,
/// evaluating every eval_interval steps (and after the last step). Training
/// itself never steps the environment; with online_alpha > 0 the optional
/// rollout mode collects one episode every rollout_every updates.
inline TrainResult train(const SoftDiceConfig& cfg, const DemoBuffer& demo,
                         ContinuousEnv* eval_env, MetricsWriter* writer = nullptr) {
  cfg.validate();
  if (demo.empty()) throw contract_error("train: demonstration buffer is empty");

  TrainResult result;
  result.state.emplace(demo.state_dim(), demo.action_dim(), cfg);
  TrainState& st = *result.state;

  std::optional<OnlineBuffer> online;
  Rng rollout_rng(Rng::derive_seed(cfg.seed, 3));
  if (cfg.online_alpha > 0.0) {
    if (eval_env == nullptr)
      throw contract_error("train: online_alpha > 0 requires an environment");
    online.emplace(cfg.online_capacity);
    collect_rollout(*eval_env, st.policy, rollout_rng, *online);
  }

  for (std::size_t t = 1; t <= cfg.iterations; ++t) {
    StepMetrics m = train_step(st, demo, cfg, online ? &*online : nullptr);
    if (online && (t % cfg.rollout_every == 0))
      collect_rollout(*eval_env, st.policy, rollout_rng, *online);
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

/// One stochastic episode into the online buffer.
inline void collect_rollout(ContinuousEnv& env, const TanhGaussianPolicy& policy, Rng& rng,
                            OnlineBuffer& online) {
  std::vector<double> s = env.reset(rng);
  for (;;) {
    Tensor state(1, s.size());
    for (std::size_t i = 0; i < s.size(); ++i) state(0, i) = s[i];
    Tensor a = policy.sample(constant(state), rng).action.value();
    std::vector<double> action(a.data().begin(), a.data().end());
    StepResult r = env.step(action);
    online.push(Transition{s, action, r.next_state, r.done ? 1 : 0});
    s = r.next_state;
    if (r.done) break;
  }
}

/// Monte-Carlo policy entropy over a set of states, tiling each state
/// `repeats` times.
inline double measure_entropy(const TanhGaussianPolicy& policy, const Tensor& states,
                              Rng& rng, std::size_t repeats = 16) {
  const std::size_t n = states.rows();
  Tensor tiled(n * repeats, states.cols());
  for (std::size_t r = 0; r < repeats; ++r)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < states.cols(); ++j)
        tiled(r * n + i, j) = states(i, j);
  return policy.entropy_estimate(tiled, rng);
}

}  // namespace softdice
