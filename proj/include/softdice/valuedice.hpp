#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "softdice/softdice.hpp"

namespace softdice {

struct ValueDiceConfig {
  double gamma = 0.99;
  double alpha = 0.0;  // replay-buffer regularizer; 0 = offline variant
  double lr_critic = 1e-3;
  double lr_policy = 1e-5;
  std::size_t batch_size = 256;
  std::size_t iterations = 0;
  std::size_t eval_interval = 0;
  std::size_t eval_episodes = 10;
  std::uint64_t seed = 0;
  std::size_t hidden_width = 256;
  std::size_t hidden_layers = 2;
  double exp_clamp = 10.0;  // exponent ceiling inside the log-mean-exp term
  std::size_t rollout_every = 5;
  std::size_t online_capacity = 100000;

  void validate() const {
    if (!(gamma >= 0.0 && gamma < 1.0))
      throw contract_error("ValueDiceConfig: gamma must be in [0, 1)");
    if (!(alpha >= 0.0 && alpha <= 1.0))
      throw contract_error("ValueDiceConfig: alpha must be in [0, 1]");
    if (batch_size == 0) throw contract_error("ValueDiceConfig: batch_size must be >= 1");
    if (lr_critic < 0.0 || lr_policy < 0.0)
      throw contract_error("ValueDiceConfig: learning rates must be >= 0");
  }
};

/// The saddle objective
///   -log mean_mix[ exp(nu(s,a) - gamma (1-e) nu(s',a')) ]
///   + (1-alpha)(1-gamma) mean[ nu(s0,a0) ]
///   + alpha mean_RB[ nu(s,a) - gamma (1-e) nu(s',a') ]
/// with a' ~ pi(.|s'), a0 ~ pi(.|s0) and the exponent clamped to <= exp_clamp.
/// mix_batch must already be the alpha-mixed sample (all-expert when alpha=0);
/// online_batch supplies the third term and may be null when alpha = 0.
inline Var valuedice_loss(const CriticF& nu, const TanhGaussianPolicy& pi,
                          const Batch& mix_batch, const Tensor& initial_states,
                          const Batch* online_batch, double alpha, double gamma,
                          double exp_clamp, Rng& rng) {
  if (mix_batch.size() == 0) throw contract_error("valuedice_loss: empty batch");
  if (alpha > 0.0 && online_batch == nullptr)
    throw contract_error("valuedice_loss: alpha > 0 requires an online batch");

  auto residual = [&](const Batch& b) {
    Var s = constant(b.states);
    Var a = constant(b.actions);
    Var s2 = constant(b.next_states);
    Var mask = constant(b.mask);
    auto next = pi.sample_with_noise(s2, rng.normal_tensor(b.size(), pi.action_dim()));
    Var boot = mul(mask, nu.apply(s2, next.action));
    return sub(nu.apply(s, a), scale(boot, gamma));
  };

  Var x = residual(mix_batch);
  Var log_term = neg(log(mean(exp(clamp(x, -std::numeric_limits<double>::infinity(),
                                        exp_clamp)))));

  auto first = pi.sample_with_noise(constant(initial_states),
                                    rng.normal_tensor(initial_states.rows(), pi.action_dim()));
  Var initial_term = scale(mean(nu.apply(constant(initial_states), first.action)),
                           (1.0 - alpha) * (1.0 - gamma));

  Var loss = add(log_term, initial_term);
  if (alpha > 0.0) loss = add(loss, scale(mean(residual(*online_batch)), alpha));
  return loss;
}

struct ValueDiceTrainState {
  TanhGaussianPolicy policy;
  CriticF critic;
  Adam policy_opt;
  Adam critic_opt;
  std::size_t step = 0;
  Rng rng;

  ValueDiceTrainState(std::size_t state_dim, std::size_t action_dim, const ValueDiceConfig& cfg)
      : rng(Rng::derive_seed(cfg.seed, 2)) {
    Rng net_rng(Rng::derive_seed(cfg.seed, 1));
    policy = TanhGaussianPolicy(state_dim, action_dim, cfg.hidden_width, cfg.hidden_layers,
                                net_rng);
    critic = CriticF(state_dim, action_dim, cfg.hidden_width, cfg.hidden_layers, net_rng);
    policy_opt = Adam(policy.parameters());
    critic_opt = Adam(critic.parameters());
  }
};

/// min_pi max_nu of the loss above: the critic ascends, the policy descends,
/// both gradients taken from one graph before either update.
inline StepMetrics valuedice_train_step(ValueDiceTrainState& st, const DemoBuffer& demo,
                                        const ValueDiceConfig& cfg,
                                        const OnlineBuffer* online = nullptr) {
  ++st.step;
  Batch mix = cfg.alpha > 0.0 ? mix_sample(demo, online, cfg.alpha, cfg.batch_size, st.rng)
                              : demo.sample_transitions(cfg.batch_size, st.rng);
  Tensor initial_states = demo.sample_initial_states(cfg.batch_size, st.rng);
  std::optional<Batch> online_batch;
  if (cfg.alpha > 0.0) {
    if (online == nullptr || online->empty())
      throw contract_error("valuedice_train_step: alpha > 0 requires online samples");
    Batch ob;
    ob.states = Tensor(cfg.batch_size, demo.state_dim());
    ob.actions = Tensor(cfg.batch_size, demo.action_dim());
    ob.next_states = Tensor(cfg.batch_size, demo.state_dim());
    ob.mask = Tensor(cfg.batch_size, 1);
    ob.source.assign(cfg.batch_size, SampleSource::kOnline);
    for (std::size_t i = 0; i < cfg.batch_size; ++i)
      DemoBuffer::fill_row(ob, i, online->transition(st.rng.index(online->size())),
                           SampleSource::kOnline);
    online_batch = std::move(ob);
  }

  Var loss = valuedice_loss(st.critic, st.policy, mix, initial_states,
                            online_batch ? &*online_batch : nullptr, cfg.alpha, cfg.gamma,
                            cfg.exp_clamp, st.rng);

  auto theta = st.policy.parameters();
  auto phi = st.critic.parameters();
  std::vector<Tensor> g_theta = gradient(loss, theta);
  std::vector<Tensor> g_phi = gradient(loss, phi);

  StepMetrics m;
  m.step = st.step;
  m.j_e = loss.value().item();
  m.policy_grad_norm = detail::grad_norm(g_theta);
  m.critic_grad_norm = detail::grad_norm(g_phi);
  {
    Rng ent_rng(Rng::derive_seed(cfg.seed, 50000 + st.step));
    auto s = st.policy.sample(constant(mix.states), ent_rng);
    m.policy_entropy = -mean_all(s.log_prob.value()).item();
  }

  for (Tensor& g : g_phi) g = neg(g);  // critic ascends
  st.critic_opt.step(phi, g_phi, cfg.lr_critic);
  st.policy_opt.step(theta, g_theta, cfg.lr_policy);
  st.policy.project_parameters();

  detail::check_params_finite(theta, st.step, "policy");
  detail::check_params_finite(phi, st.step, "critic");
  return m;
}

struct ValueDiceTrainResult {
  std::vector<StepMetrics> log;
  std::optional<ValueDiceTrainState> state;
  double final_return = 0.0;
  bool evaluated = false;
};

inline ValueDiceTrainResult valuedice_train(const ValueDiceConfig& cfg, const DemoBuffer& demo,
                                            ContinuousEnv* eval_env,
                                            MetricsWriter* writer = nullptr) {
  cfg.validate();
  if (demo.empty()) throw contract_error("valuedice_train: demonstration buffer is empty");

  ValueDiceTrainResult result;
  result.state.emplace(demo.state_dim(), demo.action_dim(), cfg);
  ValueDiceTrainState& st = *result.state;

  std::optional<OnlineBuffer> online;
  Rng rollout_rng(Rng::derive_seed(cfg.seed, 3));
  if (cfg.alpha > 0.0) {
    if (eval_env == nullptr)
      throw contract_error("valuedice_train: alpha > 0 requires an environment");
    online.emplace(cfg.online_capacity);
    collect_rollout(*eval_env, st.policy, rollout_rng, *online);
  }

  for (std::size_t t = 1; t <= cfg.iterations; ++t) {
    StepMetrics m = valuedice_train_step(st, demo, cfg, online ? &*online : nullptr);
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

}  // namespace softdice
