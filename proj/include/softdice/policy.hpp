#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "softdice/mlp.hpp"
#include "softdice/rng.hpp"

namespace softdice {

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kSquashEps = 1e-6;

/// Diagonal Gaussian squashed through tanh. The pre-squash mean comes from an
/// MLP; log-std is a free state-independent parameter vector. Emitted actions
/// lie strictly inside (-1, 1) per dimension.
class TanhGaussianPolicy {
 public:
  TanhGaussianPolicy() = default;

  TanhGaussianPolicy(std::size_t state_dim, std::size_t action_dim, std::size_t hidden_width,
                     std::size_t hidden_layers, Rng& rng, double log_std_min = kLogStdMin,
                     double log_std_max = kLogStdMax)
      : mean_net_(state_dim, action_dim, hidden_width, hidden_layers, rng, std::sqrt(2.0),
                  /*out_gain=*/0.01),
        log_std_(leaf(Tensor::zeros(1, action_dim))),
        state_dim_(state_dim),
        action_dim_(action_dim),
        log_std_min_(log_std_min),
        log_std_max_(log_std_max) {}

  struct Sample {
    Var action;    // [B x da], in (-1, 1)
    Var log_prob;  // [B x 1]
  };

  /// Reparametrized sample: action = tanh(mu + sigma * eps) with the given
  /// noise, so gradients flow to the parameters.
  Sample sample_with_noise(const Var& states, const Tensor& eps) const {
    const std::size_t batch = states.value().rows();
    Var mu = mean_net_.apply(states);
    Var lsc = clamp(log_std_, log_std_min_, log_std_max_);
    Var sigma_b = broadcast_to(exp(lsc), batch, action_dim_);
    Var pre = add(mu, mul(sigma_b, constant(eps)));
    Var action = tanh(pre);
    return {action, log_prob_of_pre_squash(pre, mu, sigma_b, lsc, action)};
  }

  Sample sample(const Var& states, Rng& rng) const {
    return sample_with_noise(states, rng.normal_tensor(states.value().rows(), action_dim_));
  }

  /// Log-density of given actions, differentiable w.r.t. the parameters.
  /// Every action component must lie strictly inside (-1, 1).
  Var log_prob(const Var& states, const Tensor& actions) const {
    for (double a : actions.data())
      if (!(std::fabs(a) < 1.0))
        throw std::domain_error("policy log_prob: action component outside (-1, 1): " +
                                std::to_string(a));
    const std::size_t batch = states.value().rows();
    Tensor pre(actions.rows(), actions.cols());
    for (std::size_t i = 0; i < actions.size(); ++i)
      pre[i] = 0.5 * (std::log1p(actions[i]) - std::log1p(-actions[i]));  // atanh

    Var mu = mean_net_.apply(states);
    Var lsc = clamp(log_std_, log_std_min_, log_std_max_);
    Var sigma_b = broadcast_to(exp(lsc), batch, action_dim_);
    return log_prob_of_pre_squash(constant(pre), mu, sigma_b, lsc, constant(actions));
  }

  /// Deterministic action tanh(mu(s)).
  Tensor mean_action(const Tensor& states) const {
    return tanh(mean_net_.apply(constant(states)).value());
  }

  /// Monte-Carlo entropy estimate -E[log pi(a|s)] over the given states.
  double entropy_estimate(const Tensor& states, Rng& rng) const {
    Sample s = sample(constant(states), rng);
    return -mean_all(s.log_prob.value()).item();
  }

  std::vector<Var> parameters() const {
    std::vector<Var> out = mean_net_.parameters();
    out.push_back(log_std_);
    return out;
  }

  /// Keeps log-std inside its bounds after an optimizer step. The in-graph
  /// clamp would zero the gradient once the raw parameter leaves the range,
  /// freezing the entropy; projecting the parameter keeps it live.
  void project_parameters() {
    for (double& v : log_std_.get()->value.data())
      v = std::clamp(v, log_std_min_, log_std_max_);
  }

  std::vector<std::pair<std::string, Var>> named_parameters(const std::string& prefix) const {
    auto out = mean_net_.named_parameters(prefix + ".mean");
    out.emplace_back(prefix + ".log_std", log_std_);
    return out;
  }

  const Mlp& mean_net() const { return mean_net_; }
  std::size_t state_dim() const { return state_dim_; }
  std::size_t action_dim() const { return action_dim_; }

 private:
  // Gaussian log-density of the pre-squash value minus the tanh change of
  // variables sum_i log(1 - a_i^2 + 1e-6).
  Var log_prob_of_pre_squash(const Var& pre, const Var& mu, const Var& sigma_b, const Var& lsc,
                             const Var& action) const {
    const std::size_t batch = pre.value().rows();
    Var t = mul(sub(pre, mu), reciprocal(sigma_b));
    Var quad = scale(sum_axis(square(t), 1), -0.5);                  // [B x 1]
    Var logdet = neg(broadcast_to(sum(lsc), batch, 1));              // -sum log sigma
    Var corr = sum_axis(log(add_constant(neg(square(action)), 1.0 + kSquashEps)), 1);
    const double norm_const =
        -0.5 * static_cast<double>(action_dim_) * std::log(2.0 * M_PI);
    return add_constant(sub(add(quad, logdet), corr), norm_const);
  }

  Mlp mean_net_;
  Var log_std_;
  std::size_t state_dim_ = 0, action_dim_ = 0;
  double log_std_min_ = kLogStdMin, log_std_max_ = kLogStdMax;
};

/// The scalar "value function" over state-action pairs that the trainers
/// maximize over; also used as nu in the ValueDICE baseline.
class CriticF {
 public:
  CriticF() = default;

  CriticF(std::size_t state_dim, std::size_t action_dim, std::size_t hidden_width,
          std::size_t hidden_layers, Rng& rng)
      : net_(state_dim + action_dim, 1, hidden_width, hidden_layers, rng),
        state_dim_(state_dim),
        action_dim_(action_dim) {}

  /// [B x (ds+da)] -> [B x 1].
  Var apply(const Var& state_action) const { return net_.apply(state_action); }

  Var apply(const Var& states, const Var& actions) const {
    return net_.apply(concat_cols(states, actions));
  }

  std::vector<Var> parameters() const { return net_.parameters(); }

  std::vector<std::pair<std::string, Var>> named_parameters(const std::string& prefix) const {
    return net_.named_parameters(prefix);
  }

  std::size_t state_dim() const { return state_dim_; }
  std::size_t action_dim() const { return action_dim_; }

 private:
  Mlp net_;
  std::size_t state_dim_ = 0, action_dim_ = 0;
};

}  // namespace softdice
