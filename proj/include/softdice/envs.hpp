#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "softdice/errors.hpp"
#include "softdice/policy.hpp"
#include "softdice/rng.hpp"
#include "softdice/transitions.hpp"

namespace softdice {

struct StepResult {
  std::vector<double> next_state;
  bool done = false;
  bool reached_goal = false;
};

struct EvalResult {
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t episodes = 0;
  double stderr_mean() const {
    return episodes > 1 ? stddev / std::sqrt(static_cast<double>(episodes)) : 0.0;
  }
};

/// Episodic continuous-control environment with actions in [-1,1]^d.
/// Rewards are deliberately not part of the stepping interface: trainers
/// drive environments through reset/step only, while returns are computed by
/// the evaluation/demo helpers below, which are the sole callers of reward().
class ContinuousEnv {
 public:
  virtual ~ContinuousEnv() = default;

  virtual std::string name() const = 0;
  virtual std::size_t state_dim() const = 0;
  virtual std::size_t action_dim() const = 0;
  virtual std::size_t horizon() const = 0;

  std::vector<double> reset(Rng& rng) {
    state_ = sample_initial(rng);
    steps_this_episode_ = 0;
    episode_done_ = false;
    return state_;
  }

  /// Restart from a given state (trajectory replay, reproducibility checks).
  void reset_to(const std::vector<double>& state) {
    if (state.size() != state_dim()) throw contract_error(name() + ": reset_to dimension mismatch");
    state_ = state;
    steps_this_episode_ = 0;
    episode_done_ = false;
  }

  StepResult step(const std::vector<double>& action) {
    if (episode_done_)
      throw contract_error(name() + ": step() called on a finished episode");
    if (action.size() != action_dim())
      throw contract_error(name() + ": action dimension mismatch");
    ++total_steps_;
    ++steps_this_episode_;
    std::vector<double> clipped = action;
    for (double& a : clipped) a = std::clamp(a, -1.0, 1.0);
    StepResult r = dynamics(state_, clipped);
    if (steps_this_episode_ >= horizon()) r.done = true;  // cutoff carries e=1
    last_reward_ = reward(state_, clipped, r.next_state);
    state_ = r.next_state;
    episode_done_ = r.done;
    return r;
  }

  const std::vector<double>& state() const { return state_; }

  /// Instrumented step counter across all episodes (offline-purity checks).
  std::uint64_t steps_taken() const { return total_steps_; }
  void reset_step_counter() { total_steps_ = 0; }

 protected:
  virtual std::vector<double> sample_initial(Rng& rng) const = 0;
  virtual StepResult dynamics(const std::vector<double>& s,
                              const std::vector<double>& a) const = 0;
  virtual double reward(const std::vector<double>& s, const std::vector<double>& a,
                        const std::vector<double>& s_next) const = 0;

 private:
  friend struct EnvRewardTap;
  std::vector<double> state_;
  std::size_t steps_this_episode_ = 0;
  bool episode_done_ = false;
  std::uint64_t total_steps_ = 0;
  double last_reward_ = 0.0;
};

/// The one place that may read rewards; used only by evaluation and
/// demonstration generation below.
struct EnvRewardTap {
  static double last_reward(const ContinuousEnv& env) { return env.last_reward_; }
};

/// Point mass on the plane: s' = s + dt * a, reward -|s' - g|, terminal when
/// within the goal radius or at the horizon.
class PointMass2D : public ContinuousEnv {
 public:
  static constexpr double kDt = 0.05;
  static constexpr double kGoalRadius = 0.05;

  enum class ResetRegion { kQuadrant, kFullBox };

  explicit PointMass2D(std::vector<double> goal = {0.0, 0.0},
                       ResetRegion reset = ResetRegion::kQuadrant)
      : goal_(std::move(goal)), reset_(reset) {}

  std::string name() const override { return "point_mass"; }
  std::size_t state_dim() const override { return 2; }
  std::size_t action_dim() const override { return 2; }
  std::size_t horizon() const override { return 100; }
  const std::vector<double>& goal() const { return goal_; }

  double distance_to_goal(const std::vector<double>& s) const {
    return std::hypot(s[0] - goal_[0], s[1] - goal_[1]);
  }

 protected:
  // default starts fill a box in the first quadrant relative to the goal:
  // close enough together that a single demonstration is informative, spread
  // enough that it never covers them all
  std::vector<double> sample_initial(Rng& rng) const override {
    if (reset_ == ResetRegion::kQuadrant)
      return {goal_[0] + rng.uniform(0.35, 0.9), goal_[1] + rng.uniform(0.35, 0.9)};
    for (;;) {
      std::vector<double> s{goal_[0] + rng.uniform(-0.9, 0.9),
                            goal_[1] + rng.uniform(-0.9, 0.9)};
      if (distance_to_goal(s) >= 0.3) return s;
    }
  }

  StepResult dynamics(const std::vector<double>& s, const std::vector<double>& a) const override {
    std::vector<double> next{s[0] + kDt * a[0], s[1] + kDt * a[1]};
    const bool at_goal = distance_to_goal(next) < kGoalRadius;
    return {std::move(next), at_goal, at_goal};
  }

  double reward(const std::vector<double>&, const std::vector<double>&,
                const std::vector<double>& s_next) const override {
    return -distance_to_goal(s_next);
  }

 private:
  std::vector<double> goal_;
  ResetRegion reset_ = ResetRegion::kQuadrant;
};

/// Torque-limited pendulum swing-up; angle 0 is upright, state is
/// (angle in (-pi, pi], velocity in [-8, 8]), torque is 2 * action.
class Pendulum1D : public ContinuousEnv {
 public:
  static constexpr double kDt = 0.05;
  static constexpr double kGravity = 10.0;
  static constexpr double kMaxSpeed = 8.0;
  static constexpr double kMaxTorque = 2.0;

  std::string name() const override { return "pendulum"; }
  std::size_t state_dim() const override { return 2; }
  std::size_t action_dim() const override { return 1; }
  std::size_t horizon() const override { return 200; }

  static double wrap_angle(double th) {
    while (th > M_PI) th -= 2.0 * M_PI;
    while (th <= -M_PI) th += 2.0 * M_PI;
    return th;
  }

 protected:
  std::vector<double> sample_initial(Rng& rng) const override {
    return {rng.uniform(-M_PI, M_PI), rng.uniform(-1.0, 1.0)};
  }

  StepResult dynamics(const std::vector<double>& s, const std::vector<double>& a) const override {
    const double th = s[0], thdot = s[1];
    const double u = kMaxTorque * a[0];
    double new_thdot = thdot + (3.0 * kGravity / 2.0 * std::sin(th) + 3.0 * u) * kDt;
    new_thdot = std::clamp(new_thdot, -kMaxSpeed, kMaxSpeed);
    const double new_th = wrap_angle(th + new_thdot * kDt);
    return {{new_th, new_thdot}, false, false};
  }

  double reward(const std::vector<double>& s, const std::vector<double>& a,
                const std::vector<double>&) const override {
    const double u = kMaxTorque * a[0];
    return -(s[0] * s[0] + 0.1 * s[1] * s[1] + 0.001 * u * u);
  }
};

inline std::unique_ptr<ContinuousEnv> make_env(const std::string& name) {
  if (name == "point_mass") return std::make_unique<PointMass2D>();
  if (name == "pendulum") return std::make_unique<Pendulum1D>();
  throw contract_error("unknown env '" + name + "' (expected point_mass or pendulum)");
}

using Controller = std::function<std::vector<double>(const std::vector<double>& state)>;

/// Proportional controller toward the goal, saturating far away.
inline Controller point_mass_expert(const PointMass2D& env, double gain = 3.0) {
  std::vector<double> goal = env.goal();
  return [goal, gain](const std::vector<double>& s) {
    return std::vector<double>{std::clamp(gain * (goal[0] - s[0]), -1.0, 1.0),
                               std::clamp(gain * (goal[1] - s[1]), -1.0, 1.0)};
  };
}

/// Energy-shaping swing-up with a PD hold near the top.
inline Controller pendulum_expert() {
  return [](const std::vector<double>& s) {
    const double th = s[0], thdot = s[1];
    double u;
    if (std::fabs(th) < 0.35 && std::fabs(thdot) < 2.5) {
      u = -12.0 * th - 2.5 * thdot;  // PD hold near upright
    } else {
      const double energy = 0.5 * thdot * thdot / 3.0 + Pendulum1D::kGravity / 2.0 * std::cos(th);
      const double target = Pendulum1D::kGravity / 2.0;
      double dir = thdot != 0.0 ? (thdot > 0 ? 1.0 : -1.0) : (th > 0 ? -1.0 : 1.0);
      u = 2.0 * (target - energy) * dir;
    }
    return std::vector<double>{std::clamp(u / Pendulum1D::kMaxTorque, -1.0, 1.0)};
  };
}

inline Controller make_expert(ContinuousEnv& env, double point_mass_gain = 3.0) {
  if (auto* pm = dynamic_cast<PointMass2D*>(&env)) return point_mass_expert(*pm, point_mass_gain);
  if (dynamic_cast<Pendulum1D*>(&env)) return pendulum_expert();
  throw contract_error("no expert controller for env '" + env.name() + "'");
}

inline double default_expert_noise(const ContinuousEnv& env) {
  return env.name() == "pendulum" ? 0.05 : 0.0;
}

struct GeneratedDemos {
  std::vector<Trajectory> trajectories;
  std::vector<double> returns;  // undiscounted episode returns of the expert
  double mean_return() const {
    double s = 0.0;
    for (double r : returns) s += r;
    return returns.empty() ? 0.0 : s / static_cast<double>(returns.size());
  }
};

/// Rolls the expert controller for complete episodes. Actions are
/// clip(expert(s) + noise, [-1, 1]); deterministic given the seed.
inline GeneratedDemos generate_demos(ContinuousEnv& env, const Controller& expert,
                                     std::size_t n_trajectories, double noise_scale,
                                     std::uint64_t seed) {
  if (n_trajectories == 0) throw contract_error("generate_demos: n_trajectories must be >= 1");
  GeneratedDemos out;
  for (std::size_t k = 0; k < n_trajectories; ++k) {
    Rng rng(Rng::derive_seed(seed, k));
    Trajectory traj;
    traj.id = static_cast<int>(k);
    std::vector<double> s = env.reset(rng);
    double ret = 0.0;
    bool reached_goal = false;
    for (;;) {
      std::vector<double> a = expert(s);
      for (double& ai : a) ai = std::clamp(ai + noise_scale * rng.normal(), -1.0, 1.0);
      StepResult r = env.step(a);
      ret += EnvRewardTap::last_reward(env);
      reached_goal = reached_goal || r.reached_goal;
      traj.steps.push_back(Transition{s, a, r.next_state, r.done ? 1 : 0});
      s = r.next_state;
      if (r.done) break;
    }
    // a point-mass expert that never enters the goal region gets flagged but kept
    traj.horizon_cutoff = !reached_goal && env.name() == "point_mass";
    validate_trajectory(traj);
    out.trajectories.push_back(std::move(traj));
    out.returns.push_back(ret);
  }
  return out;
}

using ActionFn =
    std::function<std::vector<double>(const std::vector<double>& state, Rng& rng)>;

/// Full-episode returns for an arbitrary action function.
inline EvalResult evaluate_actions(ContinuousEnv& env, const ActionFn& act,
                                   std::size_t n_episodes, std::uint64_t seed) {
  if (n_episodes == 0) throw contract_error("empty evaluation: n_episodes must be >= 1");
  std::vector<double> returns;
  returns.reserve(n_episodes);
  for (std::size_t ep = 0; ep < n_episodes; ++ep) {
    Rng rng(Rng::derive_seed(seed, ep));
    std::vector<double> s = env.reset(rng);
    double ret = 0.0;
    for (;;) {
      StepResult r = env.step(act(s, rng));
      ret += EnvRewardTap::last_reward(env);
      s = r.next_state;
      if (r.done) break;
    }
    returns.push_back(ret);
  }
  double mean = 0.0;
  for (double r : returns) mean += r;
  mean /= static_cast<double>(returns.size());
  double var = 0.0;
  for (double r : returns) var += (r - mean) * (r - mean);
  var = returns.size() > 1 ? var / static_cast<double>(returns.size() - 1) : 0.0;
  return {mean, std::sqrt(var), n_episodes};
}

/// Policy evaluation; the deterministic flag uses tanh(mu) instead of sampling.
inline EvalResult evaluate_policy(ContinuousEnv& env, const TanhGaussianPolicy& policy,
                                  std::size_t n_episodes, std::uint64_t seed,
                                  bool deterministic) {
  if (policy.state_dim() != env.state_dim() || policy.action_dim() != env.action_dim())
    throw contract_error("evaluate_policy: policy/env dimension mismatch");
  ActionFn act = [&policy, deterministic](const std::vector<double>& s, Rng& rng) {
    Tensor state(1, s.size());
    for (std::size_t i = 0; i < s.size(); ++i) state(0, i) = s[i];
    Tensor a = deterministic
                   ? policy.mean_action(state)
                   : policy.sample(constant(state), rng).action.value();
    return std::vector<double>(a.data().begin(), a.data().end());
  };
  return evaluate_actions(env, act, n_episodes, seed);
}

}  // namespace softdice
