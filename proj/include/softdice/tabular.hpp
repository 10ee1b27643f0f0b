#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "softdice/linalg.hpp"
#include "softdice/rng.hpp"
#include "softdice/tensor.hpp"

namespace softdice {

/// Exact finite MDP used as a ground-truth oracle by the verification suite.
/// transition(s, a, s') is row-stochastic over s'; p0 is the start
/// distribution.
class TabularMDP {
 public:
  TabularMDP(std::size_t n_states, std::size_t n_actions, std::vector<double> transition,
             std::vector<double> p0, std::vector<std::size_t> terminal_states = {})
      : n_states_(n_states),
        n_actions_(n_actions),
        transition_(std::move(transition)),
        p0_(std::move(p0)),
        terminal_states_(std::move(terminal_states)) {
    if (transition_.size() != n_states_ * n_actions_ * n_states_)
      throw contract_error("TabularMDP: transition tensor size mismatch");
    if (p0_.size() != n_states_) throw contract_error("TabularMDP: p0 size mismatch");
    for (std::size_t s = 0; s < n_states_; ++s)
      for (std::size_t a = 0; a < n_actions_; ++a) {
        double sum = 0.0;
        for (std::size_t s2 = 0; s2 < n_states_; ++s2) sum += prob(s, a, s2);
        if (std::fabs(sum - 1.0) > 1e-12)
          throw contract_error("TabularMDP: transition row (s=" + std::to_string(s) +
                               ", a=" + std::to_string(a) + ") sums to " + std::to_string(sum));
      }
    double p0sum = 0.0;
    for (double v : p0_) p0sum += v;
    if (std::fabs(p0sum - 1.0) > 1e-12)
      throw contract_error("TabularMDP: p0 does not sum to 1");
  }

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }
  double prob(std::size_t s, std::size_t a, std::size_t s2) const {
    return transition_[(s * n_actions_ + a) * n_states_ + s2];
  }
  const std::vector<double>& p0() const { return p0_; }
  bool has_terminal_states() const { return !terminal_states_.empty(); }
  const std::vector<std::size_t>& terminal_states() const { return terminal_states_; }

 private:
  std::size_t n_states_, n_actions_;
  std::vector<double> transition_;  // [(s * n_actions + a) * n_states + s']
  std::vector<double> p0_;
  std::vector<std::size_t> terminal_states_;
};

/// Row-stochastic policy table pi(a|s), indexed [s * n_actions + a].
class TabularPolicy {
 public:
  TabularPolicy(std::size_t n_states, std::size_t n_actions, std::vector<double> probs)
      : n_states_(n_states), n_actions_(n_actions), probs_(std::move(probs)) {
    if (probs_.size() != n_states_ * n_actions_)
      throw contract_error("TabularPolicy: size mismatch");
    for (std::size_t s = 0; s < n_states_; ++s) {
      double sum = 0.0;
      for (std::size_t a = 0; a < n_actions_; ++a) sum += prob(s, a);
      if (std::fabs(sum - 1.0) > 1e-12)
        throw contract_error("TabularPolicy: row " + std::to_string(s) + " sums to " +
                             std::to_string(sum));
    }
  }

  static TabularPolicy uniform(std::size_t n_states, std::size_t n_actions) {
    return TabularPolicy(n_states, n_actions,
                         std::vector<double>(n_states * n_actions,
                                             1.0 / static_cast<double>(n_actions)));
  }

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }
  double prob(std::size_t s, std::size_t a) const { return probs_[s * n_actions_ + a]; }

 private:
  std::size_t n_states_, n_actions_;
  std::vector<double> probs_;
};

/// Discounted state-action occupancy: the unique d with
///   d(s',a') = (1-gamma) p0(s') pi(a'|s') + gamma sum_{s,a} pi(a'|s') P(s'|s,a) d(s,a),
/// solved exactly as a linear system over the n_states*n_actions entries.
inline std::vector<double> tabular_occupancy(const TabularMDP& mdp, const TabularPolicy& policy,
                                             double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw contract_error("tabular_occupancy: gamma must be in [0, 1)");
  if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions())
    throw contract_error("tabular_occupancy: policy/mdp shape mismatch");

  const std::size_t ns = mdp.n_states(), na = mdp.n_actions(), n = ns * na;
  // A = I - gamma * M^T with M[(s,a),(s',a')] = P(s'|s,a) pi(a'|s')
  Tensor a(n, n);
  for (std::size_t i = 0; i < n; ++i) a(i, i) = 1.0;
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t ac = 0; ac < na; ++ac) {
      const std::size_t col = s * na + ac;
      for (std::size_t s2 = 0; s2 < ns; ++s2) {
        const double p = mdp.prob(s, ac, s2);
        if (p == 0.0) continue;
        for (std::size_t a2 = 0; a2 < na; ++a2) {
          const std::size_t row = s2 * na + a2;
          a(row, col) -= gamma * p * policy.prob(s2, a2);
        }
      }
    }

  std::vector<double> rhs(n);
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t ac = 0; ac < na; ++ac)
      rhs[s * na + ac] = (1.0 - gamma) * mdp.p0()[s] * policy.prob(s, ac);

  std::vector<double> d = solve_linear(a, rhs);

  // exactness checks: stationarity residual and normalization
  double sum = 0.0;
  for (double v : d) sum += v;
  double residual = 0.0;
  for (std::size_t s2 = 0; s2 < ns; ++s2)
    for (std::size_t a2 = 0; a2 < na; ++a2) {
      double flow = 0.0;
      for (std::size_t s = 0; s < ns; ++s)
        for (std::size_t ac = 0; ac < na; ++ac)
          flow += policy.prob(s2, a2) * mdp.prob(s, ac, s2) * d[s * na + ac];
      const double want = (1.0 - gamma) * mdp.p0()[s2] * policy.prob(s2, a2) + gamma * flow;
      residual = std::max(residual, std::fabs(d[s2 * na + a2] - want));
    }
  if (residual > 1e-10 || std::fabs(sum - 1.0) > 1e-10)
    throw numerical_error("tabular_occupancy: solve failed exactness check (residual " +
                          std::to_string(residual) + ")");
  return d;
}

/// Random ergodic MDP: every transition row is a Dirichlet-like draw mixed
/// with the uniform distribution, so the chain is irreducible and aperiodic.
inline TabularMDP make_random_mdp(std::size_t n_states, std::size_t n_actions, Rng& rng,
                                  double uniform_mix = 0.1) {
  std::vector<double> tr(n_states * n_actions * n_states);
  for (std::size_t row = 0; row < n_states * n_actions; ++row) {
    double sum = 0.0;
    std::vector<double> w(n_states);
    for (std::size_t j = 0; j < n_states; ++j) {
      w[j] = -std::log(1.0 - rng.uniform());  // Exp(1)
      sum += w[j];
    }
    for (std::size_t j = 0; j < n_states; ++j)
      tr[row * n_states + j] = (1.0 - uniform_mix) * w[j] / sum +
                               uniform_mix / static_cast<double>(n_states);
    // renormalize exactly
    double rsum = 0.0;
    for (std::size_t j = 0; j < n_states; ++j) rsum += tr[row * n_states + j];
    for (std::size_t j = 0; j < n_states; ++j) tr[row * n_states + j] /= rsum;
  }
  std::vector<double> p0(n_states);
  double psum = 0.0;
  for (double& v : p0) {
    v = 0.2 + rng.uniform();
    psum += v;
  }
  for (double& v : p0) v /= psum;
  return TabularMDP(n_states, n_actions, std::move(tr), std::move(p0));
}

inline TabularPolicy make_random_policy(std::size_t n_states, std::size_t n_actions, Rng& rng) {
  std::vector<double> probs(n_states * n_actions);
  for (std::size_t s = 0; s < n_states; ++s) {
    double sum = 0.0;
    for (std::size_t a = 0; a < n_actions; ++a) {
      probs[s * n_actions + a] = 0.05 + rng.uniform();
      sum += probs[s * n_actions + a];
    }
    for (std::size_t a = 0; a < n_actions; ++a) probs[s * n_actions + a] /= sum;
  }
  return TabularPolicy(n_states, n_actions, std::move(probs));
}

}  // namespace softdice
