#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "softdice/lp.hpp"
#include "softdice/rng.hpp"
#include "softdice/tabular.hpp"

namespace softdice::analysis {

/// Finite distribution, optionally with 1-D coordinates for a ground metric.
struct DiscreteDistribution {
  std::vector<double> probs;
  std::vector<double> coords;  // optional; same length as probs when present

  explicit DiscreteDistribution(std::vector<double> p, std::vector<double> x = {})
      : probs(std::move(p)), coords(std::move(x)) {
    double sum = 0.0;
    for (double v : probs) {
      if (v < 0.0) throw contract_error("DiscreteDistribution: negative probability");
      sum += v;
    }
    if (std::fabs(sum - 1.0) > 1e-12)
      throw contract_error("DiscreteDistribution: probabilities sum to " + std::to_string(sum));
    if (!coords.empty() && coords.size() != probs.size())
      throw contract_error("DiscreteDistribution: coordinate count mismatch");
  }

  std::size_t size() const { return probs.size(); }
};

inline DiscreteDistribution random_distribution(std::size_t n, Rng& rng,
                                                double min_mass = 0.01) {
  std::vector<double> p(n);
  double sum = 0.0;
  for (double& v : p) {
    v = min_mass + rng.uniform();
    sum += v;
  }
  for (double& v : p) v /= sum;
  // renormalize exactly against accumulated rounding
  sum = std::accumulate(p.begin(), p.end(), 0.0);
  p.back() += 1.0 - sum;
  return DiscreteDistribution(std::move(p));
}

// ---- telescoping and finite-horizon identities -----------------------------

/// E_{d_pi}[ f - gamma E_{s',a'} f(s',a') ] - (1-gamma) E_{d_0}[ f ], computed
/// exactly from the linear-solve occupancy. Ergodic chains only; for episodic
/// horizons use finite_horizon_bias.
inline double telescoping_residual(const TabularMDP& mdp, const TabularPolicy& policy,
                                   const std::vector<double>& f, double gamma,
                                   double gamma_lhs_override = -1.0) {
  if (mdp.has_terminal_states())
    throw contract_error(
        "telescoping_residual: MDP has terminal states; use finite_horizon_bias");
  const std::size_t ns = mdp.n_states(), na = mdp.n_actions();
  if (f.size() != ns * na) throw contract_error("telescoping_residual: feature size mismatch");

  std::vector<double> d = tabular_occupancy(mdp, policy, gamma);
  const double g_lhs = gamma_lhs_override >= 0.0 ? gamma_lhs_override : gamma;

  double lhs = 0.0;
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t a = 0; a < na; ++a) {
      double boot = 0.0;
      for (std::size_t s2 = 0; s2 < ns; ++s2) {
        const double p = mdp.prob(s, a, s2);
        if (p == 0.0) continue;
        for (std::size_t a2 = 0; a2 < na; ++a2)
          boot += p * policy.prob(s2, a2) * f[s2 * na + a2];
      }
      lhs += d[s * na + a] * (f[s * na + a] - g_lhs * boot);
    }

  double rhs = 0.0;
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t a = 0; a < na; ++a)
      rhs += mdp.p0()[s] * policy.prob(s, a) * f[s * na + a];
  rhs *= 1.0 - gamma;

  return lhs - rhs;
}

struct FiniteHorizonResult {
  double lhs = 0.0;        // (1-gamma) sum_{t<T} gamma^t E_{p_t}[ f - gamma E f(s',a') ]
  double rhs = 0.0;        // (1-gamma) E_{p_0}[f] - bias_term
  double bias_term = 0.0;  // (1-gamma) gamma^T E_{p_T}[f]
  double gap = 0.0;        // |lhs - rhs|
};

/// Truncating the telescoping sum at horizon T leaves the boundary term
/// (1-gamma) gamma^T E_{p_T, pi}[f]; this verifies the identity by exact
/// forward propagation of the state marginals.
inline FiniteHorizonResult finite_horizon_bias(const TabularMDP& mdp,
                                               const TabularPolicy& policy,
                                               const std::vector<double>& f, double gamma,
                                               std::size_t horizon) {
  if (horizon < 1) throw contract_error("finite_horizon_bias: horizon must be >= 1");
  const std::size_t ns = mdp.n_states(), na = mdp.n_actions();
  if (f.size() != ns * na) throw contract_error("finite_horizon_bias: feature size mismatch");

  auto mean_f = [&](const std::vector<double>& state_dist) {
    double m = 0.0;
    for (std::size_t s = 0; s < ns; ++s)
      for (std::size_t a = 0; a < na; ++a)
        m += state_dist[s] * policy.prob(s, a) * f[s * na + a];
    return m;
  };
  auto propagate = [&](const std::vector<double>& state_dist) {
    std::vector<double> next(ns, 0.0);
    for (std::size_t s = 0; s < ns; ++s)
      for (std::size_t a = 0; a < na; ++a) {
        const double w = state_dist[s] * policy.prob(s, a);
        if (w == 0.0) continue;
        for (std::size_t s2 = 0; s2 < ns; ++s2) next[s2] += w * mdp.prob(s, a, s2);
      }
    return next;
  };

  std::vector<double> pt = mdp.p0();
  std::vector<double> m(horizon + 1);
  m[0] = mean_f(pt);
  for (std::size_t t = 1; t <= horizon; ++t) {
    pt = propagate(pt);
    m[t] = mean_f(pt);
  }

  FiniteHorizonResult out;
  double g = 1.0;
  for (std::size_t t = 0; t < horizon; ++t) {
    out.lhs += g * (m[t] - gamma * m[t + 1]);
    g *= gamma;
  }
  out.lhs *= 1.0 - gamma;
  out.bias_term = (1.0 - gamma) * std::pow(gamma, static_cast<double>(horizon)) * m[horizon];
  out.rhs = (1.0 - gamma) * m[0] - out.bias_term;
  out.gap = std::fabs(out.lhs - out.rhs);
  return out;
}

// ---- KL convexity and the DV representation --------------------------------

inline double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw contract_error("kl_divergence: size mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;  // 0 log 0 = 0
    if (q[i] <= 0.0)
      throw std::domain_error("kl_divergence: first argument has mass where second is zero");
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return kl;
}

struct KlConvexityResult {
  double mixed_kl = 0.0;  // KL((1-a)p + a r || (1-a)q + a r)
  double bound = 0.0;     // (1-a) KL(p || q)
};

/// Mixing both arguments with a common distribution can only shrink the KL:
/// the mixed divergence is bounded by (1-alpha) KL(p||q).
inline KlConvexityResult kl_convexity_check(const DiscreteDistribution& p,
                                            const DiscreteDistribution& q,
                                            const DiscreteDistribution& r, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw contract_error("kl_convexity_check: alpha not in [0,1]");
  if (p.size() != q.size() || p.size() != r.size())
    throw contract_error("kl_convexity_check: support size mismatch");
  std::vector<double> mp(p.size()), mq(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    mp[i] = (1.0 - alpha) * p.probs[i] + alpha * r.probs[i];
    mq[i] = (1.0 - alpha) * q.probs[i] + alpha * r.probs[i];
  }
  return {kl_divergence(mp, mq), (1.0 - alpha) * kl_divergence(p.probs, q.probs)};
}

struct DvResult {
  double kl = 0.0;
  double dv_max = 0.0;  // objective at the closed-form maximizer x* = log(p/q)
};

inline double dv_objective(const DiscreteDistribution& p, const DiscreteDistribution& q,
                           const std::vector<double>& x) {
  if (x.size() != p.size() || q.size() != p.size())
    throw contract_error("dv_objective: size mismatch");
  double e_q = 0.0, e_p = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    e_q += q.probs[i] * std::exp(x[i]);
    e_p += p.probs[i] * x[i];
  }
  return -std::log(e_q) + e_p;
}

/// The variational KL representation attains equality at x* = log(p/q).
inline DvResult dv_representation_check(const DiscreteDistribution& p,
                                        const DiscreteDistribution& q) {
  if (p.size() != q.size()) throw contract_error("dv_representation_check: size mismatch");
  std::vector<double> x_star(p.size(), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.probs[i] == 0.0) {
      x_star[i] = -745.0;  // effectively -inf; exp underflows to 0
      continue;
    }
    if (q.probs[i] <= 0.0)
      throw std::domain_error("dv_representation_check: p has mass where q is zero");
    x_star[i] = std::log(p.probs[i] / q.probs[i]);
  }
  return {kl_divergence(p.probs, q.probs), dv_objective(p, q, x_star)};
}

// ---- Earth-Mover distance: primal and Kantorovich dual ---------------------

/// Optimal transport cost between p and q under the given cost matrix,
/// solved as an exact linear program over the transport plan.
inline double emd_primal(const DiscreteDistribution& p, const DiscreteDistribution& q,
                         const Tensor& cost) {
  const std::size_t n = p.size(), m = q.size();
  if (cost.rows() != n || cost.cols() != m) throw contract_error("emd_primal: cost shape");
  for (double v : cost.data())
    if (v < 0.0) throw contract_error("emd_primal: negative cost");

  // variables x_ij >= 0; rows: sum_j x_ij = p_i, then sum_i x_ij = q_j
  const std::size_t vars = n * m;
  Tensor a(n + m, vars);
  std::vector<double> b(n + m);
  std::vector<double> c(vars);
  for (std::size_t i = 0; i < n; ++i) {
    b[i] = p.probs[i];
    for (std::size_t j = 0; j < m; ++j) a(i, i * m + j) = 1.0;
  }
  for (std::size_t j = 0; j < m; ++j) {
    b[n + j] = q.probs[j];
    for (std::size_t i = 0; i < n; ++i) a(n + j, i * m + j) = 1.0;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) c[i * m + j] = cost(i, j);

  return SimplexSolver::solve(std::move(a), std::move(b), std::move(c)).value;
}

struct EmdDualResult {
  double value = 0.0;
  std::vector<double> witness;  // the maximizing potential f
};

/// Kantorovich dual on a common support: maximize sum_i f_i (p_i - q_i)
/// subject to f_i - f_j <= cost(i, j). For metric costs this equals the
/// primal transport value, and the witness is the 1-Lipschitz test function.
inline EmdDualResult emd_dual(const DiscreteDistribution& p, const DiscreteDistribution& q,
                              const Tensor& cost) {
  const std::size_t n = p.size();
  if (q.size() != n) throw contract_error("emd_dual: supports must match");
  if (cost.rows() != n || cost.cols() != n) throw contract_error("emd_dual: cost shape");
  for (double v : cost.data())
    if (v < 0.0) throw contract_error("emd_dual: negative cost");

  // f = u - v with u, v >= 0; one slack per ordered pair (i != j)
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) pairs.emplace_back(i, j);
  const std::size_t rows = pairs.size();
  const std::size_t vars = 2 * n + rows;
  Tensor a(rows, vars);
  std::vector<double> b(rows);
  std::vector<double> c(vars, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto [i, j] = pairs[r];
    a(r, i) = 1.0;
    a(r, n + i) = -1.0;
    a(r, j) = -1.0;
    a(r, n + j) = 1.0;
    a(r, 2 * n + r) = 1.0;  // slack
    b[r] = cost(i, j);
  }
  // maximize sum f_i (p_i - q_i)  ==  minimize -(p - q) . (u - v)
  for (std::size_t i = 0; i < n; ++i) {
    const double d = p.probs[i] - q.probs[i];
    c[i] = -d;
    c[n + i] = d;
  }

  LpResult lp = SimplexSolver::solve(std::move(a), std::move(b), std::move(c));
  EmdDualResult out;
  out.value = -lp.value;
  out.witness.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.witness[i] = lp.x[i] - lp.x[n + i];
  return out;
}

/// 1-D closed form: EMD between distributions on the line equals the
/// spacing-weighted L1 distance between CDFs. Independent oracle for the LP.
inline double emd_1d_cdf(const DiscreteDistribution& p, const DiscreteDistribution& q) {
  if (p.coords.empty() || q.coords.size() != p.coords.size() || p.coords != q.coords)
    throw contract_error("emd_1d_cdf: shared sorted coordinates required");
  for (std::size_t i = 1; i < p.coords.size(); ++i)
    if (p.coords[i] < p.coords[i - 1]) throw contract_error("emd_1d_cdf: coords not sorted");
  double total = 0.0, cdf_gap = 0.0;
  for (std::size_t i = 0; i + 1 < p.coords.size(); ++i) {
    cdf_gap += p.probs[i] - q.probs[i];
    total += std::fabs(cdf_gap) * (p.coords[i + 1] - p.coords[i]);
  }
  return total;
}

// ---- mini-batch gradient bias ----------------------------------------------

struct MinibatchBiasResult {
  double full_gradient = 0.0;        // d/dtheta of -log E[e^{theta x}], x ~ U{0,1}
  double expected_minibatch = 0.0;   // exact expectation of the size-m estimator
  double bias = 0.0;
};

/// For L(theta) = -log E_{x ~ U{0,1}}[e^{theta x}], the full gradient is
/// -e^theta / (1 + e^theta). A mini-batch of size m estimates the gradient as
/// -(mean x e^{theta x}) / (mean e^{theta x}); enumerating all 2^m batches
/// gives its exact expectation and hence the bias of log-of-mean objectives.
inline MinibatchBiasResult minibatch_bias(double theta, std::size_t m) {
  if (m < 1 || m > 12) throw contract_error("minibatch_bias: m must be in [1, 12]");
  MinibatchBiasResult out;
  const double et = std::exp(theta);
  out.full_gradient = -et / (1.0 + et);

  const std::size_t total = std::size_t{1} << m;
  double acc = 0.0;
  for (std::size_t mask = 0; mask < total; ++mask) {
    const int k = __builtin_popcountll(mask);
    const double num = static_cast<double>(k) * et;                   // sum of x e^{theta x}
    const double den = static_cast<double>(k) * et + (m - k) * 1.0;   // sum of e^{theta x}
    acc += -num / den;
  }
  out.expected_minibatch = acc / static_cast<double>(total);
  out.bias = out.expected_minibatch - out.full_gradient;
  return out;
}

/// Linear control: with L(theta) = -E[theta x] every mini-batch gradient is
/// -mean(x), whose expectation equals the full gradient -1/2 for every m.
inline MinibatchBiasResult minibatch_bias_linear(std::size_t m) {
  if (m < 1 || m > 12) throw contract_error("minibatch_bias_linear: m must be in [1, 12]");
  MinibatchBiasResult out;
  out.full_gradient = -0.5;
  const std::size_t total = std::size_t{1} << m;
  double acc = 0.0;
  for (std::size_t mask = 0; mask < total; ++mask)
    acc += -static_cast<double>(__builtin_popcountll(mask)) / static_cast<double>(m);
  out.expected_minibatch = acc / static_cast<double>(total);
  out.bias = out.expected_minibatch - out.full_gradient;
  return out;
}

}  // namespace softdice::analysis
