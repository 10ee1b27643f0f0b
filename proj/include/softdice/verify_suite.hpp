#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "softdice/analysis.hpp"

namespace softdice::analysis {

struct PropertyResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct VerifyOptions {
  std::uint64_t seed = 0;
  std::string only;              // substring filter; empty runs everything
  bool inject_gamma_bug = false; // negative control: misapply gamma in the
                                 // telescoping check so the row must fail
};

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

inline Tensor euclidean_cost(const std::vector<double>& xs, const std::vector<double>& ys) {
  const std::size_t n = xs.size();
  Tensor c(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      c(i, j) = std::hypot(xs[i] - xs[j], ys[i] - ys[j]);
  return c;
}

}  // namespace detail

/// Every mathematical property the toolkit claims, as one pass/fail row each.
inline std::vector<PropertyResult> run_verification_suite(const VerifyOptions& opt = {}) {
  std::vector<PropertyResult> rows;
  auto wants = [&](const std::string& name) {
    return opt.only.empty() || name.find(opt.only) != std::string::npos;
  };

  if (wants("telescoping")) {
    Rng rng(Rng::derive_seed(opt.seed, 100));
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t ns = 2 + rng.index(5), na = 1 + rng.index(3);
      TabularMDP mdp = make_random_mdp(ns, na, rng);
      TabularPolicy pol = make_random_policy(ns, na, rng);
      const double gamma = rng.uniform(0.05, 0.97);
      std::vector<double> f(ns * na);
      for (double& v : f) v = rng.uniform(-1.0, 1.0);
      const double g_lhs = opt.inject_gamma_bug ? gamma * 1.02 : -1.0;
      worst = std::max(worst, std::fabs(telescoping_residual(mdp, pol, f, gamma, g_lhs)));
    }
    // boundary cases: constant feature and gamma = 0
    {
      TabularMDP mdp = make_random_mdp(4, 2, rng);
      TabularPolicy pol = make_random_policy(4, 2, rng);
      std::vector<double> f_const(8, 0.7);
      worst = std::max(worst, std::fabs(telescoping_residual(mdp, pol, f_const, 0.9)));
      std::vector<double> f(8);
      for (double& v : f) v = rng.uniform(-1.0, 1.0);
      worst = std::max(worst, std::fabs(telescoping_residual(mdp, pol, f, 0.0)));
    }
    rows.push_back({"telescoping", worst < 1e-10,
                    "max |residual| = " + detail::fmt(worst) + " over 100 ergodic MDPs"});
  }

  if (wants("finite_horizon")) {
    Rng rng(Rng::derive_seed(opt.seed, 200));
    double worst_gap = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t ns = 2 + rng.index(4), na = 1 + rng.index(3);
      TabularMDP mdp = make_random_mdp(ns, na, rng);
      TabularPolicy pol = make_random_policy(ns, na, rng);
      std::vector<double> f(ns * na);
      for (double& v : f) v = rng.uniform(-1.0, 1.0);
      const std::size_t horizon = 1 + rng.index(12);
      FiniteHorizonResult r = finite_horizon_bias(mdp, pol, f, rng.uniform(0.3, 0.97), horizon);
      worst_gap = std::max(worst_gap, r.gap);
    }
    bool pass = worst_gap < 1e-10;
    // constant feature: the boundary term is (1-gamma) gamma^T c exactly
    {
      TabularMDP mdp = make_random_mdp(5, 2, rng);
      TabularPolicy pol = make_random_policy(5, 2, rng);
      std::vector<double> f_const(10, 0.37);
      FiniteHorizonResult r = finite_horizon_bias(mdp, pol, f_const, 0.9, 7);
      const double expected = 0.1 * std::pow(0.9, 7) * 0.37;
      pass = pass && std::fabs(r.bias_term - expected) < 1e-14 && r.gap < 1e-12;
      // long horizons: the bias vanishes like gamma^T
      FiniteHorizonResult tail = finite_horizon_bias(mdp, pol, f_const, 0.9, 500);
      pass = pass && std::fabs(tail.bias_term) < 1e-20;
    }
    rows.push_back({"finite_horizon", pass,
                    "max |lhs - rhs| = " + detail::fmt(worst_gap) + " over 50 chains"});
  }

  if (wants("kl_convexity")) {
    Rng rng(Rng::derive_seed(opt.seed, 300));
    bool hold = true;
    int strict = 0, strict_eligible = 0;
    double worst_violation = -1e300;
    for (int trial = 0; trial < 1000; ++trial) {
      DiscreteDistribution p = random_distribution(8, rng);
      DiscreteDistribution q = random_distribution(8, rng);
      DiscreteDistribution r = random_distribution(8, rng);
      const double alpha = rng.uniform(0.0, 1.0);
      KlConvexityResult res = kl_convexity_check(p, q, r, alpha);
      worst_violation = std::max(worst_violation, res.mixed_kl - res.bound);
      if (res.mixed_kl > res.bound + 1e-12) hold = false;
      if (alpha > 0.01 && alpha < 0.99) {
        ++strict_eligible;
        if (res.mixed_kl < res.bound - 1e-12) ++strict;
      }
    }
    const double strict_rate =
        strict_eligible ? static_cast<double>(strict) / strict_eligible : 1.0;
    rows.push_back({"kl_convexity", hold && strict_rate >= 0.99,
                    "worst (mixed - bound) = " + detail::fmt(worst_violation) +
                        ", strict rate " + detail::fmt(strict_rate)});
  }

  if (wants("emd_duality")) {
    Rng rng(Rng::derive_seed(opt.seed, 400));
    double worst = 0.0;
    bool witness_ok = true;
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t n = 2 + rng.index(7);
      std::vector<double> xs(n), ys(n);
      for (std::size_t i = 0; i < n; ++i) {
        xs[i] = rng.uniform(-1.0, 1.0);
        ys[i] = rng.uniform(-1.0, 1.0);
      }
      Tensor cost = detail::euclidean_cost(xs, ys);
      DiscreteDistribution p = random_distribution(n, rng);
      DiscreteDistribution q = random_distribution(n, rng);
      const double primal = emd_primal(p, q, cost);
      EmdDualResult dual = emd_dual(p, q, cost);
      worst = std::max(worst, std::fabs(primal - dual.value));
      for (std::size_t i = 0; i < n && witness_ok; ++i)
        for (std::size_t j = 0; j < n; ++j)
          if (dual.witness[i] - dual.witness[j] > cost(i, j) + 1e-9) witness_ok = false;
    }
    rows.push_back({"emd_duality", worst < 1e-6 && witness_ok,
                    "max |primal - dual| = " + detail::fmt(worst) + " over 50 metric instances"});
  }

  if (wants("emd_1d")) {
    Rng rng(Rng::derive_seed(opt.seed, 500));
    double worst = 0.0;
    for (int trial = 0; trial < 25; ++trial) {
      const std::size_t n = 2 + rng.index(7);
      std::vector<double> coords(n);
      double x = rng.uniform(-1.0, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        coords[i] = x;
        x += 0.05 + rng.uniform(0.0, 0.5);
      }
      std::vector<double> pp = random_distribution(n, rng).probs;
      std::vector<double> qq = random_distribution(n, rng).probs;
      DiscreteDistribution p(pp, coords), q(qq, coords);
      Tensor cost(n, n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) cost(i, j) = std::fabs(coords[i] - coords[j]);
      worst = std::max(worst, std::fabs(emd_primal(p, q, cost) - emd_1d_cdf(p, q)));
    }
    rows.push_back({"emd_1d", worst < 1e-9,
                    "max |LP - CDF formula| = " + detail::fmt(worst) + " over 25 lines"});
  }

  if (wants("dv_representation")) {
    Rng rng(Rng::derive_seed(opt.seed, 600));
    double worst_eq = 0.0, worst_bound = -1e300;
    for (int trial = 0; trial < 50; ++trial) {
      DiscreteDistribution p = random_distribution(6, rng);
      DiscreteDistribution q = random_distribution(6, rng);
      DvResult r = dv_representation_check(p, q);
      worst_eq = std::max(worst_eq, std::fabs(r.dv_max - r.kl));
      for (int k = 0; k < 2; ++k) {
        std::vector<double> x(6);
        for (double& v : x) v = rng.uniform(-2.0, 2.0);
        worst_bound = std::max(worst_bound, dv_objective(p, q, x) - r.kl);
      }
    }
    rows.push_back({"dv_representation", worst_eq < 1e-8 && worst_bound <= 1e-12,
                    "max |dv* - KL| = " + detail::fmt(worst_eq) +
                        ", worst bound slack = " + detail::fmt(worst_bound)});
  }

  if (wants("minibatch_bias")) {
    MinibatchBiasResult one = minibatch_bias(1.0, 1);
    const double e = std::exp(1.0);
    const double expected_bias = e / (1.0 + e) - 0.5;
    bool pass = std::fabs(one.bias - expected_bias) < 1e-9;

    double prev = one.bias;
    for (std::size_t m : {2, 4, 8}) {
      const double b = minibatch_bias(1.0, m).bias;
      pass = pass && b > 0.0 && b < prev;
      prev = b;
    }
    // symmetric point and the linear control
    pass = pass && std::fabs(minibatch_bias(0.0, 1).bias) < 1e-15;
    for (std::size_t m : {1, 2, 4, 8})
      pass = pass && std::fabs(minibatch_bias_linear(m).bias) < 1e-15;
    rows.push_back({"minibatch_bias", pass,
                    "bias(theta=1, m=1) = " + detail::fmt(one.bias) + ", expected " +
                        detail::fmt(expected_bias) + ", decreasing in m"});
  }

  return rows;
}

}  // namespace softdice::analysis
