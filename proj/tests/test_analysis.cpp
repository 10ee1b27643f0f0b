#include <doctest.h>

#include <cmath>

#include "softdice/verify_suite.hpp"

using namespace softdice;
using namespace softdice::analysis;

TEST_CASE("telescoping: constant features and gamma = 0 are exact zeros") {
  Rng rng(1);
  TabularMDP mdp = make_random_mdp(4, 2, rng);
  TabularPolicy pol = make_random_policy(4, 2, rng);

  std::vector<double> f_const(8, 1.3);
  CHECK(std::fabs(telescoping_residual(mdp, pol, f_const, 0.9)) < 1e-12);

  std::vector<double> f(8);
  for (double& v : f) v = rng.uniform(-1.0, 1.0);
  CHECK(std::fabs(telescoping_residual(mdp, pol, f, 0.0)) < 1e-12);
}

TEST_CASE("telescoping: terminal states are rejected") {
  TabularMDP mdp(2, 1, {0.0, 1.0, 0.0, 1.0}, {1.0, 0.0}, /*terminal=*/{1});
  TabularPolicy pol = TabularPolicy::uniform(2, 1);
  std::vector<double> f(2, 0.0);
  CHECK_THROWS_WITH_AS((void)telescoping_residual(mdp, pol, f, 0.9),
                       doctest::Contains("finite_horizon_bias"), contract_error);
}

TEST_CASE("finite_horizon_bias: constant feature, tail decay, random identity") {
  Rng rng(2);
  TabularMDP mdp = make_random_mdp(5, 2, rng);
  TabularPolicy pol = make_random_policy(5, 2, rng);

  std::vector<double> f_const(10, 2.0);
  FiniteHorizonResult r = finite_horizon_bias(mdp, pol, f_const, 0.9, 7);
  CHECK(r.bias_term == doctest::Approx(0.1 * std::pow(0.9, 7) * 2.0).epsilon(1e-12));
  CHECK(r.gap < 1e-12);

  FiniteHorizonResult tail = finite_horizon_bias(mdp, pol, f_const, 0.9, 500);
  CHECK(std::fabs(tail.bias_term) < 1e-20);

  std::vector<double> f(10);
  for (double& v : f) v = rng.uniform(-1.0, 1.0);
  FiniteHorizonResult rnd = finite_horizon_bias(mdp, pol, f, 0.9, 7);
  CHECK(rnd.gap < 1e-10);

  CHECK_THROWS_AS((void)finite_horizon_bias(mdp, pol, f, 0.9, 0), contract_error);
}

TEST_CASE("kl_convexity: boundary alphas and domain errors") {
  Rng rng(3);
  DiscreteDistribution p = random_distribution(8, rng);
  DiscreteDistribution q = random_distribution(8, rng);
  DiscreteDistribution r = random_distribution(8, rng);

  KlConvexityResult a0 = kl_convexity_check(p, q, r, 0.0);
  CHECK(a0.mixed_kl == doctest::Approx(a0.bound).epsilon(1e-14));

  KlConvexityResult a1 = kl_convexity_check(p, q, r, 1.0);
  CHECK(std::fabs(a1.mixed_kl) < 1e-14);
  CHECK(std::fabs(a1.bound) < 1e-14);

  // support violation: q zero where p is positive
  DiscreteDistribution pz({0.5, 0.5, 0.0});
  DiscreteDistribution qz({0.0, 0.5, 0.5});
  CHECK_THROWS_AS((void)kl_divergence(pz.probs, qz.probs), std::domain_error);
}

TEST_CASE("emd: identity and two-point transport") {
  DiscreteDistribution p({1.0, 0.0}, {0.0, 1.0});
  DiscreteDistribution q({0.0, 1.0}, {0.0, 1.0});
  Tensor cost(2, 2);
  cost(0, 1) = cost(1, 0) = 1.0;

  CHECK(emd_primal(p, p, cost) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(emd_primal(p, q, cost) == doctest::Approx(1.0).epsilon(1e-12));

  EmdDualResult same = emd_dual(p, p, cost);
  CHECK(std::fabs(same.value) < 1e-12);

  EmdDualResult dual = emd_dual(p, q, cost);
  CHECK(dual.value == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::fabs(dual.witness[0] - dual.witness[1]) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("emd: 1-D LP value equals the CDF formula") {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 3 + rng.index(6);
    std::vector<double> coords(n);
    double x = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      coords[i] = x;
      x += 0.1 + rng.uniform(0.0, 0.4);
    }
    DiscreteDistribution p(random_distribution(n, rng).probs, coords);
    DiscreteDistribution q(random_distribution(n, rng).probs, coords);
    Tensor cost(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) cost(i, j) = std::fabs(coords[i] - coords[j]);
    CHECK(std::fabs(emd_primal(p, q, cost) - emd_1d_cdf(p, q)) < 1e-9);
  }
}

TEST_CASE("simplex: infeasible systems are reported") {
  Tensor a(1, 1);
  a(0, 0) = 1.0;
  CHECK_THROWS_AS((void)SimplexSolver::solve(a, {-1.0}, {1.0}), numerical_error);
}

TEST_CASE("dv representation: identity, constants, closed-form maximizer") {
  Rng rng(5);
  DiscreteDistribution p = random_distribution(6, rng);
  DiscreteDistribution q = random_distribution(6, rng);

  DvResult same = dv_representation_check(p, p);
  CHECK(std::fabs(same.kl) < 1e-14);
  CHECK(std::fabs(same.dv_max) < 1e-12);

  // constant x: both expectation terms cancel
  CHECK(std::fabs(dv_objective(p, q, std::vector<double>(6, 3.7))) < 1e-12);

  DvResult r = dv_representation_check(p, q);
  CHECK(std::fabs(r.dv_max - r.kl) < 1e-8);

  DiscreteDistribution bad_q({0.0, 1.0});
  DiscreteDistribution some_p({0.5, 0.5});
  CHECK_THROWS_AS((void)dv_representation_check(some_p, bad_q), std::domain_error);
}

TEST_CASE("minibatch bias: closed-form values at theta = 1 and theta = 0") {
  MinibatchBiasResult r = minibatch_bias(1.0, 1);
  const double e = std::exp(1.0);
  CHECK(std::fabs(r.full_gradient - (-e / (1.0 + e))) < 1e-15);
  CHECK(std::fabs(r.expected_minibatch - (-0.5)) < 1e-15);
  CHECK(std::fabs(r.bias - (e / (1.0 + e) - 0.5)) < 1e-9);
  CHECK(r.bias == doctest::Approx(0.23105857863).epsilon(1e-9));

  CHECK(std::fabs(minibatch_bias(0.0, 1).bias) < 1e-15);

  double prev = r.bias;
  for (std::size_t m : {2, 4, 8}) {
    const double b = minibatch_bias(1.0, m).bias;
    CHECK(b > 0.0);
    CHECK(b < prev);
    prev = b;
  }
  for (std::size_t m : {1, 2, 4, 8})
    CHECK(std::fabs(minibatch_bias_linear(m).bias) < 1e-15);

  CHECK_THROWS_AS((void)minibatch_bias(1.0, 13), contract_error);
  CHECK_THROWS_AS((void)minibatch_bias(1.0, 0), contract_error);
}

TEST_CASE("verification suite: all rows pass, filter works, negative control fails") {
  VerifyOptions opt;
  opt.seed = 12345;
  auto rows = run_verification_suite(opt);
  REQUIRE(rows.size() == 7);
  for (const auto& row : rows) {
    INFO(row.name, ": ", row.detail);
    CHECK(row.pass);
  }

  VerifyOptions filtered = opt;
  filtered.only = "telescoping";
  auto single = run_verification_suite(filtered);
  REQUIRE(single.size() == 1);
  CHECK(single[0].name == "telescoping");

  VerifyOptions corrupted = opt;
  corrupted.inject_gamma_bug = true;
  auto bad = run_verification_suite(corrupted);
  CHECK_FALSE(bad[0].pass);  // telescoping row must notice the misapplied gamma
  for (std::size_t i = 1; i < bad.size(); ++i) CHECK(bad[i].pass);
}
