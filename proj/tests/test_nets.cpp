#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <vector>

#include "softdice/checkpoint.hpp"
#include "softdice/mlp.hpp"
#include "softdice/policy.hpp"
#include "test_helpers.hpp"

using namespace softdice;
using softdice::testing::finite_difference;
using softdice::testing::max_rel_error;

namespace {

double gram_error(const Tensor& q, double gain) {
  // || G - gain^2 I ||_max over the smaller-side Gram matrix
  const Tensor qt = transpose(q);
  const Tensor g = q.rows() >= q.cols() ? matmul(qt, q) : matmul(q, qt);
  double worst = 0.0;
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j) {
      const double want = i == j ? gain * gain : 0.0;
      worst = std::max(worst, std::fabs(g(i, j) - want));
    }
  return worst;
}

}  // namespace

TEST_CASE("orthogonal_init: gram identities") {
  CHECK(gram_error(orthogonal_init(4, 4, 1.0, 1), 1.0) < 1e-10);
  CHECK(gram_error(orthogonal_init(8, 3, std::sqrt(2.0), 2), std::sqrt(2.0)) < 1e-10);

  Tensor one = orthogonal_init(1, 1, 1.0, 3);
  CHECK(std::fabs(std::fabs(one[0]) - 1.0) < 1e-15);

  // singular values equal gain: Gram matrix of every shape is gain^2 I
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::size_t r = 1 + rng.index(12), c = 1 + rng.index(12);
    double gain = rng.uniform(0.5, 2.0);
    CHECK(gram_error(orthogonal_init(r, c, gain, 100 + trial), gain) < 1e-8);
  }
}

TEST_CASE("policy: zero-noise sample is tanh(mu)") {
  Rng rng(1);
  TanhGaussianPolicy pol(2, 2, 8, 2, rng, /*log_std_min=*/-40.0, /*log_std_max=*/-40.0);
  Tensor states = rng.uniform_tensor(3, 2, -1.0, 1.0);
  Rng noise(2);
  auto s = pol.sample(constant(states), noise);
  Tensor expected = pol.mean_action(states);
  for (std::size_t i = 0; i < expected.size(); ++i)
    CHECK(std::fabs(s.action.value()[i] - expected[i]) < 1e-12);
}

TEST_CASE("policy: log-prob closed forms at mu=0, sigma=1") {
  Rng rng(3);
  TanhGaussianPolicy pol(1, 1, 4, 1, rng);
  Tensor zero_state(1, 1);

  // eps = 0: action 0, log-prob -log(2*pi)/2 (squash correction ~1e-6)
  auto s = pol.sample_with_noise(constant(zero_state), Tensor::zeros(1, 1));
  CHECK(std::fabs(s.action.value().item()) < 1e-15);
  CHECK(s.log_prob.value().item() ==
        doctest::Approx(-0.5 * std::log(2.0 * M_PI)).epsilon(1e-4));

  // given action tanh(1): hand expansion of the change of variables
  const double a = std::tanh(1.0);
  Var lp = pol.log_prob(constant(zero_state), Tensor::row({a}));
  const double expected = -0.5 * std::log(2.0 * M_PI) - 0.5 - std::log(1.0 - a * a + 1e-6);
  CHECK(lp.value().item() == doctest::Approx(expected).epsilon(1e-9));

  // unimodality at moderate sigma: one pre-squash sigma off the mean scores
  // lower than the mean (large sigma would make the squashed density bimodal)
  pol.parameters().back().get()->value(0, 0) = std::log(0.5);
  Var lp_off = pol.log_prob(constant(zero_state), Tensor::row({std::tanh(0.5)}));
  Var lp_mean = pol.log_prob(constant(zero_state), Tensor::row({0.0}));
  CHECK(lp_off.value().item() < lp_mean.value().item());
}

TEST_CASE("policy: sample then re-evaluate gives the same log-prob") {
  Rng rng(7);
  TanhGaussianPolicy pol(2, 3, 8, 2, rng);
  Tensor states = rng.uniform_tensor(4, 2, -1.0, 1.0);
  Rng noise(8);
  auto s = pol.sample(constant(states), noise);
  Var lp = pol.log_prob(constant(states), s.action.value());
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(std::fabs(lp.value()(i, 0) - s.log_prob.value()(i, 0)) < 1e-9);
}

TEST_CASE("policy: density integrates to one (quadrature)") {
  Rng rng(9);
  TanhGaussianPolicy pol(1, 1, 4, 1, rng);
  // shift the distribution off center by training-free means: perturb a bias
  pol.parameters()[3].get()->value(0, 0) = 0.3;  // output bias -> mu = 0.3
  pol.parameters().back().get()->value(0, 0) = -0.5;  // log std

  Tensor zero_state(1, 1);
  const double mu = 0.3, sigma = std::exp(-0.5);
  const int n = 4000;
  const double lo = mu - 8.0 * sigma, hi = mu + 8.0 * sigma;
  const double h = (hi - lo) / n;
  double integral = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double u = lo + h * k;
    const double a = std::tanh(u);
    const double lp = pol.log_prob(constant(zero_state), Tensor::row({a})).value().item();
    const double da_du = 1.0 - a * a;
    const double w = (k == 0 || k == n) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
    integral += w * std::exp(lp) * da_du;
  }
  integral *= h / 3.0;
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("policy: entropy Monte-Carlo matches quadrature within 3 SE") {
  Rng rng(11);
  TanhGaussianPolicy pol(1, 1, 4, 1, rng);
  pol.parameters()[3].get()->value(0, 0) = -0.2;
  pol.parameters().back().get()->value(0, 0) = -0.3;

  Tensor zero_state(1, 1);
  const double mu = -0.2, sigma = std::exp(-0.3);

  // H = -int N(u) [log N(u) - log(1 - tanh(u)^2 + 1e-6)] du
  const int n = 20000;
  const double lo = mu - 10.0 * sigma, hi = mu + 10.0 * sigma;
  const double h = (hi - lo) / n;
  double quad = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double u = lo + h * k;
    const double z = (u - mu) / sigma;
    const double logn = -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2.0 * M_PI);
    const double t = std::tanh(u);
    const double integrand = -std::exp(logn) * (logn - std::log(1.0 - t * t + 1e-6));
    const double w = (k == 0 || k == n) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
    quad += w * integrand;
  }
  quad *= h / 3.0;

  const int samples = 10000;
  Rng noise(12);
  std::vector<double> lps(samples);
  Tensor states(samples, 1);
  auto s = pol.sample(constant(states), noise);
  double mean = 0.0;
  for (int i = 0; i < samples; ++i) {
    lps[i] = -s.log_prob.value()(i, 0);
    mean += lps[i];
  }
  mean /= samples;
  double var = 0.0;
  for (double v : lps) var += (v - mean) * (v - mean);
  var /= (samples - 1);
  const double se = std::sqrt(var / samples);
  CHECK(std::fabs(mean - quad) < 3.0 * se);
}

TEST_CASE("policy: reparametrized gradients match finite differences") {
  Rng rng(13);
  TanhGaussianPolicy pol(2, 2, 6, 1, rng);
  Tensor states = rng.uniform_tensor(3, 2, -1.0, 1.0);
  Tensor eps = rng.normal_tensor(3, 2);

  auto loss_of = [&]() {
    auto s = pol.sample_with_noise(constant(states), eps);
    return add(mean(square(s.action)), scale(mean(s.log_prob), 0.1));
  };

  auto params = pol.parameters();
  auto ad = gradient(loss_of(), params);

  // finite differences by mutating the shared parameter leaves in place
  double worst = 0.0;
  const double h = 1e-5;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& pv = params[pi].get()->value;
    for (std::size_t k = 0; k < pv.size(); ++k) {
      const double orig = pv[k];
      pv[k] = orig + h;
      const double up = loss_of().value().item();
      pv[k] = orig - h;
      const double down = loss_of().value().item();
      pv[k] = orig;
      const double fd = (up - down) / (2.0 * h);
      worst = std::max(worst, softdice::testing::rel_error(ad[pi][k], fd));
    }
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("policy: log_prob rejects out-of-range actions") {
  Rng rng(15);
  TanhGaussianPolicy pol(1, 1, 4, 1, rng);
  CHECK_THROWS_AS((void)pol.log_prob(constant(Tensor::zeros(1, 1)), Tensor::row({1.0})),
                  std::domain_error);
  CHECK_THROWS_AS((void)pol.log_prob(constant(Tensor::zeros(1, 1)), Tensor::row({-1.2})),
                  std::domain_error);
}

TEST_CASE("adam: zero gradients leave fresh parameters unchanged") {
  Var p = leaf(Tensor::row({1.0, -2.0, 3.0}));
  Adam opt({p});
  opt.step({p}, {Tensor::zeros(1, 3)}, 1e-3);
  CHECK(p.value()[0] == 1.0);
  CHECK(p.value()[1] == -2.0);
  CHECK(p.value()[2] == 3.0);
}

TEST_CASE("adam: first step is approximately lr * sign(g)") {
  Var p = leaf(Tensor::scalar(0.7));
  Adam opt({p});
  const double lr = 1e-3, g = 0.37;
  opt.step({p}, {Tensor::scalar(g)}, lr);
  CHECK(std::fabs((0.7 - p.value().item()) - lr) < 1e-6 * lr + 1e-10);
}

TEST_CASE("adam: two steps with constant gradient match the explicit recurrence") {
  const double lr = 1e-2, g = -0.8, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  Var p = leaf(Tensor::scalar(0.25));
  Adam opt({p});
  opt.step({p}, {Tensor::scalar(g)}, lr);
  opt.step({p}, {Tensor::scalar(g)}, lr);

  double x = 0.25, m = 0.0, v = 0.0;
  for (int t = 1; t <= 2; ++t) {
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mhat = m / (1 - std::pow(b1, t));
    const double vhat = v / (1 - std::pow(b2, t));
    x -= lr * mhat / (std::sqrt(vhat) + eps);
  }
  CHECK(std::fabs(p.value().item() - x) < 1e-12);
}

TEST_CASE("adam: NaN gradient raises divergence with the step index") {
  Var p = leaf(Tensor::scalar(1.0));
  Adam opt({p});
  opt.step({p}, {Tensor::scalar(0.1)}, 1e-3);
  Tensor bad = Tensor::scalar(std::nan(""));
  bool threw = false;
  try {
    opt.step({p}, {bad}, 1e-3);
  } catch (const divergence_error& e) {
    threw = true;
    CHECK(e.step() == 2);
  }
  CHECK(threw);
}

TEST_CASE("checkpoint: save and load round-trips exactly") {
  Rng rng(21);
  TanhGaussianPolicy pol(3, 2, 8, 2, rng);
  auto named = pol.named_parameters("policy");
  const std::string path = "/tmp/softdice_test_ckpt.json";
  save_checkpoint(path, named);

  std::vector<Tensor> saved;
  for (auto& [name, var] : named) saved.push_back(var.value());
  for (auto& [name, var] : named)
    for (double& v : var.get()->value.data()) v = -7.0;

  load_checkpoint(path, named);
  for (std::size_t i = 0; i < named.size(); ++i)
    for (std::size_t k = 0; k < saved[i].size(); ++k)
      CHECK(named[i].second.value()[k] == saved[i][k]);
  std::remove(path.c_str());
}

TEST_CASE("checkpoint: shape mismatch is a descriptive error") {
  Rng rng(22);
  TanhGaussianPolicy small(2, 1, 4, 1, rng);
  TanhGaussianPolicy big(3, 2, 8, 2, rng);
  const std::string path = "/tmp/softdice_test_ckpt2.json";
  save_checkpoint(path, small.named_parameters("policy"));
  CHECK_THROWS_WITH_AS(load_checkpoint(path, big.named_parameters("policy")),
                       doctest::Contains("shape mismatch"), contract_error);
  std::remove(path.c_str());
}
