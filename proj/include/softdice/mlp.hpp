#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "softdice/autodiff.hpp"
#include "softdice/rng.hpp"

namespace softdice {

/// Orthogonal initialization. The returned rows x cols matrix Q satisfies
/// Q^T Q = gain^2 I when rows >= cols, and Q Q^T = gain^2 I otherwise.
inline Tensor orthogonal_init(std::size_t rows, std::size_t cols, double gain,
                              std::uint64_t seed) {
  if (rows < 1 || cols < 1) throw contract_error("orthogonal_init: dimensions must be >= 1");
  const bool transposed = rows < cols;
  const std::size_t r = transposed ? cols : rows;
  const std::size_t c = transposed ? rows : cols;

  Rng rng(seed);
  Tensor a = rng.normal_tensor(r, c);

  // modified Gram-Schmidt over columns (two projection sweeps), unit norms
  for (std::size_t j = 0; j < c; ++j) {
    for (int sweep = 0; sweep < 2; ++sweep) {
      for (std::size_t i = 0; i < j; ++i) {
        double dot = 0.0;
        for (std::size_t k = 0; k < r; ++k) dot += a(k, i) * a(k, j);
        for (std::size_t k = 0; k < r; ++k) a(k, j) -= dot * a(k, i);
      }
    }
    double norm = 0.0;
    for (std::size_t k = 0; k < r; ++k) norm += a(k, j) * a(k, j);
    norm = std::sqrt(norm);
    while (norm < 1e-8) {  // essentially impossible for Gaussian draws
      for (std::size_t k = 0; k < r; ++k) a(k, j) = rng.normal();
      norm = 0.0;
      for (std::size_t k = 0; k < r; ++k) norm += a(k, j) * a(k, j);
      norm = std::sqrt(norm);
    }
    for (std::size_t k = 0; k < r; ++k) a(k, j) /= norm;
  }
  for (double& v : a.data()) v *= gain;
  return transposed ? transpose(a) : a;
}

/// Fully connected net: tanh on hidden layers, identity on the output.
class Mlp {
 public:
  Mlp() = default;

  Mlp(std::size_t in_dim, std::size_t out_dim, std::size_t hidden_width,
      std::size_t hidden_layers, Rng& rng, double hidden_gain = std::sqrt(2.0),
      double out_gain = 1.0)
      : in_dim_(in_dim), out_dim_(out_dim) {
    std::size_t prev = in_dim;
    for (std::size_t l = 0; l < hidden_layers; ++l) {
      add_layer(prev, hidden_width, hidden_gain, rng);
      prev = hidden_width;
    }
    add_layer(prev, out_dim, out_gain, rng);
  }

  /// [B x in] -> [B x out].
  Var apply(const Var& x) const {
    Var h = x;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      h = affine(h, weights_[l], biases_[l]);
      if (l + 1 < weights_.size()) h = tanh(h);
    }
    return h;
  }

  std::vector<Var> parameters() const {
    std::vector<Var> out;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      out.push_back(weights_[l]);
      out.push_back(biases_[l]);
    }
    return out;
  }

  std::vector<std::pair<std::string, Var>> named_parameters(const std::string& prefix) const {
    std::vector<std::pair<std::string, Var>> out;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      out.emplace_back(prefix + ".w" + std::to_string(l), weights_[l]);
      out.emplace_back(prefix + ".b" + std::to_string(l), biases_[l]);
    }
    return out;
  }

  std::size_t in_dim() const { return in_dim_; }
  std::size_t out_dim() const { return out_dim_; }
  std::size_t layer_count() const { return weights_.size(); }
  const Var& weight(std::size_t l) const { return weights_[l]; }

  /// Sum over layers of ||W^T W - I||_F^2 (optional actor regularizer).
  Var orthogonal_penalty() const {
    Var acc = constant(0.0);
    for (const Var& w : weights_) {
      Var wtw = matmul(transpose(w), w);
      Tensor eye(wtw.value().rows(), wtw.value().cols());
      for (std::size_t i = 0; i < eye.rows(); ++i) eye(i, i) = 1.0;
      acc = add(acc, sum(square(sub(wtw, constant(eye)))));
    }
    return acc;
  }

 private:
  void add_layer(std::size_t in, std::size_t out, double gain, Rng& rng) {
    std::uint64_t seed = static_cast<std::uint64_t>(rng.uniform() * 9007199254740992.0);
    weights_.push_back(leaf(orthogonal_init(in, out, gain, seed)));
    biases_.push_back(leaf(Tensor::zeros(1, out)));
  }

  std::size_t in_dim_ = 0, out_dim_ = 0;
  std::vector<Var> weights_;
  std::vector<Var> biases_;
};

/// Adam with bias correction. Moments are held outside the graph.
class Adam {
 public:
  Adam() = default;

  explicit Adam(const std::vector<Var>& params, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const Var& p : params)
      m_.emplace_back(p.value().rows(), p.value().cols()),
          v_.emplace_back(p.value().rows(), p.value().cols());
  }

  /// One update. Throws divergence_error on non-finite gradients.
  void step(const std::vector<Var>& params, const std::vector<Tensor>& grads, double lr) {
    if (params.size() != m_.size() || grads.size() != m_.size())
      throw contract_error("Adam::step: parameter/gradient count mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!grads[i].all_finite())
        throw divergence_error("diverged: non-finite gradient", t_);
      Tensor& p = params[i].get()->value;
      if (!p.same_shape(grads[i]))
        throw contract_error("Adam::step: gradient shape mismatch at parameter " +
                             std::to_string(i));
      for (std::size_t k = 0; k < p.size(); ++k) {
        const double g = grads[i][k];
        m_[i][k] = beta1_ * m_[i][k] + (1.0 - beta1_) * g;
        v_[i][k] = beta2_ * v_[i][k] + (1.0 - beta2_) * g * g;
        const double mhat = m_[i][k] / c1;
        const double vhat = v_[i][k] / c2;
        p[k] -= lr * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  std::size_t step_count() const { return t_; }

 private:
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  std::size_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace softdice
