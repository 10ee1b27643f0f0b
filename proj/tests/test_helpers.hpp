#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "softdice/autodiff.hpp"
#include "softdice/tensor.hpp"

namespace softdice::testing {

/// Central finite difference of a scalar function of flat leaf values.
/// `build` maps the current leaf tensors to a scalar. Perturbs one entry of
/// one leaf at a time.
inline std::vector<Tensor> finite_difference(
    const std::function<double(const std::vector<Tensor>&)>& eval_scalar,
    std::vector<Tensor> leaves, double h = 1e-5) {
  std::vector<Tensor> grads;
  grads.reserve(leaves.size());
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    Tensor g(leaves[li].rows(), leaves[li].cols());
    for (std::size_t i = 0; i < leaves[li].size(); ++i) {
      const double orig = leaves[li][i];
      leaves[li][i] = orig + h;
      const double up = eval_scalar(leaves);
      leaves[li][i] = orig - h;
      const double down = eval_scalar(leaves);
      leaves[li][i] = orig;
      g[i] = (up - down) / (2.0 * h);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

inline double rel_error(double a, double b, double floor = 1e-6) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), floor});
}

inline double max_rel_error(const Tensor& a, const Tensor& b, double floor = 1e-6) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, rel_error(a[i], b[i], floor));
  return m;
}

}  // namespace softdice::testing
