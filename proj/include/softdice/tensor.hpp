#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "softdice/errors.hpp"

namespace softdice {

/// Dense row-major tensor of doubles. Rank 0 is treated as shape {1,1},
/// rank 1 as a row vector {1,n}; all arithmetic in this library is rank-2.
class Tensor {
 public:
  Tensor() = default;

  Tensor(std::size_t rows, std::size_t cols)
      : shape_{rows, cols}, data_(rows * cols, 0.0) {}

  Tensor(std::vector<std::size_t> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    std::size_t expected = 1;
    for (std::size_t d : shape_) expected *= d;
    if (shape_.size() > 2)
      throw contract_error("Tensor: rank > 2 not supported (got rank " +
                           std::to_string(shape_.size()) + ")");
    if (expected != data_.size())
      throw contract_error("Tensor: shape/data size mismatch");
  }

  static Tensor scalar(double v) { return Tensor({1, 1}, {v}); }

  static Tensor row(std::vector<double> values) {
    std::size_t n = values.size();
    return Tensor({1, n}, std::move(values));
  }

  static Tensor zeros(std::size_t rows, std::size_t cols) { return Tensor(rows, cols); }

  static Tensor full(std::size_t rows, std::size_t cols, double v) {
    Tensor t(rows, cols);
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t rows() const {
    if (shape_.empty()) return 1;
    if (shape_.size() == 1) return 1;
    return shape_[0];
  }
  std::size_t cols() const {
    if (shape_.empty()) return 1;
    if (shape_.size() == 1) return shape_[0];
    return shape_[1];
  }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols() + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols() + j]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  /// Value of a one-element tensor.
  double item() const {
    if (size() != 1)
      throw contract_error("Tensor::item: tensor has " + std::to_string(size()) +
                           " elements, expected 1");
    return data_[0];
  }

  bool same_shape(const Tensor& o) const { return rows() == o.rows() && cols() == o.cols(); }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

namespace detail {
inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw contract_error(std::string(op) + ": shape mismatch [" + std::to_string(a.rows()) +
                         "x" + std::to_string(a.cols()) + "] vs [" + std::to_string(b.rows()) +
                         "x" + std::to_string(b.cols()) + "]");
}
}  // namespace detail

// ---- elementwise kernels ----

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "add");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "sub");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "mul");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

inline Tensor neg(const Tensor& a) {
  Tensor out = a;
  for (double& v : out.data()) v = -v;
  return out;
}

inline Tensor scale(const Tensor& a, double c) {
  Tensor out = a;
  for (double& v : out.data()) v *= c;
  return out;
}

inline Tensor add_scalar(const Tensor& a, double c) {
  Tensor out = a;
  for (double& v : out.data()) v += c;
  return out;
}

inline Tensor tanh(const Tensor& a) {
  Tensor out = a;
  for (double& v : out.data()) v = std::tanh(v);
  return out;
}

inline Tensor exp(const Tensor& a) {
  Tensor out = a;
  for (double& v : out.data()) v = std::exp(v);
  return out;
}

inline Tensor log(const Tensor& a) {
  Tensor out = a;
  for (double& v : out.data()) v = std::log(v);
  return out;
}

inline Tensor sqrt(const Tensor& a) {
  Tensor out = a;
  for (double& v : out.data()) v = std::sqrt(v);
  return out;
}

inline Tensor reciprocal(const Tensor& a) {
  Tensor out = a;
  for (double& v : out.data()) v = 1.0 / v;
  return out;
}

inline Tensor square(const Tensor& a) {
  Tensor out = a;
  for (double& v : out.data()) v *= v;
  return out;
}

inline Tensor clamp(const Tensor& a, double lo, double hi) {
  Tensor out = a;
  for (double& v : out.data()) v = std::min(std::max(v, lo), hi);
  return out;
}

/// 1 where lo <= x <= hi, else 0. Gradient mask for clamp.
inline Tensor clamp_mask(const Tensor& a, double lo, double hi) {
  Tensor out = a;
  for (double& v : out.data()) v = (v >= lo && v <= hi) ? 1.0 : 0.0;
  return out;
}

// ---- matrix kernels ----

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k)
    throw contract_error("matmul: inner dimensions differ (" + std::to_string(k) + " vs " +
                         std::to_string(b.rows()) + ")");
  Tensor out(m, n);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = pa + i * k;
    double* orow = po + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

inline Tensor transpose(const Tensor& a) {
  Tensor out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

// ---- reductions / broadcasting ----

inline Tensor sum_all(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return Tensor::scalar(s);
}

inline Tensor mean_all(const Tensor& a) {
  if (a.empty()) throw contract_error("mean: empty tensor");
  return Tensor::scalar(sum_all(a).item() / static_cast<double>(a.size()));
}

/// Sum over one axis, keeping rank 2: axis 0 gives [1 x C], axis 1 gives [R x 1].
inline Tensor sum_axis(const Tensor& a, int axis) {
  if (axis == 0) {
    Tensor out(1, a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t j = 0; j < a.cols(); ++j) out(0, j) += a(i, j);
    return out;
  }
  if (axis == 1) {
    Tensor out(a.rows(), 1);
    for (std::size_t i = 0; i < a.rows(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j);
      out(i, 0) = s;
    }
    return out;
  }
  throw contract_error("sum_axis: axis must be 0 or 1");
}

/// Expand a [1x1], [1xC] or [Rx1] tensor to [rows x cols].
inline Tensor broadcast_to(const Tensor& a, std::size_t rows, std::size_t cols) {
  if (a.rows() == rows && a.cols() == cols) return a;
  Tensor out(rows, cols);
  if (a.rows() == 1 && a.cols() == 1) {
    std::fill(out.data().begin(), out.data().end(), a[0]);
  } else if (a.rows() == 1 && a.cols() == cols) {
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) out(i, j) = a(0, j);
  } else if (a.cols() == 1 && a.rows() == rows) {
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) out(i, j) = a(i, 0);
  } else {
    throw contract_error("broadcast_to: incompatible source shape");
  }
  return out;
}

inline Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) throw contract_error("concat_cols: row count mismatch");
  Tensor out(a.rows(), a.cols() + b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(i, j);
    for (std::size_t j = 0; j < b.cols(); ++j) out(i, a.cols() + j) = b(i, j);
  }
  return out;
}

/// Columns [c0, c1) of a.
inline Tensor slice_cols(const Tensor& a, std::size_t c0, std::size_t c1) {
  if (c0 > c1 || c1 > a.cols()) throw contract_error("slice_cols: bad column range");
  Tensor out(a.rows(), c1 - c0);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = c0; j < c1; ++j) out(i, j - c0) = a(i, j);
  return out;
}

inline double max_abs(const Tensor& a) {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::fabs(v));
  return m;
}

inline double l2_norm_value(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

}  // namespace softdice
