#pragma once

#include <cmath>
#include <vector>

#include "softdice/errors.hpp"
#include "softdice/tensor.hpp"

namespace softdice {

struct LpResult {
  double value = 0.0;
  std::vector<double> x;
};

/// Dense two-phase simplex for  min c^T x  s.t.  A x = b, x >= 0.
/// Bland's rule throughout (no cycling); exact enough for the tiny
/// transport instances the verification suite solves. Redundant equality
/// rows are dropped at the end of phase 1.
class SimplexSolver {
 public:
  static constexpr double kEps = 1e-9;

  static LpResult solve(Tensor a, std::vector<double> b, std::vector<double> c) {
    const std::size_t n = c.size();
    if (a.cols() != n || a.rows() != b.size())
      throw contract_error("simplex: dimension mismatch");

    // normalize to b >= 0
    for (std::size_t i = 0; i < a.rows(); ++i)
      if (b[i] < 0.0) {
        b[i] = -b[i];
        for (std::size_t j = 0; j < n; ++j) a(i, j) = -a(i, j);
      }

    SimplexSolver s;
    s.n_ = n;
    s.m_ = a.rows();
    // tableau columns: structural vars then one artificial per row
    s.cols_ = n + s.m_;
    s.t_ = Tensor(s.m_ + 1, s.cols_ + 1);
    for (std::size_t i = 0; i < s.m_; ++i) {
      for (std::size_t j = 0; j < n; ++j) s.t_(i, j) = a(i, j);
      s.t_(i, n + i) = 1.0;
      s.t_(i, s.cols_) = b[i];
    }
    s.basis_.resize(s.m_);
    for (std::size_t i = 0; i < s.m_; ++i) s.basis_[i] = n + i;

    // phase 1: minimize the sum of artificials
    for (std::size_t j = 0; j < s.cols_; ++j)
      s.t_(s.m_, j) = (j >= n) ? 1.0 : 0.0;
    s.t_(s.m_, s.cols_) = 0.0;
    s.price_out();
    s.iterate(/*restrict_to=*/s.cols_);
    if (s.t_(s.m_, s.cols_) < -kEps)
      throw numerical_error("simplex: infeasible system (phase-1 objective " +
                            std::to_string(-s.t_(s.m_, s.cols_)) + ")");
    s.expel_artificials();

    // phase 2: the real objective over structural columns only
    for (std::size_t j = 0; j < s.cols_; ++j) s.t_(s.m_, j) = (j < n) ? c[j] : 0.0;
    s.t_(s.m_, s.cols_) = 0.0;
    s.price_out();
    s.iterate(/*restrict_to=*/n);

    LpResult out;
    out.x.assign(n, 0.0);
    for (std::size_t i = 0; i < s.m_; ++i)
      if (s.basis_[i] < n) out.x[s.basis_[i]] = s.t_(i, s.cols_);
    out.value = 0.0;
    for (std::size_t j = 0; j < n; ++j) out.value += c[j] * out.x[j];
    return out;
  }

 private:
  std::size_t n_ = 0, m_ = 0, cols_ = 0;
  Tensor t_;  // (m+1) x (cols+1) tableau, objective in the last row
  std::vector<std::size_t> basis_;

  // subtract basic rows so reduced costs of basic columns are zero
  void price_out() {
    for (std::size_t i = 0; i < m_; ++i) {
      const double coef = t_(m_, basis_[i]);
      if (std::fabs(coef) < 1e-15) continue;
      for (std::size_t j = 0; j <= cols_; ++j) t_(m_, j) -= coef * t_(i, j);
    }
  }

  void pivot(std::size_t row, std::size_t col) {
    const double piv = t_(row, col);
    for (std::size_t j = 0; j <= cols_; ++j) t_(row, j) /= piv;
    for (std::size_t i = 0; i <= m_; ++i) {
      if (i == row) continue;
      const double f = t_(i, col);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j <= cols_; ++j) t_(i, j) -= f * t_(row, j);
    }
    basis_[row] = col;
  }

  void iterate(std::size_t restrict_to) {
    for (std::size_t guard = 0; guard < 100000; ++guard) {
      // Bland: smallest-index column with negative reduced cost
      std::size_t col = restrict_to;
      for (std::size_t j = 0; j < restrict_to; ++j)
        if (t_(m_, j) < -kEps) {
          col = j;
          break;
        }
      if (col == restrict_to) return;  // optimal
      // Bland: smallest-index basic variable among the tightest ratios
      std::size_t row = m_;
      double best = 0.0;
      for (std::size_t i = 0; i < m_; ++i) {
        if (t_(i, col) <= kEps) continue;
        const double ratio = t_(i, cols_) / t_(i, col);
        if (row == m_ || ratio < best - kEps ||
            (ratio < best + kEps && basis_[i] < basis_[row])) {
          row = i;
          best = ratio;
        }
      }
      if (row == m_) throw numerical_error("simplex: unbounded objective");
      pivot(row, col);
    }
    throw numerical_error("simplex: iteration limit reached");
  }

  // after phase 1, pivot artificials out of the basis or drop their rows
  void expel_artificials() {
    for (std::size_t i = 0; i < m_;) {
      if (basis_[i] < n_) {
        ++i;
        continue;
      }
      std::size_t col = n_;
      for (std::size_t j = 0; j < n_; ++j)
        if (std::fabs(t_(i, j)) > kEps) {
          col = j;
          break;
        }
      if (col < n_) {
        pivot(i, col);
        ++i;
      } else {
        // redundant constraint: remove the row
        for (std::size_t r = i; r + 1 < m_; ++r) {
          for (std::size_t j = 0; j <= cols_; ++j) t_(r, j) = t_(r + 1, j);
          basis_[r] = basis_[r + 1];
        }
        // shift the objective row up into the vacated slot
        for (std::size_t j = 0; j <= cols_; ++j) t_(m_ - 1, j) = t_(m_, j);
        --m_;
        basis_.pop_back();
      }
    }
  }
};

}  // namespace softdice
