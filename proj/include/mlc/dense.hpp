#pragma once
/**
 * @file dense.hpp
 * @brief Small dense symmetric solver for the coarsest multigrid level and
 *        the augmented coarse-space systems.
 *
 * Cholesky is tried first. If a pivot falls below 1e-14 times the largest
 * diagonal entry the matrix is refactored with partial-pivoting LU, and the
 * factorization records which pivot triggered the fallback.
 */

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mlc/sparse.hpp"

namespace mlc {

/// Row-major dense matrix.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double value = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, value) {}

  static DenseMatrix from_sparse(const SparseMatrix& a) {
    DenseMatrix d(a.rows(), a.cols());
    const auto rp = a.row_ptr();
    const auto ci = a.col_idx();
    const auto v = a.values();
    for (std::size_t i = 0; i < a.rows(); ++i) {
      for (int k = rp[i]; k < rp[i + 1]; ++k) d(i, ci[k]) = v[k];
    }
    return d;
  }

  [[nodiscard]] std::size_t rows() const { return rows_; }
  [[nodiscard]] std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  [[nodiscard]] Vector operator*(std::span<const double> x) const {
    Vector y(rows_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < cols_; ++j) s += data_[i * cols_ + j] * x[j];
      y[i] = s;
    }
    return y;
  }

  [[nodiscard]] double asymmetry() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < rows_; ++i) {
      for (std::size_t j = i + 1; j < cols_; ++j) {
        worst = std::max(worst, std::abs((*this)(i, j) - (*this)(j, i)));
      }
    }
    return worst;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vector data_;
};

class SingularMatrixError : public std::runtime_error {
 public:
  SingularMatrixError(std::size_t pivot, const std::string& what)
      : std::runtime_error(what), pivot_index(pivot) {}
  std::size_t pivot_index;
};

/// Reusable factorization of a dense symmetric matrix.
class DenseFactorization {
 public:
  static constexpr std::size_t default_dimension_cap = 4000;

  DenseFactorization() = default;

  explicit DenseFactorization(DenseMatrix a, std::size_t cap = default_dimension_cap) {
    if (a.rows() != a.cols()) throw std::invalid_argument("dense_solve: matrix must be square");
    if (a.rows() > cap) {
      throw std::invalid_argument("dense_solve: dimension " + std::to_string(a.rows()) +
                                  " exceeds cap " + std::to_string(cap));
    }
    n_ = a.rows();
    double max_diag = 0.0;
    for (std::size_t i = 0; i < n_; ++i) max_diag = std::max(max_diag, std::abs(a(i, i)));
    threshold_ = 1e-14 * std::max(max_diag, std::numeric_limits<double>::min());
    factor_ = a;
    if (auto bad = try_cholesky(); bad.has_value()) {
      fallback_pivot_ = bad;
      factor_ = std::move(a);
      lu_decompose();
    }
  }

  [[nodiscard]] std::size_t size() const { return n_; }
  [[nodiscard]] bool used_cholesky() const { return !fallback_pivot_.has_value(); }
  /// Index of the Cholesky pivot that forced the LU fallback.
  [[nodiscard]] std::optional<std::size_t> fallback_pivot() const { return fallback_pivot_; }

  [[nodiscard]] Vector solve(std::span<const double> b) const {
    if (b.size() != n_) throw std::invalid_argument("dense_solve: dimension mismatch");
    Vector x(b.begin(), b.end());
    if (used_cholesky()) {
      for (std::size_t i = 0; i < n_; ++i) {
        double s = x[i];
        for (std::size_t k = 0; k < i; ++k) s -= factor_(i, k) * x[k];
        x[i] = s / factor_(i, i);
      }
      for (std::size_t i = n_; i-- > 0;) {
        double s = x[i];
        for (std::size_t k = i + 1; k < n_; ++k) s -= factor_(k, i) * x[k];
        x[i] = s / factor_(i, i);
      }
      return x;
    }
    for (std::size_t i = 0; i < n_; ++i) std::swap(x[i], x[perm_[i]]);
    for (std::size_t i = 0; i < n_; ++i) {
      double s = x[i];
      for (std::size_t k = 0; k < i; ++k) s -= factor_(i, k) * x[k];
      x[i] = s;
    }
    for (std::size_t i = n_; i-- > 0;) {
      double s = x[i];
      for (std::size_t k = i + 1; k < n_; ++k) s -= factor_(i, k) * x[k];
      x[i] = s / factor_(i, i);
    }
    return x;
  }

 private:
  std::optional<std::size_t> try_cholesky() {
    for (std::size_t j = 0; j < n_; ++j) {
      double d = factor_(j, j);
      for (std::size_t k = 0; k < j; ++k) d -= factor_(j, k) * factor_(j, k);
      if (!(d > threshold_)) return j;
      const double ljj = std::sqrt(d);
      factor_(j, j) = ljj;
      for (std::size_t i = j + 1; i < n_; ++i) {
        double s = factor_(i, j);
        for (std::size_t k = 0; k < j; ++k) s -= factor_(i, k) * factor_(j, k);
        factor_(i, j) = s / ljj;
      }
    }
    return std::nullopt;
  }

  // Row swaps are stored as sequential transpositions: row i <-> perm_[i].
  void lu_decompose() {
    perm_.resize(n_);
    for (std::size_t k = 0; k < n_; ++k) {
      std::size_t p = k;
      for (std::size_t i = k + 1; i < n_; ++i) {
        if (std::abs(factor_(i, k)) > std::abs(factor_(p, k))) p = i;
      }
      if (!(std::abs(factor_(p, k)) > threshold_)) {
        throw SingularMatrixError(k, "dense_solve: matrix numerically singular at pivot " +
                                         std::to_string(k));
      }
      perm_[k] = p;
      if (p != k) {
        for (std::size_t j = 0; j < n_; ++j) std::swap(factor_(k, j), factor_(p, j));
      }
      for (std::size_t i = k + 1; i < n_; ++i) {
        const double l = factor_(i, k) / factor_(k, k);
        factor_(i, k) = l;
        for (std::size_t j = k + 1; j < n_; ++j) factor_(i, j) -= l * factor_(k, j);
      }
    }
  }

  std::size_t n_ = 0;
  double threshold_ = 0.0;
  DenseMatrix factor_;
  std::vector<std::size_t> perm_;
  std::optional<std::size_t> fallback_pivot_;
};

/// Solves A x = b for dense symmetric A.
inline Vector dense_solve(const DenseMatrix& a, std::span<const double> b,
                          std::size_t cap = DenseFactorization::default_dimension_cap) {
  return DenseFactorization(a, cap).solve(b);
}

}  // namespace mlc
