#pragma once
/**
 * @file sparse.hpp
 * @brief Compressed sparse row matrices and the vector helpers used by the
 *        finite element and multigrid code.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mlc {

using Vector = std::vector<double>;

struct Triplet {
  int row;
  int col;
  double value;
};

using TripletList = std::vector<Triplet>;

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// y += s * x
inline void axpy(double s, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += s * x[i];
}

inline Vector operator-(const Vector& a, const Vector& b) {
  Vector r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

inline Vector operator+(const Vector& a, const Vector& b) {
  Vector r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

/// CSR matrix with sorted, duplicate-free column indices per row.
class SparseMatrix {
 public:
  SparseMatrix() = default;

  /// Duplicates are summed in their insertion order, so the result does not
  /// depend on anything but the order of @p triplets.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols, TripletList triplets) {
    std::stable_sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    SparseMatrix m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.row_ptr_.assign(rows + 1, 0);
    m.col_idx_.reserve(triplets.size());
    m.values_.reserve(triplets.size());
    int last_row = -1;
    int last_col = -1;
    for (const auto& t : triplets) {
      if (t.row < 0 || static_cast<std::size_t>(t.row) >= rows || t.col < 0 ||
          static_cast<std::size_t>(t.col) >= cols) {
        throw std::out_of_range("SparseMatrix: triplet index out of range");
      }
      if (t.row == last_row && t.col == last_col) {
        m.values_.back() += t.value;
        continue;
      }
      m.col_idx_.push_back(t.col);
      m.values_.push_back(t.value);
      ++m.row_ptr_[t.row + 1];
      last_row = t.row;
      last_col = t.col;
    }
    std::partial_sum(m.row_ptr_.begin(), m.row_ptr_.end(), m.row_ptr_.begin());
    return m;
  }

  static SparseMatrix identity(std::size_t n) {
    TripletList t;
    t.reserve(n);
    for (std::size_t i = 0; i < n; ++i) t.push_back({static_cast<int>(i), static_cast<int>(i), 1.0});
    return from_triplets(n, n, std::move(t));
  }

  [[nodiscard]] std::size_t rows() const { return rows_; }
  [[nodiscard]] std::size_t cols() const { return cols_; }
  [[nodiscard]] std::size_t nonzeros() const { return values_.size(); }

  [[nodiscard]] std::span<const int> row_ptr() const { return row_ptr_; }
  [[nodiscard]] std::span<const int> col_idx() const { return col_idx_; }
  [[nodiscard]] std::span<const double> values() const { return values_; }
  [[nodiscard]] std::span<double> values() { return values_; }

  /// Entry (i, j), zero if not stored.
  [[nodiscard]] double coeff(std::size_t i, std::size_t j) const {
    const auto begin = col_idx_.begin() + row_ptr_[i];
    const auto end = col_idx_.begin() + row_ptr_[i + 1];
    const auto it = std::lower_bound(begin, end, static_cast<int>(j));
    return (it != end && *it == static_cast<int>(j)) ? values_[it - col_idx_.begin()] : 0.0;
  }

  [[nodiscard]] Vector diagonal() const {
    Vector d(std::min(rows_, cols_), 0.0);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = coeff(i, i);
    return d;
  }

  /// y = A x
  void multiply(std::span<const double> x, std::span<double> y) const {
    if (x.size() != cols_ || y.size() != rows_) {
      throw std::invalid_argument("SparseMatrix::multiply: dimension mismatch");
    }
    for (std::size_t i = 0; i < rows_; ++i) {
      double s = 0.0;
      for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += values_[k] * x[col_idx_[k]];
      y[i] = s;
    }
  }

  [[nodiscard]] Vector operator*(std::span<const double> x) const {
    Vector y(rows_);
    multiply(x, y);
    return y;
  }

  /// y = A^T x
  [[nodiscard]] Vector multiply_transposed(std::span<const double> x) const {
    if (x.size() != rows_) {
      throw std::invalid_argument("SparseMatrix::multiply_transposed: dimension mismatch");
    }
    Vector y(cols_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i) {
      for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) y[col_idx_[k]] += values_[k] * x[i];
    }
    return y;
  }

  [[nodiscard]] SparseMatrix transpose() const {
    TripletList t;
    t.reserve(nonzeros());
    for (std::size_t i = 0; i < rows_; ++i) {
      for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
        t.push_back({col_idx_[k], static_cast<int>(i), values_[k]});
      }
    }
    return from_triplets(cols_, rows_, std::move(t));
  }

  /// Sparse product A * B.
  [[nodiscard]] SparseMatrix operator*(const SparseMatrix& b) const {
    if (cols_ != b.rows_) throw std::invalid_argument("SparseMatrix product: dimension mismatch");
    SparseMatrix c;
    c.rows_ = rows_;
    c.cols_ = b.cols_;
    c.row_ptr_.assign(rows_ + 1, 0);
    Vector accum(b.cols_, 0.0);
    std::vector<int> marker(b.cols_, -1);
    std::vector<int> pattern;
    for (std::size_t i = 0; i < rows_; ++i) {
      pattern.clear();
      for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
        const int j = col_idx_[k];
        for (int l = b.row_ptr_[j]; l < b.row_ptr_[j + 1]; ++l) {
          const int col = b.col_idx_[l];
          if (marker[col] != static_cast<int>(i)) {
            marker[col] = static_cast<int>(i);
            accum[col] = 0.0;
            pattern.push_back(col);
          }
          accum[col] += values_[k] * b.values_[l];
        }
      }
      std::sort(pattern.begin(), pattern.end());
      for (int col : pattern) {
        c.col_idx_.push_back(col);
        c.values_.push_back(accum[col]);
      }
      c.row_ptr_[i + 1] = static_cast<int>(c.col_idx_.size());
    }
    return c;
  }

  /// Largest |A_ij - A_ji| over stored entries.
  [[nodiscard]] double asymmetry() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < rows_; ++i) {
      for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
        worst = std::max(worst, std::abs(values_[k] - coeff(col_idx_[k], i)));
      }
    }
    return worst;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<int> row_ptr_{0};
  std::vector<int> col_idx_;
  Vector values_;
};

/// ||b - A x||_2
inline double residual_norm(const SparseMatrix& a, std::span<const double> x,
                            std::span<const double> b) {
  Vector ax = a * x;
  double s = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) s += (b[i] - ax[i]) * (b[i] - ax[i]);
  return std::sqrt(s);
}

}  // namespace mlc
