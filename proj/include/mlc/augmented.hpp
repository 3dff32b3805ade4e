#pragma once
/**
 * @file augmented.hpp
 * @brief The augmented coarse space V_H + span{y_hat} + span{p_hat}, embedded
 *        in a fine level through an explicit basis matrix B.
 *
 * Operators are Galerkin projections B^T A B of the fine-level matrices, so
 * every function of the space is an exact fine-level P1 function.
 */

#include <cmath>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mlc/dense.hpp"
#include "mlc/fem.hpp"
#include "mlc/space.hpp"
#include "mlc/sparse.hpp"

namespace mlc {

struct BasisColumnReport {
  std::string name;
  /// Cholesky pivot of the column in the L2 Gram matrix, relative to its diagonal.
  double relative_pivot = 1.0;
  bool dropped = false;
};

class AugmentedSpace final : public SolveSpace {
 public:
  static constexpr double dependence_threshold = 1e-12;

  /// @p y_hat and @p p_hat are nodal vectors on @p fine_level. Either may be
  /// empty, in which case it is skipped.
  AugmentedSpace(Discretization& disc, int coarse_level, int fine_level,
                 std::span<const double> y_hat, std::span<const double> p_hat)
      : fine_level_(fine_level), data_(&disc.level(fine_level)) {
    if (coarse_level > fine_level) {
      throw std::invalid_argument("AugmentedSpace: coarse level above fine level");
    }
    const Mesh& coarse = disc.mesh(coarse_level);
    const SparseMatrix& transfer = disc.transfer(coarse_level, fine_level);

    // Keep only the columns of interior coarse nodes (V_H is in H^1_0).
    std::vector<int> column(coarse.num_nodes(), -1);
    int n_coarse = 0;
    for (std::size_t i = 0; i < coarse.num_nodes(); ++i) {
      if (!coarse.boundary_mask[i]) column[i] = n_coarse++;
    }
    TripletList t;
    const auto rp = transfer.row_ptr();
    const auto ci = transfer.col_idx();
    const auto v = transfer.values();
    for (std::size_t i = 0; i < transfer.rows(); ++i) {
      for (int k = rp[i]; k < rp[i + 1]; ++k) {
        if (column[ci[k]] >= 0) t.push_back({static_cast<int>(i), column[ci[k]], v[k]});
      }
    }
    coarse_basis_ = SparseMatrix::from_triplets(transfer.rows(), n_coarse, std::move(t));
    coarse_basis_t_ = coarse_basis_.transpose();

    std::vector<std::pair<std::string, Vector>> candidates;
    if (!y_hat.empty()) candidates.emplace_back("y_hat", Vector(y_hat.begin(), y_hat.end()));
    if (!p_hat.empty()) candidates.emplace_back("p_hat", Vector(p_hat.begin(), p_hat.end()));
    select_extra_columns(std::move(candidates));

    mass_ = galerkin(data_->mass);
    poisson_ = galerkin(data_->stiffness);
    factor_ = std::make_shared<DenseFactorization>(poisson_);
    poisson_factor_ = factor_;
  }

  [[nodiscard]] int level() const override { return fine_level_; }
  [[nodiscard]] const LevelData& data() const override { return *data_; }

  [[nodiscard]] std::size_t coarse_dimension() const { return coarse_basis_.cols(); }
  [[nodiscard]] std::size_t dimension() const { return coarse_dimension() + extra_.size(); }
  [[nodiscard]] const std::vector<BasisColumnReport>& conditioning_report() const {
    return report_;
  }
  [[nodiscard]] const DenseMatrix& galerkin_stiffness() const { return poisson_; }
  [[nodiscard]] const DenseMatrix& galerkin_mass() const { return mass_; }

  /// B c
  [[nodiscard]] Vector apply(std::span<const double> c) const {
    if (c.size() != dimension()) throw std::invalid_argument("AugmentedSpace::apply: bad length");
    Vector out = coarse_basis_ * c.subspan(0, coarse_dimension());
    for (std::size_t j = 0; j < extra_.size(); ++j) axpy(c[coarse_dimension() + j], extra_[j], out);
    return out;
  }

  /// B^T v
  [[nodiscard]] Vector restrict_dual(std::span<const double> v) const {
    Vector out = coarse_basis_t_ * v;
    for (const auto& e : extra_) out.push_back(dot(e, v));
    return out;
  }

  /// B^T A B, symmetrized.
  [[nodiscard]] DenseMatrix galerkin(const SparseMatrix& a) const {
    const std::size_t nc = coarse_dimension();
    const std::size_t n = dimension();
    DenseMatrix g(n, n);
    const SparseMatrix cc = coarse_basis_t_ * (a * coarse_basis_);
    const auto rp = cc.row_ptr();
    const auto ci = cc.col_idx();
    const auto v = cc.values();
    for (std::size_t i = 0; i < nc; ++i) {
      for (int k = rp[i]; k < rp[i + 1]; ++k) g(i, ci[k]) = v[k];
    }
    for (std::size_t j = 0; j < extra_.size(); ++j) {
      const Vector ae = a * extra_[j];
      const Vector cross = coarse_basis_t_ * ae;
      for (std::size_t i = 0; i < nc; ++i) g(i, nc + j) = g(nc + j, i) = cross[i];
      for (std::size_t i = 0; i < extra_.size(); ++i) g(nc + i, nc + j) = dot(extra_[i], ae);
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double s = 0.5 * (g(i, j) + g(j, i));
        g(i, j) = g(j, i) = s;
      }
    }
    return g;
  }

  Vector solve(std::span<const double> load, std::span<const double> /*guess*/) override {
    ++counters_.solves;
    return apply(factor_->solve(restrict_dual(load)));
  }

  void set_reaction(std::span<const double> state,
                    const std::function<double(double)>& weight) override {
    Vector w = evaluate_at_quadrature(*data_->mesh, state);
    for (double& value : w) value = weight(value);
    const SparseMatrix op = add_scaled(data_->stiffness, assemble_mass(*data_->mesh, w));
    factor_ = std::make_shared<DenseFactorization>(galerkin(op));
  }

  void clear_reaction() override { factor_ = poisson_factor_; }

  [[nodiscard]] double dual_norm(std::span<const double> dual) const override {
    return norm2(restrict_dual(dual));
  }

 private:
  void select_extra_columns(std::vector<std::pair<std::string, Vector>> candidates) {
    const SparseMatrix& m = data_->mass;
    for (auto& [name, vec] : candidates) {
      BasisColumnReport entry{name};
      const double norm = std::sqrt(std::max(0.0, dot(vec, m * vec)));
      if (!(norm > 0.0)) {
        entry.relative_pivot = 0.0;
        entry.dropped = true;
        report_.push_back(entry);
        continue;
      }
      for (double& x : vec) x /= norm;
      extra_.push_back(std::move(vec));
      // Pivot of the new column after eliminating all previous ones.
      const DenseMatrix gram = galerkin(m);
      entry.relative_pivot = last_pivot(gram);
      if (!(entry.relative_pivot > dependence_threshold)) {
        entry.dropped = true;
        extra_.pop_back();
      }
      report_.push_back(entry);
    }
  }

  /// Schur complement of the last diagonal entry, divided by that entry.
  static double last_pivot(const DenseMatrix& gram) {
    const std::size_t n = gram.rows();
    if (n == 1) return 1.0;
    DenseMatrix head(n - 1, n - 1);
    Vector col(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (std::size_t j = 0; j + 1 < n; ++j) head(i, j) = gram(i, j);
      col[i] = gram(i, n - 1);
    }
    const Vector z = dense_solve(head, col);
    const double diag = gram(n - 1, n - 1);
    return (diag - dot(col, z)) / diag;
  }

  int fine_level_;
  const LevelData* data_;
  SparseMatrix coarse_basis_;
  SparseMatrix coarse_basis_t_;
  std::vector<Vector> extra_;
  std::vector<BasisColumnReport> report_;
  DenseMatrix mass_;
  DenseMatrix poisson_;
  std::shared_ptr<DenseFactorization> factor_;
  std::shared_ptr<DenseFactorization> poisson_factor_;
};

}  // namespace mlc
