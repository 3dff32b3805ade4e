#pragma once
/**
 * @file multigrid.hpp
 * @brief Symmetric Gauss-Seidel smoothing, geometric multigrid V-cycles over a
 *        mesh hierarchy, and a conjugate gradient solver.
 *
 * All systems are full-length nodal systems with Dirichlet rows eliminated to
 * identity rows; residuals restricted to a coarser level are masked on the
 * coarse boundary so boundary values stay exactly zero.
 */

#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mlc/dense.hpp"
#include "mlc/fem.hpp"
#include "mlc/mesh.hpp"
#include "mlc/sparse.hpp"

namespace mlc {

struct SolveResult {
  Vector x;
  int iterations = 0;
  double residual = 0.0;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double last_residual)
      : std::runtime_error(what), residual(last_residual) {}
  double residual;
};

/// Symmetric Gauss-Seidel: each sweep runs ascending then descending.
inline void gauss_seidel(const SparseMatrix& a, std::span<double> x, std::span<const double> b,
                         int sweeps) {
  const auto rp = a.row_ptr();
  const auto ci = a.col_idx();
  const auto v = a.values();
  const std::size_t n = a.rows();
  auto relax = [&](std::size_t i) {
    double diag = 0.0;
    double s = b[i];
    for (int k = rp[i]; k < rp[i + 1]; ++k) {
      if (static_cast<std::size_t>(ci[k]) == i) {
        diag = v[k];
      } else {
        s -= v[k] * x[ci[k]];
      }
    }
    if (diag == 0.0) throw std::runtime_error("gauss_seidel: zero diagonal at row " + std::to_string(i));
    x[i] = s / diag;
  };
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (std::size_t i = 0; i < n; ++i) relax(i);
    for (std::size_t i = n; i-- > 0;) relax(i);
  }
}

struct MgSettings {
  int pre_sweeps = 2;
  int post_sweeps = 2;
  int max_cycles = 100;
};

/// Per-level eliminated operators of one elliptic problem on a hierarchy,
/// plus the transfer operators between consecutive levels.
class MgOperatorStack {
 public:
  /// @p operators holds the unmodified (pre-elimination) matrix on each level
  /// 0..top of @p hierarchy.
  MgOperatorStack(const MeshHierarchy& hierarchy, std::vector<SparseMatrix> operators,
                  MgSettings settings = {})
      : hierarchy_(&hierarchy), settings_(settings) {
    const int top = static_cast<int>(operators.size()) - 1;
    if (top < 0 || top >= hierarchy.num_levels()) {
      throw std::invalid_argument("MgOperatorStack: operator count does not match hierarchy");
    }
    for (int l = 0; l <= top; ++l) {
      const Mesh& mesh = hierarchy.levels[l];
      if (operators[l].rows() != mesh.num_nodes()) {
        throw std::invalid_argument("MgOperatorStack: level " + std::to_string(l) +
                                    " operator has wrong dimension");
      }
      matrices_.push_back(eliminate_dirichlet(operators[l], mesh.boundary_mask));
      if (l > 0) {
        restrictions_.push_back(hierarchy.prolongations[l - 1].matrix.transpose());
      }
    }
    coarse_ = DenseFactorization(DenseMatrix::from_sparse(matrices_.front()));
  }

  [[nodiscard]] int top_level() const { return static_cast<int>(matrices_.size()) - 1; }
  [[nodiscard]] const SparseMatrix& matrix(int level) const { return matrices_.at(level); }
  [[nodiscard]] const MgSettings& settings() const { return settings_; }
  [[nodiscard]] const Mesh& mesh(int level) const { return hierarchy_->levels.at(level); }
  [[nodiscard]] const SparseMatrix& prolongation(int fine_level) const {
    return hierarchy_->prolongations.at(fine_level - 1).matrix;
  }
  [[nodiscard]] const SparseMatrix& restriction(int fine_level) const {
    return restrictions_.at(fine_level - 1);
  }
  [[nodiscard]] const DenseFactorization& coarse_solver() const { return coarse_; }

 private:
  const MeshHierarchy* hierarchy_;
  MgSettings settings_;
  std::vector<SparseMatrix> matrices_;
  std::vector<SparseMatrix> restrictions_;
  DenseFactorization coarse_;
};

/// Restricts a nodal vector to the next coarser level by nodal injection.
inline Vector inject(const Prolongation& p, std::span<const double> fine) {
  Vector coarse(p.injection.size());
  for (std::size_t i = 0; i < p.injection.size(); ++i) coarse[i] = fine[p.injection[i]];
  return coarse;
}

/// Stack for a(y, v) on levels 0..top.
inline MgOperatorStack poisson_stack(const MeshHierarchy& hierarchy, int top,
                                     MgSettings settings = {}) {
  std::vector<SparseMatrix> ops;
  for (int l = 0; l <= top; ++l) ops.push_back(assemble_stiffness(hierarchy.levels[l]));
  return MgOperatorStack(hierarchy, std::move(ops), settings);
}

/// Stack for a(y, v) + (w(state) y, v), where @p state is a nodal function on
/// level @p top. Coarser operators are reassembled with the state injected
/// to each level.
inline MgOperatorStack reaction_stack(const MeshHierarchy& hierarchy, int top,
                                      std::span<const double> state,
                                      const std::function<double(double)>& weight,
                                      MgSettings settings = {}) {
  std::vector<SparseMatrix> ops(top + 1);
  Vector level_state(state.begin(), state.end());
  for (int l = top; l >= 0; --l) {
    const Mesh& mesh = hierarchy.levels[l];
    Vector w = evaluate_at_quadrature(mesh, level_state);
    for (double& value : w) value = weight(value);
    ops[l] = add_scaled(assemble_stiffness(mesh), assemble_mass(mesh, w));
    if (l > 0) level_state = inject(hierarchy.prolongations[l - 1], level_state);
  }
  return MgOperatorStack(hierarchy, std::move(ops), settings);
}

/// One V-cycle on @p level, updating @p x in place.
inline void v_cycle(const MgOperatorStack& stack, int level, std::span<double> x,
                    std::span<const double> b) {
  if (level < 0 || level > stack.top_level()) throw std::invalid_argument("v_cycle: level out of range");
  const SparseMatrix& a = stack.matrix(level);
  if (x.size() != a.rows() || b.size() != a.rows()) {
    throw std::invalid_argument("v_cycle: dimension mismatch on level " + std::to_string(level));
  }
  if (level == 0) {
    const Vector sol = stack.coarse_solver().solve(b);
    std::copy(sol.begin(), sol.end(), x.begin());
    return;
  }
  gauss_seidel(a, x, b, stack.settings().pre_sweeps);

  Vector r = a * x;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
  Vector rc = stack.restriction(level) * r;
  zero_boundary(rc, stack.mesh(level - 1).boundary_mask);
  Vector ec(rc.size(), 0.0);
  v_cycle(stack, level - 1, ec, rc);
  Vector ef = stack.prolongation(level) * ec;
  zero_boundary(ef, stack.mesh(level).boundary_mask);
  axpy(1.0, ef, x);

  gauss_seidel(a, x, b, stack.settings().post_sweeps);
}

/// V-cycles on the top level until ||b - A x||_2 <= tol_abs.
inline SolveResult mg_solve(const MgOperatorStack& stack, std::span<const double> b, double tol_abs,
                            std::span<const double> x0 = {}) {
  if (!(tol_abs > 0.0)) throw std::invalid_argument("mg_solve: tolerance must be positive");
  const int top = stack.top_level();
  const SparseMatrix& a = stack.matrix(top);
  if (b.size() != a.rows()) throw std::invalid_argument("mg_solve: dimension mismatch");
  SolveResult result;
  result.x = x0.empty() ? Vector(b.size(), 0.0) : Vector(x0.begin(), x0.end());
  result.residual = residual_norm(a, result.x, b);
  while (result.residual > tol_abs) {
    if (result.iterations >= stack.settings().max_cycles) {
      throw ConvergenceError("mg_solve: no convergence after " + std::to_string(result.iterations) +
                                 " cycles, residual " + std::to_string(result.residual),
                             result.residual);
    }
    v_cycle(stack, top, result.x, b);
    ++result.iterations;
    result.residual = residual_norm(a, result.x, b);
  }
  return result;
}

/// Conjugate gradients until ||b - A x|| <= tol ||b||.
inline SolveResult cg_solve(const SparseMatrix& a, std::span<const double> b, double tol) {
  const std::size_t n = a.rows();
  if (b.size() != n) throw std::invalid_argument("cg_solve: dimension mismatch");
  SolveResult result;
  result.x.assign(n, 0.0);
  Vector r(b.begin(), b.end());
  Vector p = r;
  Vector ap(n);
  const double target = tol * norm2(b);
  double rr = dot(r, r);
  result.residual = std::sqrt(rr);
  const int max_iter = static_cast<int>(10 * n);
  while (result.residual > target) {
    if (result.iterations >= max_iter) {
      throw ConvergenceError("cg_solve: no convergence after " + std::to_string(max_iter) +
                                 " iterations",
                             result.residual);
    }
    a.multiply(p, ap);
    const double step = rr / dot(p, ap);
    axpy(step, p, result.x);
    axpy(-step, ap, r);
    const double rr_new = dot(r, r);
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + (rr_new / rr) * p[i];
    rr = rr_new;
    result.residual = std::sqrt(rr);
    ++result.iterations;
  }
  return result;
}

}  // namespace mlc
