#pragma once
/**
 * @file fem.hpp
 * @brief P1 finite element assembly on triangles: stiffness, (weighted) mass
 *        and load vectors, homogeneous Dirichlet elimination and L2 norms.
 *
 * Scalar fields that live at quadrature points (controls, reaction weights)
 * are stored flat as values[element * rule.size() + q].
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "mlc/mesh.hpp"
#include "mlc/quadrature.hpp"
#include "mlc/sparse.hpp"

namespace mlc {

using ScalarField = std::function<double(double, double)>;

/// Nodal coefficient vector on one hierarchy level.
struct FeFunction {
  int level = 0;
  Vector coeffs;
};

namespace detail {

inline unsigned& assembly_threads() {
  static unsigned threads = 1;
  return threads;
}

/// Runs body(begin, end) over [0, n) split into contiguous chunks.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  const unsigned threads = std::max(1u, assembly_threads());
  if (threads == 1 || n < 4096) {
    body(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&body, &errors, t, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct P1Gradients {
  std::array<double, 3> dx;
  std::array<double, 3> dy;
  double area;
};

inline P1Gradients p1_gradients(const Mesh& mesh, std::size_t t) {
  const auto& tri = mesh.triangles[t];
  const Point& a = mesh.nodes[tri[0]];
  const Point& b = mesh.nodes[tri[1]];
  const Point& c = mesh.nodes[tri[2]];
  const double det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
  if (!(det > 0.0)) {
    throw std::runtime_error("assembly: degenerate triangle " + std::to_string(t));
  }
  P1Gradients g;
  g.dx = {(b.y - c.y) / det, (c.y - a.y) / det, (a.y - b.y) / det};
  g.dy = {(c.x - b.x) / det, (a.x - c.x) / det, (b.x - a.x) / det};
  g.area = 0.5 * det;
  return g;
}

}  // namespace detail

/// Number of threads used for element loops; results do not depend on it.
inline void set_assembly_threads(unsigned n) { detail::assembly_threads() = std::max(1u, n); }

/// Physical quadrature points and weights of every element of a mesh.
struct ElementQuadrature {
  std::vector<Point> points;
  Vector weights;
  std::size_t points_per_element = 0;

  ElementQuadrature() = default;
  ElementQuadrature(const Mesh& mesh, const QuadratureRule& rule)
      : points(mesh.num_triangles() * rule.size()),
        weights(mesh.num_triangles() * rule.size()),
        points_per_element(rule.size()) {
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
      const auto& tri = mesh.triangles[t];
      const double area = mesh.area(t);
      for (std::size_t q = 0; q < rule.size(); ++q) {
        const auto& l = rule.points[q];
        Point p{0.0, 0.0};
        for (int v = 0; v < 3; ++v) {
          p.x += l[v] * mesh.nodes[tri[v]].x;
          p.y += l[v] * mesh.nodes[tri[v]].y;
        }
        points[t * rule.size() + q] = p;
        weights[t * rule.size() + q] = 2.0 * area * rule.weights[q];
      }
    }
  }

  [[nodiscard]] std::size_t size() const { return points.size(); }

  [[nodiscard]] Vector evaluate(const ScalarField& g) const {
    Vector v(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) v[i] = g(points[i].x, points[i].y);
    return v;
  }

  /// sqrt(sum_q w_q v_q^2)
  [[nodiscard]] double l2_norm(std::span<const double> values) const {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += weights[i] * values[i] * values[i];
    return std::sqrt(s);
  }

  [[nodiscard]] double integrate(std::span<const double> values) const {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += weights[i] * values[i];
    return s;
  }
};

/// Values of the P1 function with nodal coefficients @p coeffs at every
/// quadrature point of @p rule.
inline Vector evaluate_at_quadrature(const Mesh& mesh, std::span<const double> coeffs,
                                     const QuadratureRule& rule = default_rule()) {
  if (coeffs.size() != mesh.num_nodes()) {
    throw std::invalid_argument("evaluate_at_quadrature: coefficient length mismatch");
  }
  const std::size_t nq = rule.size();
  Vector v(mesh.num_triangles() * nq);
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    for (std::size_t q = 0; q < nq; ++q) {
      const auto& l = rule.points[q];
      v[t * nq + q] = l[0] * coeffs[tri[0]] + l[1] * coeffs[tri[1]] + l[2] * coeffs[tri[2]];
    }
  }
  return v;
}

/// Nodal interpolant of @p g.
inline Vector interpolate(const Mesh& mesh, const ScalarField& g) {
  Vector v(mesh.num_nodes());
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i) v[i] = g(mesh.nodes[i].x, mesh.nodes[i].y);
  return v;
}

/// Stiffness matrix of a(y, v) = int grad y . grad v (no boundary handling).
inline SparseMatrix assemble_stiffness(const Mesh& mesh) {
  TripletList triplets(9 * mesh.num_triangles());
  detail::parallel_for(mesh.num_triangles(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      const auto g = detail::p1_gradients(mesh, t);
      const auto& tri = mesh.triangles[t];
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          triplets[9 * t + 3 * i + j] = {tri[i], tri[j],
                                         g.area * (g.dx[i] * g.dx[j] + g.dy[i] * g.dy[j])};
        }
      }
    }
  });
  return SparseMatrix::from_triplets(mesh.num_nodes(), mesh.num_nodes(), std::move(triplets));
}

/// Consistent mass matrix, exact local form (area/12)[2 1 1; 1 2 1; 1 1 2].
inline SparseMatrix assemble_mass(const Mesh& mesh) {
  TripletList triplets(9 * mesh.num_triangles());
  detail::parallel_for(mesh.num_triangles(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      const double area = mesh.area(t);
      if (!(area > 0.0)) throw std::runtime_error("assembly: degenerate triangle " + std::to_string(t));
      const auto& tri = mesh.triangles[t];
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          triplets[9 * t + 3 * i + j] = {tri[i], tri[j], area / 12.0 * (i == j ? 2.0 : 1.0)};
        }
      }
    }
  });
  return SparseMatrix::from_triplets(mesh.num_nodes(), mesh.num_nodes(), std::move(triplets));
}

/// Mass matrix weighted by a nonnegative field given at the quadrature points.
inline SparseMatrix assemble_mass(const Mesh& mesh, std::span<const double> weight_at_points,
                                  const QuadratureRule& rule = default_rule()) {
  const std::size_t nq = rule.size();
  if (weight_at_points.size() != mesh.num_triangles() * nq) {
    throw std::invalid_argument("assemble_mass: weight field has wrong length");
  }
  TripletList triplets(9 * mesh.num_triangles());
  detail::parallel_for(mesh.num_triangles(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      const double area = mesh.area(t);
      const auto& tri = mesh.triangles[t];
      std::array<double, 9> local{};
      for (std::size_t q = 0; q < nq; ++q) {
        const double w = weight_at_points[t * nq + q];
        if (w < 0.0) {
          throw std::domain_error("assemble_mass: negative weight in element " + std::to_string(t));
        }
        const auto& l = rule.points[q];
        const double s = 2.0 * area * rule.weights[q] * w;
        for (int i = 0; i < 3; ++i) {
          for (int j = 0; j < 3; ++j) local[3 * i + j] += s * l[i] * l[j];
        }
      }
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) triplets[9 * t + 3 * i + j] = {tri[i], tri[j], local[3 * i + j]};
      }
    }
  });
  return SparseMatrix::from_triplets(mesh.num_nodes(), mesh.num_nodes(), std::move(triplets));
}

inline SparseMatrix assemble_mass(const Mesh& mesh, const ScalarField& weight,
                                  const QuadratureRule& rule = default_rule()) {
  return assemble_mass(mesh, ElementQuadrature(mesh, rule).evaluate(weight), rule);
}

/// Load vector int g v_i for g given at the quadrature points of @p rule.
inline Vector assemble_load(const Mesh& mesh, std::span<const double> g_at_points,
                            const QuadratureRule& rule = default_rule()) {
  const std::size_t nq = rule.size();
  if (g_at_points.size() != mesh.num_triangles() * nq) {
    throw std::invalid_argument("assemble_load: field has wrong length");
  }
  Vector b(mesh.num_nodes(), 0.0);
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const double area = mesh.area(t);
    const auto& tri = mesh.triangles[t];
    for (std::size_t q = 0; q < nq; ++q) {
      const double s = 2.0 * area * rule.weights[q] * g_at_points[t * nq + q];
      const auto& l = rule.points[q];
      for (int i = 0; i < 3; ++i) b[tri[i]] += s * l[i];
    }
  }
  return b;
}

inline Vector assemble_load(const Mesh& mesh, const ScalarField& g,
                            const QuadratureRule& rule = default_rule()) {
  return assemble_load(mesh, ElementQuadrature(mesh, rule).evaluate(g), rule);
}

/// Symmetric elimination of homogeneous Dirichlet rows and columns.
inline SparseMatrix eliminate_dirichlet(const SparseMatrix& a, const std::vector<bool>& boundary) {
  TripletList t;
  t.reserve(a.nonzeros());
  const auto rp = a.row_ptr();
  const auto ci = a.col_idx();
  const auto v = a.values();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    if (boundary[i]) {
      t.push_back({static_cast<int>(i), static_cast<int>(i), 1.0});
      continue;
    }
    for (int k = rp[i]; k < rp[i + 1]; ++k) {
      if (!boundary[ci[k]]) t.push_back({static_cast<int>(i), ci[k], v[k]});
    }
  }
  return SparseMatrix::from_triplets(a.rows(), a.cols(), std::move(t));
}

/// Zeroes the entries of @p v on boundary nodes.
inline void zero_boundary(std::span<double> v, const std::vector<bool>& boundary) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (boundary[i]) v[i] = 0.0;
  }
}

/// Applies y = 0 on the boundary: boundary rows become identity rows with zero
/// right-hand side and boundary columns are dropped (their contribution to the
/// right-hand side vanishes because the prescribed values are zero).
inline std::pair<SparseMatrix, Vector> apply_dirichlet(const SparseMatrix& a, Vector rhs,
                                                       const Mesh& mesh) {
  zero_boundary(rhs, mesh.boundary_mask);
  return {eliminate_dirichlet(a, mesh.boundary_mask), std::move(rhs)};
}

/// A + s B for matrices of equal shape.
inline SparseMatrix add_scaled(const SparseMatrix& a, const SparseMatrix& b, double s = 1.0) {
  TripletList t;
  t.reserve(a.nonzeros() + b.nonzeros());
  for (const SparseMatrix* m : {&a, &b}) {
    const double scale = m == &a ? 1.0 : s;
    const auto rp = m->row_ptr();
    const auto ci = m->col_idx();
    const auto v = m->values();
    for (std::size_t i = 0; i < m->rows(); ++i) {
      for (int k = rp[i]; k < rp[i + 1]; ++k) t.push_back({static_cast<int>(i), ci[k], scale * v[k]});
    }
  }
  return SparseMatrix::from_triplets(a.rows(), a.cols(), std::move(t));
}

/// ||f_h - exact||_0 for a quadrature-point field.
inline double l2_error(const Mesh& mesh, std::span<const double> values_at_points,
                       const ScalarField& exact, const QuadratureRule& rule = default_rule()) {
  const ElementQuadrature quad(mesh, rule);
  if (values_at_points.size() != quad.size()) {
    throw std::invalid_argument("l2_error: field has wrong length");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < quad.size(); ++i) {
    const double d = values_at_points[i] - exact(quad.points[i].x, quad.points[i].y);
    s += quad.weights[i] * d * d;
  }
  return std::sqrt(s);
}

/// ||f_h - exact||_0 for a P1 function.
inline double l2_error(const Mesh& mesh, const FeFunction& fh, const ScalarField& exact,
                       const QuadratureRule& rule = default_rule()) {
  return l2_error(mesh, evaluate_at_quadrature(mesh, fh.coeffs, rule), exact, rule);
}

}  // namespace mlc
