#pragma once
// Dense reference solver for the discrete optimality system on small meshes.
// It re-derives every discrete operator with Eigen from the mesh geometry and
// a separately transcribed degree-5 rule, so it shares nothing with the
// library beyond node and triangle lists.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "mlc/mesh.hpp"
#include "mlc/problem.hpp"

namespace oracle {

struct QuadPoint {
  int element;
  double x, y, weight;
  std::array<double, 3> bary;
};

struct System {
  const mlc::Mesh* mesh = nullptr;
  Eigen::MatrixXd stiffness;   // full nodal, no boundary handling
  Eigen::MatrixXd mass;
  Eigen::MatrixXd eval;        // quad points x nodes
  Eigen::MatrixXd load;        // nodes x quad points, load(i, q) = w_q phi_i(x_q)
  Eigen::VectorXd f, yd, lower, upper;  // at quad points
  std::vector<QuadPoint> points;
  std::vector<int> interior;
  double alpha = 1.0;
  std::function<double(double)> phi, dphi;
};

// Dunavant degree-5 rule (weights normalized to 1).
inline std::vector<std::pair<std::array<double, 3>, double>> dunavant5() {
  const double a1 = 0.101286507323456338800987361915123;
  const double b1 = 0.797426985353087322398025276169754;
  const double a2 = 0.470142064105115089770441209513447;
  const double b2 = 0.059715871789769820459117580973106;
  const double w1 = 0.125939180544827152595683945500181;
  const double w2 = 0.132394152788506180737649387833153;
  return {{{1.0 / 3, 1.0 / 3, 1.0 / 3}, 0.225},
          {{a1, a1, b1}, w1}, {{a1, b1, a1}, w1}, {{b1, a1, a1}, w1},
          {{a2, a2, b2}, w2}, {{a2, b2, a2}, w2}, {{b2, a2, a2}, w2}};
}

inline System build(const mlc::Mesh& mesh, const mlc::OcpProblem& prob) {
  const int n = static_cast<int>(mesh.num_nodes());
  System s;
  s.mesh = &mesh;
  s.alpha = prob.alpha;
  if (prob.nonlinearity) {
    s.phi = prob.nonlinearity->phi;
    s.dphi = prob.nonlinearity->dphi;
  }
  s.stiffness = Eigen::MatrixXd::Zero(n, n);
  s.mass = Eigen::MatrixXd::Zero(n, n);
  const auto rule = dunavant5();
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    Eigen::Matrix3d coords;
    for (int v = 0; v < 3; ++v) {
      coords(v, 0) = 1.0;
      coords(v, 1) = mesh.nodes[tri[v]].x;
      coords(v, 2) = mesh.nodes[tri[v]].y;
    }
    const double area = 0.5 * std::abs(coords.determinant());
    // Rows 1,2 of the inverse hold the constant basis gradients.
    const Eigen::Matrix3d inv = coords.inverse();
    const Eigen::Matrix<double, 2, 3> grad = inv.bottomRows<2>();
    const Eigen::Matrix3d ke = area * grad.transpose() * grad;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        s.stiffness(tri[i], tri[j]) += ke(i, j);
        s.mass(tri[i], tri[j]) += area / 12.0 * (i == j ? 2.0 : 1.0);
      }
    }
    for (const auto& [bary, w] : rule) {
      QuadPoint q{static_cast<int>(t), 0.0, 0.0, area * w, bary};
      for (int v = 0; v < 3; ++v) {
        q.x += bary[v] * mesh.nodes[tri[v]].x;
        q.y += bary[v] * mesh.nodes[tri[v]].y;
      }
      s.points.push_back(q);
    }
  }
  const int nq = static_cast<int>(s.points.size());
  s.eval = Eigen::MatrixXd::Zero(nq, n);
  s.load = Eigen::MatrixXd::Zero(n, nq);
  s.f.resize(nq);
  s.yd.resize(nq);
  s.lower.resize(nq);
  s.upper.resize(nq);
  for (int q = 0; q < nq; ++q) {
    const auto& pt = s.points[q];
    const auto& tri = mesh.triangles[pt.element];
    for (int v = 0; v < 3; ++v) {
      s.eval(q, tri[v]) = pt.bary[v];
      s.load(tri[v], q) = pt.weight * pt.bary[v];
    }
    s.f[q] = prob.f(pt.x, pt.y);
    s.yd[q] = prob.y_d(pt.x, pt.y);
    s.lower[q] = prob.lower(pt.x, pt.y);
    s.upper[q] = prob.upper(pt.x, pt.y);
  }
  for (int i = 0; i < n; ++i) {
    if (!mesh.boundary_mask[i]) s.interior.push_back(i);
  }
  return s;
}

struct Solution {
  Eigen::VectorXd u;  // at oracle quad points
  Eigen::VectorXd y;  // nodal
  Eigen::VectorXd p;
  int iterations = 0;
  double residual = 0.0;
};

// Restricts a nodal system to interior nodes and solves it densely.
inline Eigen::VectorXd solve_interior(const System& s, const Eigen::MatrixXd& a,
                                      const Eigen::VectorXd& rhs) {
  const int ni = static_cast<int>(s.interior.size());
  Eigen::MatrixXd ai(ni, ni);
  Eigen::VectorXd bi(ni);
  for (int i = 0; i < ni; ++i) {
    bi[i] = rhs[s.interior[i]];
    for (int j = 0; j < ni; ++j) ai(i, j) = a(s.interior[i], s.interior[j]);
  }
  const Eigen::VectorXd xi = ai.ldlt().solve(bi);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(a.rows());
  for (int i = 0; i < ni; ++i) x[s.interior[i]] = xi[i];
  return x;
}

inline Eigen::MatrixXd weighted_mass(const System& s, const Eigen::VectorXd& w_at_points) {
  return s.load * w_at_points.asDiagonal() * s.eval;
}

inline Eigen::VectorXd project(const System& s, const Eigen::VectorXd& p) {
  const Eigen::VectorXd target = -(s.eval * p) / s.alpha;
  return target.cwiseMax(s.lower).cwiseMin(s.upper);
}

inline double l2(const System& s, const Eigen::VectorXd& v_at_points) {
  double sum = 0.0;
  for (int q = 0; q < v_at_points.size(); ++q) sum += s.points[q].weight * v_at_points[q] * v_at_points[q];
  return std::sqrt(sum);
}

// Exact (dense Newton) solve of K y + (phi(y), v) = (f + u, v).
inline Eigen::VectorXd state(const System& s, const Eigen::VectorXd& u, const Eigen::VectorXd& y0) {
  const Eigen::VectorXd rhs = s.load * (s.f + u);
  if (!s.phi) return solve_interior(s, s.stiffness, rhs);
  Eigen::VectorXd y = y0;
  for (int it = 0; it < 100; ++it) {
    const Eigen::VectorXd yq = s.eval * y;
    const Eigen::VectorXd phi = yq.unaryExpr(s.phi);
    const Eigen::VectorXd dphi = yq.unaryExpr(s.dphi);
    Eigen::VectorXd r = s.stiffness * y + s.load * phi - rhs;
    for (int i = 0; i < r.size(); ++i) {
      if (s.mesh->boundary_mask[i]) r[i] = 0.0;
    }
    if (r.norm() < 1e-15 * std::max(1.0, rhs.norm())) return y;
    const Eigen::VectorXd dy = solve_interior(s, s.stiffness + weighted_mass(s, dphi), -r);
    y += dy;
    if (dy.norm() < 1e-16 * std::max(1.0, y.norm())) return y;
  }
  return y;
}

inline Eigen::VectorXd adjoint(const System& s, const Eigen::VectorXd& y) {
  Eigen::MatrixXd a = s.stiffness;
  if (s.dphi) a += weighted_mass(s, (s.eval * y).unaryExpr(s.dphi));
  return solve_interior(s, a, s.mass * y - s.load * s.yd);
}

// Fixed point u <- P(-p(u)/alpha) with exact state and adjoint solves.
inline Solution solve(const System& s, double tol = 1e-12, int max_iterations = 1000) {
  Solution out;
  out.u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.points.size()))
              .cwiseMax(s.lower)
              .cwiseMin(s.upper);
  out.y = Eigen::VectorXd::Zero(s.stiffness.rows());
  for (out.iterations = 0; out.iterations < max_iterations; ++out.iterations) {
    out.y = state(s, out.u, out.y);
    out.p = adjoint(s, out.y);
    const Eigen::VectorXd next = project(s, out.p);
    out.residual = l2(s, next - out.u);
    out.u = next;
    if (out.residual <= tol) {
      out.y = state(s, out.u, out.y);
      out.p = adjoint(s, out.y);
      return out;
    }
  }
  throw std::runtime_error("oracle fixed point did not converge");
}

// Index map from oracle quadrature points to library quadrature points
// (matched by coordinates within each element).
inline std::vector<int> match_points(const System& s, const std::vector<mlc::Point>& library_points,
                                     std::size_t per_element) {
  std::vector<int> map(s.points.size(), -1);
  for (std::size_t q = 0; q < s.points.size(); ++q) {
    const auto& pt = s.points[q];
    for (std::size_t k = 0; k < per_element; ++k) {
      const std::size_t idx = pt.element * per_element + k;
      const auto& lp = library_points[idx];
      if (std::abs(lp.x - pt.x) < 1e-12 && std::abs(lp.y - pt.y) < 1e-12) {
        map[q] = static_cast<int>(idx);
        break;
      }
    }
    if (map[q] < 0) throw std::runtime_error("oracle: quadrature points do not match");
  }
  return map;
}

}  // namespace oracle
