#pragma once
/**
 * @file ocp.hpp
 * @brief Variational discretization of the control, projected-gradient
 *        optimization, Newton solves of the semilinear state equation and
 *        the SQP outer loop.
 *
 * Controls are never given a finite element basis. They are stored by value
 * at the quadrature points of the level's 7-point rule, which is where they
 * enter every load integral.
 */

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mlc/fem.hpp"
#include "mlc/problem.hpp"
#include "mlc/space.hpp"

namespace mlc {

struct ControlField {
  int level = 0;
  Vector values;  // values[element * 7 + q]
};

struct SolveDiagnostics {
  int opt_iterations = 0;
  int newton_steps = 0;
  int sqp_iterations = 0;
  int mg_cycles = 0;
  int projections = 0;
  double kkt_residual = 0.0;
  std::vector<double> residual_history;
};

struct SolutionTriple {
  ControlField u;
  FeFunction y;
  FeFunction p;
  SolveDiagnostics diagnostics;
};

class OptimizationError : public std::runtime_error {
 public:
  OptimizationError(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), residual_history(std::move(history)) {}
  std::vector<double> residual_history;
};

struct PgOptions {
  int max_iterations = 500;
  /// Consecutive residual increases tolerated before giving up.
  int max_increases = 5;
};

struct NewtonOptions {
  int max_steps = 50;
  int max_halvings = 30;
};

struct SqpOptions {
  int max_iterations = 50;
  /// Inner projected-gradient tolerance as a fraction of the SQP tolerance.
  double inner_fraction = 0.1;
  PgOptions pg;
  NewtonOptions newton;
  /// Newton tolerance for the state; zero means 1e-3 * tol.
  double newton_tol = 0.0;
};

/// Problem data evaluated on the quadrature points of one level.
struct DiscreteProblem {
  const OcpProblem* problem = nullptr;
  const LevelData* data = nullptr;
  Vector f_load;
  Vector yd_load;
  Vector yd_points;
  Vector lower;
  Vector upper;

  DiscreteProblem(const OcpProblem& p, const LevelData& level) : problem(&p), data(&level) {
    const auto& quad = level.quadrature;
    const Vector f_points = quad.evaluate(p.f);
    yd_points = quad.evaluate(p.y_d);
    lower = quad.evaluate(p.lower);
    upper = quad.evaluate(p.upper);
    f_load = assemble_load(*level.mesh, f_points);
    yd_load = assemble_load(*level.mesh, yd_points);
  }

  [[nodiscard]] const Mesh& mesh() const { return *data->mesh; }
  [[nodiscard]] const ElementQuadrature& quad() const { return data->quadrature; }
};

/// Pointwise min(b, max(a, -p/alpha)) at quadrature points.
inline Vector project_control(std::span<const double> p_at_points, double alpha,
                              std::span<const double> lower, std::span<const double> upper) {
  if (!(alpha > 0.0)) throw std::invalid_argument("project_control: alpha must be positive");
  Vector u(p_at_points.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    u[i] = std::min(upper[i], std::max(lower[i], -p_at_points[i] / alpha));
  }
  return u;
}

/// P_{U_ad}(-p/alpha) for a P1 adjoint on its level's mesh.
inline ControlField project_control(const FeFunction& p, const OcpProblem& problem,
                                    const Mesh& mesh) {
  const ElementQuadrature quad(mesh, default_rule());
  return {p.level, project_control(evaluate_at_quadrature(mesh, p.coeffs), problem.alpha,
                                   quad.evaluate(problem.lower), quad.evaluate(problem.upper))};
}

inline ControlField project_control(const FeFunction& p, const DiscreteProblem& dp) {
  return {p.level, project_control(evaluate_at_quadrature(dp.mesh(), p.coeffs),
                                   dp.problem->alpha, dp.lower, dp.upper)};
}

/// ||u - P_{U_ad}(-p/alpha)||_0
inline double kkt_residual(const SolutionTriple& triple, const OcpProblem& problem,
                           const Mesh& mesh) {
  if (triple.u.level != triple.p.level) throw std::invalid_argument("kkt_residual: level mismatch");
  const ElementQuadrature quad(mesh, default_rule());
  const Vector target = project_control(triple.p, problem, mesh).values;
  return quad.l2_norm(triple.u.values - target);
}

namespace detail {

/// Fixed-point / projected-gradient iteration for a linear-quadratic problem
/// whose state operator is whatever the space currently holds (Poisson, or
/// Poisson plus a frozen reaction term). @p state_shift is added to the state
/// load and is used for linearizations of the semilinear state equation.
inline SolutionTriple fixed_point_solve(const DiscreteProblem& dp, SolveSpace& space, Vector u,
                                        double tol, std::span<const double> state_shift,
                                        const PgOptions& options, Vector y_guess = {},
                                        Vector p_guess = {}) {
  if (!(tol > 0.0)) throw std::invalid_argument("pg_solve: tolerance must be positive");
  const Mesh& mesh = dp.mesh();
  const double alpha = dp.problem->alpha;
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = std::clamp(u[i], dp.lower[i], dp.upper[i]);

  auto state = [&](std::span<const double> control, std::span<const double> guess) {
    Vector load = assemble_load(mesh, control);
    axpy(1.0, dp.f_load, load);
    if (!state_shift.empty()) axpy(1.0, state_shift, load);
    return space.solve(load, guess);
  };
  auto adjoint = [&](std::span<const double> y, std::span<const double> guess) {
    Vector load = dp.data->mass * y;
    axpy(-1.0, dp.yd_load, load);
    return space.solve(load, guess);
  };

  SolutionTriple out;
  const int mg_before = space.counters().mg_cycles;
  Vector y = state(u, y_guess);
  Vector p = adjoint(y, p_guess);
  auto& diag = out.diagnostics;
  bool damped = false;
  int increases = 0;
  for (int it = 0;; ++it) {
    Vector target = project_control(evaluate_at_quadrature(mesh, p), alpha, dp.lower, dp.upper);
    ++diag.projections;
    Vector direction = target - u;
    const double residual = dp.quad().l2_norm(direction);
    diag.residual_history.push_back(residual);
    if (residual <= tol) {
      diag.opt_iterations = it;
      diag.kkt_residual = residual;
      break;
    }
    if (it > 0 && residual > diag.residual_history[diag.residual_history.size() - 2]) {
      damped = true;
      if (++increases >= options.max_increases) {
        throw OptimizationError("pg_solve: residual increased in " + std::to_string(increases) +
                                    " consecutive iterations (non-contraction)",
                                diag.residual_history);
      }
    } else {
      increases = 0;
    }
    if (it >= options.max_iterations) {
      std::ostringstream msg;
      msg << "pg_solve: no convergence after " << it << " iterations, residual " << residual;
      throw OptimizationError(msg.str(), diag.residual_history);
    }
    if (!damped) {
      u = std::move(target);
      y = state(u, y);
    } else {
      // The reduced objective is quadratic along the projected direction, so
      // the minimizing step is exact; comparing objective values instead
      // stalls once their differences reach roundoff.
      const Vector grad = evaluate_at_quadrature(mesh, p);
      double slope = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) {
        slope += dp.quad().weights[i] * (alpha * u[i] + grad[i]) * direction[i];
      }
      const Vector dy = space.solve(assemble_load(mesh, direction), {});
      const double curvature = dot(dy, dp.data->mass * dy) + alpha * std::pow(residual, 2);
      const double step = std::clamp(-slope / curvature, 0.0, 1.0);
      axpy(step, direction, u);
      axpy(step, dy, y);
    }
    p = adjoint(y, p);
  }
  diag.mg_cycles = space.counters().mg_cycles - mg_before;
  out.u = {space.level(), std::move(u)};
  out.y = {space.level(), std::move(y)};
  out.p = {space.level(), std::move(p)};
  return out;
}

/// Load vector of phi(y_h).
inline Vector nonlinear_load(const Mesh& mesh, std::span<const double> y,
                             const std::function<double(double)>& phi) {
  Vector values = evaluate_at_quadrature(mesh, y);
  for (double& v : values) v = phi(v);
  return assemble_load(mesh, values);
}

}  // namespace detail

/// Projected-gradient solve of a linear-quadratic problem in @p space.
inline SolutionTriple pg_solve(const OcpProblem& problem, SolveSpace& space, const ControlField& u0,
                               double tol, const PgOptions& options = {}) {
  if (!problem.is_linear()) throw std::invalid_argument("pg_solve: problem is semilinear");
  const DiscreteProblem dp(problem, space.data());
  space.clear_reaction();
  return detail::fixed_point_solve(dp, space, u0.values, tol, {}, options);
}

struct NewtonResult {
  FeFunction y;
  int steps = 0;
  double residual = 0.0;
  /// Residual norm before each step and after the last one.
  std::vector<double> history;
};

/// Newton's method for a(y, v) + (phi(y), v) = (f + u, v) in @p space.
/// Leaves the reaction weight phi'(y) of the final iterate set on the space.
inline NewtonResult newton_state_solve(const OcpProblem& problem, const ControlField& u,
                                       SolveSpace& space, const FeFunction& y0, double tol,
                                       const NewtonOptions& options = {}) {
  if (!problem.nonlinearity) throw std::invalid_argument("newton_state_solve: problem is linear");
  const auto& nl = *problem.nonlinearity;
  const LevelData& data = space.data();
  const Mesh& mesh = *data.mesh;
  Vector rhs = assemble_load(mesh, u.values);
  axpy(1.0, assemble_load(mesh, data.quadrature.evaluate(problem.f)), rhs);

  auto residual_of = [&](std::span<const double> y) {
    Vector r = data.stiffness * y;
    axpy(1.0, detail::nonlinear_load(mesh, y, nl.phi), r);
    axpy(-1.0, rhs, r);
    return r;
  };

  NewtonResult result;
  Vector y = y0.coeffs.empty() ? Vector(mesh.num_nodes(), 0.0) : y0.coeffs;
  Vector r = residual_of(y);
  double norm = space.dual_norm(r);
  result.history.push_back(norm);
  while (true) {
    if (norm <= tol) break;
    if (result.steps >= options.max_steps) {
      throw ConvergenceError("newton_state_solve: no convergence after " +
                                 std::to_string(result.steps) + " steps",
                             norm);
    }
    space.set_reaction(y, nl.dphi);
    for (double& v : r) v = -v;
    const Vector delta = space.solve(r, {});
    double step = 1.0;
    Vector trial(y.size());
    Vector r_trial;
    double trial_norm = 0.0;
    for (int h = 0;; ++h) {
      for (std::size_t i = 0; i < y.size(); ++i) trial[i] = y[i] + step * delta[i];
      r_trial = residual_of(trial);
      trial_norm = space.dual_norm(r_trial);
      if (trial_norm <= (1.0 - 1e-4 * step) * norm || trial_norm <= tol) break;
      if (h >= options.max_halvings) {
        throw ConvergenceError("newton_state_solve: line search failed after " +
                                   std::to_string(options.max_halvings) + " halvings",
                               norm);
      }
      step *= 0.5;
    }
    y = std::move(trial);
    r = std::move(r_trial);
    norm = trial_norm;
    result.history.push_back(norm);
    ++result.steps;
  }
  space.set_reaction(y, nl.dphi);
  result.y = {space.level(), std::move(y)};
  result.residual = norm;
  return result;
}

/// SQP for the semilinear problem: linearize phi about the current state,
/// solve the linear-quadratic subproblem by projected gradients (reaction
/// phi'(y) frozen, phi'' term dropped), then update the state by Newton.
/// Stops once the projection residual of the nonlinear optimality system
/// is below @p tol.
inline SolutionTriple sqp_solve(const OcpProblem& problem, SolveSpace& space,
                                const SolutionTriple& start, double tol,
                                const SqpOptions& options = {}) {
  if (!problem.nonlinearity) throw std::invalid_argument("sqp_solve: problem is linear");
  if (!(tol > 0.0)) throw std::invalid_argument("sqp_solve: tolerance must be positive");
  if (start.u.level != space.level()) throw std::invalid_argument("sqp_solve: start on wrong level");
  const auto& nl = *problem.nonlinearity;
  const DiscreteProblem dp(problem, space.data());
  const Mesh& mesh = dp.mesh();
  const double newton_tol = options.newton_tol > 0.0 ? options.newton_tol : 1e-3 * tol;
  const int mg_before = space.counters().mg_cycles;

  SolutionTriple out;
  auto& diag = out.diagnostics;
  Vector u = start.u.values;
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = std::clamp(u[i], dp.lower[i], dp.upper[i]);

  auto newton = [&](const Vector& control, const Vector& guess) {
    auto res = newton_state_solve(problem, {space.level(), control}, space, {space.level(), guess},
                                  newton_tol, options.newton);
    diag.newton_steps += res.steps;
    return std::move(res.y.coeffs);
  };
  auto adjoint = [&](std::span<const double> y, std::span<const double> guess) {
    Vector load = dp.data->mass * y;
    axpy(-1.0, dp.yd_load, load);
    return space.solve(load, guess);
  };

  Vector y = newton(u, start.y.coeffs);
  Vector p = adjoint(y, start.p.coeffs);
  for (int it = 0;; ++it) {
    const Vector target =
        project_control(evaluate_at_quadrature(mesh, p), problem.alpha, dp.lower, dp.upper);
    ++diag.projections;
    const double kkt = dp.quad().l2_norm(target - u);
    diag.residual_history.push_back(kkt);
    if (kkt <= tol) {
      diag.sqp_iterations = it;
      diag.kkt_residual = kkt;
      break;
    }
    if (it >= options.max_iterations) {
      std::ostringstream msg;
      msg << "sqp_solve: no convergence after " << it << " iterations, residual " << kkt;
      throw OptimizationError(msg.str(), diag.residual_history);
    }
    // Reaction phi'(y) is already set on the space by the Newton solve.
    Vector w = evaluate_at_quadrature(mesh, y);
    for (double& v : w) v = nl.dphi(v);
    Vector shift = assemble_mass(mesh, w) * y;
    axpy(-1.0, detail::nonlinear_load(mesh, y, nl.phi), shift);
    auto inner = detail::fixed_point_solve(dp, space, u, options.inner_fraction * tol, shift,
                                           options.pg, y, p);
    diag.opt_iterations += inner.diagnostics.opt_iterations;
    diag.projections += inner.diagnostics.projections;
    u = std::move(inner.u.values);
    y = newton(u, inner.y.coeffs);
    p = adjoint(y, inner.p.coeffs);
  }
  diag.mg_cycles = space.counters().mg_cycles - mg_before;
  out.u = {space.level(), std::move(u)};
  out.y = {space.level(), std::move(y)};
  out.p = {space.level(), std::move(p)};
  return out;
}

/// Default starting triple: u = P(0), y = p = 0.
inline SolutionTriple zero_start(const OcpProblem& problem, const SolveSpace& space) {
  const DiscreteProblem dp(problem, space.data());
  SolutionTriple s;
  const Vector zeros(dp.quad().size(), 0.0);
  s.u = {space.level(), project_control(zeros, problem.alpha, dp.lower, dp.upper)};
  s.y = {space.level(), Vector(space.mesh().num_nodes(), 0.0)};
  s.p = s.y;
  return s;
}

/// Direct solve on @p space: pg_solve for linear problems, sqp_solve otherwise.
inline SolutionTriple direct_solve(const OcpProblem& problem, SolveSpace& space, double tol,
                                   const SqpOptions& options = {}) {
  const SolutionTriple start = zero_start(problem, space);
  if (problem.is_linear()) return pg_solve(problem, space, start.u, tol, options.pg);
  return sqp_solve(problem, space, start, tol, options);
}

}  // namespace mlc
