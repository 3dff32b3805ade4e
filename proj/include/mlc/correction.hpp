#pragma once
/**
 * @file correction.hpp
 * @brief Multilevel correction: one correction step lifting a level-k optimum
 *        to level k+1, and the driver that runs it over a hierarchy.
 *
 * One step solves the state and adjoint boundary value problems on level k+1
 * by multigrid (from the level-k control and state), and then re-optimizes
 * in the augmented space V_H + span{y_hat} + span{p_hat}.
 */

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mlc/augmented.hpp"
#include "mlc/multigrid.hpp"
#include "mlc/ocp.hpp"
#include "mlc/space.hpp"

namespace mlc {

enum class MgToleranceLevel { coarse, fine };
enum class InitialGuess { projected_adjoint, previous_control };

struct CorrectionConfig {
  /// Level of V_H in the hierarchy.
  int coarse_space_level = 0;
  /// Level solved directly before the corrections start.
  int first_level = 0;
  /// Multigrid stops at ||r|| <= c_mg * h^2 * ||b||.
  double c_mg = 0.1;
  MgToleranceLevel mg_tol_level = MgToleranceLevel::fine;
  /// Optimizer tolerance on level k is tol_opt_factor * h_k^2.
  double tol_opt_factor = 0.01;
  InitialGuess initial_guess = InitialGuess::projected_adjoint;
  /// Relative residual of the multigrid solves inside full-level optimizers.
  double level_solver_tol = 1e-11;
  SqpOptions sqp;

  [[nodiscard]] double tol_opt(double h) const { return tol_opt_factor * h * h; }
};

struct LevelRecord {
  int level = 0;
  std::size_t dofs = 0;
  bool direct = false;
  int mg_cycles_state = 0;
  int mg_cycles_adjoint = 0;
  /// MG cycles spent inside the optimizer (direct levels only).
  int mg_cycles_optimizer = 0;
  int opt_iters = 0;
  long long projection_evals = 0;
  std::size_t augmented_dim = 0;
  double kkt_residual = 0.0;
  double wall_ms = 0.0;
};

struct CorrectionReport {
  std::vector<LevelRecord> levels;
};

class LevelError : public std::runtime_error {
 public:
  LevelError(int lvl, const std::string& what)
      : std::runtime_error("level " + std::to_string(lvl) + ": " + what), level(lvl) {}
  int level;
};

namespace detail {

inline double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

inline int optimizer_iterations(const SolveDiagnostics& d) {
  return d.opt_iterations + d.sqp_iterations;
}

}  // namespace detail

/// Direct optimization on one full level.
inline SolutionTriple solve_level(Discretization& disc, int level, const OcpProblem& problem,
                                  const CorrectionConfig& cfg, LevelRecord* record = nullptr) {
  const auto start = std::chrono::steady_clock::now();
  LevelSpace space(disc, level, cfg.level_solver_tol);
  const double tol = cfg.tol_opt(disc.mesh(level).mesh_size_h);
  SolutionTriple triple = direct_solve(problem, space, tol, cfg.sqp);
  if (record) {
    record->level = level;
    record->dofs = disc.mesh(level).num_nodes();
    record->direct = true;
    record->mg_cycles_optimizer = space.counters().mg_cycles;
    record->opt_iters = detail::optimizer_iterations(triple.diagnostics);
    record->projection_evals = static_cast<long long>(triple.diagnostics.projections) *
                               static_cast<long long>(space.data().quadrature.size());
    record->kkt_residual = triple.diagnostics.kkt_residual;
    record->wall_ms = detail::elapsed_ms(start);
  }
  return triple;
}

/// Lifts @p current (an approximation on level k) to level k+1.
inline SolutionTriple correction_step(Discretization& disc, const SolutionTriple& current,
                                      const OcpProblem& problem, const CorrectionConfig& cfg,
                                      LevelRecord* record = nullptr) {
  const auto start = std::chrono::steady_clock::now();
  const int k = current.y.level;
  const int fine = k + 1;
  if (fine >= disc.num_levels()) throw std::invalid_argument("correction_step: no finer level");
  if (cfg.coarse_space_level < 0 || cfg.coarse_space_level > fine) {
    throw std::invalid_argument("correction_step: coarse space level out of range");
  }
  const LevelData& data = disc.level(fine);
  const Mesh& mesh = *data.mesh;
  const DiscreteProblem dp(problem, data);
  const double h_fine = mesh.mesh_size_h;
  const double h_mg =
      cfg.mg_tol_level == MgToleranceLevel::fine ? h_fine : disc.mesh(k).mesh_size_h;

  // Level-k functions are exact on level k+1; the control is re-evaluated on
  // the finer quadrature points through its pointwise projection formula.
  const Vector y_prev = disc.prolong(current.y.coeffs, k, fine);
  const Vector p_prev = disc.prolong(current.p.coeffs, k, fine);
  const Vector u_prev =
      project_control(evaluate_at_quadrature(mesh, p_prev), problem.alpha, dp.lower, dp.upper);

  auto mg = [&](const MgOperatorStack& stack, Vector b, std::span<const double> guess, int& cycles) {
    zero_boundary(b, mesh.boundary_mask);
    const double bnorm = norm2(b);
    if (bnorm == 0.0) return Vector(b.size(), 0.0);
    auto result = mg_solve(stack, b, cfg.c_mg * h_mg * h_mg * bnorm, guess);
    cycles = result.iterations;
    return std::move(result.x);
  };

  LevelRecord rec;
  try {
    // Step 1: state boundary value problem driven by the level-k control.
    Vector state_load = assemble_load(mesh, u_prev);
    axpy(1.0, dp.f_load, state_load);
    if (problem.nonlinearity) {
      axpy(-1.0, detail::nonlinear_load(mesh, y_prev, problem.nonlinearity->phi), state_load);
    }
    const Vector y_hat = mg(disc.poisson(fine), std::move(state_load), y_prev, rec.mg_cycles_state);

    // Step 2: adjoint boundary value problem driven by y_hat.
    Vector adjoint_load = data.mass * y_hat;
    axpy(-1.0, dp.yd_load, adjoint_load);
    Vector p_hat;
    if (problem.nonlinearity) {
      const MgOperatorStack stack = reaction_stack(disc.hierarchy(), fine, y_hat,
                                                   problem.nonlinearity->dphi, disc.mg_settings());
      p_hat = mg(stack, std::move(adjoint_load), p_prev, rec.mg_cycles_adjoint);
    } else {
      p_hat = mg(disc.poisson(fine), std::move(adjoint_load), p_prev, rec.mg_cycles_adjoint);
    }

    // Step 3: optimization in V_H + span{y_hat} + span{p_hat}.
    AugmentedSpace space(disc, cfg.coarse_space_level, fine, y_hat, p_hat);
    ControlField u0{fine, cfg.initial_guess == InitialGuess::projected_adjoint
                              ? project_control(evaluate_at_quadrature(mesh, p_hat),
                                                problem.alpha, dp.lower, dp.upper)
                              : u_prev};
    const double tol = cfg.tol_opt(h_fine);
    SolutionTriple out;
    if (problem.is_linear()) {
      out = pg_solve(problem, space, u0, tol, cfg.sqp.pg);
    } else {
      SolutionTriple guess{u0, {fine, y_hat}, {fine, p_hat}, {}};
      out = sqp_solve(problem, space, guess, tol, cfg.sqp);
    }

    rec.level = fine;
    rec.dofs = mesh.num_nodes();
    rec.opt_iters = detail::optimizer_iterations(out.diagnostics);
    rec.projection_evals = static_cast<long long>(out.diagnostics.projections + 2) *
                           static_cast<long long>(data.quadrature.size());
    rec.augmented_dim = space.dimension();
    rec.kkt_residual = out.diagnostics.kkt_residual;
    rec.wall_ms = detail::elapsed_ms(start);
    if (record) *record = rec;
    return out;
  } catch (const LevelError&) {
    throw;
  } catch (const std::exception& e) {
    throw LevelError(fine, e.what());
  }
}

/// Called with each level's triple as soon as it is available.
using LevelObserver = std::function<void(int level, const SolutionTriple&)>;

/// Direct solve on cfg.first_level followed by one correction step per finer
/// level of the hierarchy.
inline std::pair<SolutionTriple, CorrectionReport> multilevel_solve(
    Discretization& disc, const OcpProblem& problem, const CorrectionConfig& cfg,
    const LevelObserver& observer = {}) {
  if (cfg.first_level < 0 || cfg.first_level >= disc.num_levels()) {
    throw std::invalid_argument("multilevel_solve: first level out of range");
  }
  if (cfg.coarse_space_level > cfg.first_level) {
    throw std::invalid_argument("multilevel_solve: V_H must not be finer than the first level");
  }
  CorrectionReport report;
  SolutionTriple triple;
  {
    LevelRecord rec;
    try {
      triple = solve_level(disc, cfg.first_level, problem, cfg, &rec);
    } catch (const std::exception& e) {
      throw LevelError(cfg.first_level, e.what());
    }
    report.levels.push_back(rec);
    if (observer) observer(cfg.first_level, triple);
  }
  for (int k = cfg.first_level; k + 1 < disc.num_levels(); ++k) {
    LevelRecord rec;
    triple = correction_step(disc, triple, problem, cfg, &rec);
    report.levels.push_back(rec);
    if (observer) observer(k + 1, triple);
  }
  return {std::move(triple), std::move(report)};
}

struct WorkRatio {
  int from_level = 0;
  int to_level = 0;
  double dofs = 0.0;
  double mg_cycles = 0.0;
  double wall = 0.0;
};

struct WorkSummary {
  std::vector<LevelRecord> levels;
  std::vector<WorkRatio> ratios;
  long long total_mg_cycles = 0;
  long long total_opt_iters = 0;
  long long total_projection_evals = 0;
  double total_wall_ms = 0.0;
};

inline WorkSummary work_report(const CorrectionReport& report) {
  WorkSummary s;
  s.levels = report.levels;
  for (std::size_t i = 0; i < report.levels.size(); ++i) {
    const auto& r = report.levels[i];
    s.total_mg_cycles += r.mg_cycles_state + r.mg_cycles_adjoint + r.mg_cycles_optimizer;
    s.total_opt_iters += r.opt_iters;
    s.total_projection_evals += r.projection_evals;
    s.total_wall_ms += r.wall_ms;
    if (i == 0) continue;
    const auto& prev = report.levels[i - 1];
    auto ratio = [](double a, double b) { return b > 0.0 ? a / b : 0.0; };
    s.ratios.push_back({prev.level, r.level,
                        ratio(static_cast<double>(r.dofs), static_cast<double>(prev.dofs)),
                        ratio(r.mg_cycles_state + r.mg_cycles_adjoint,
                              prev.mg_cycles_state + prev.mg_cycles_adjoint),
                        ratio(r.wall_ms, prev.wall_ms)});
  }
  return s;
}

inline void print_work_summary(std::ostream& out, const WorkSummary& s) {
  out << "level  dofs      mg_state mg_adj  opt_iters  aug_dim  wall_ms\n";
  for (const auto& r : s.levels) {
    out << std::setw(5) << r.level << "  " << std::setw(8) << r.dofs << "  " << std::setw(8)
        << r.mg_cycles_state << " " << std::setw(6) << r.mg_cycles_adjoint << "  " << std::setw(9)
        << r.opt_iters << "  " << std::setw(7) << r.augmented_dim << "  " << std::fixed
        << std::setprecision(2) << r.wall_ms << (r.direct ? "  (direct)" : "") << '\n';
    out.unsetf(std::ios::floatfield);
  }
  for (const auto& q : s.ratios) {
    out << "ratio " << q.from_level << "->" << q.to_level << ": dofs " << std::setprecision(4)
        << q.dofs << ", wall " << q.wall << '\n';
  }
}

inline void write_report_csv(std::ostream& out, const CorrectionReport& report) {
  out << "level,dofs,mg_cycles_state,mg_cycles_adjoint,opt_iters,wall_ms\n";
  for (const auto& r : report.levels) {
    std::ostringstream ms;
    ms << std::fixed << std::setprecision(3) << r.wall_ms;
    out << r.level << ',' << r.dofs << ',' << r.mg_cycles_state << ',' << r.mg_cycles_adjoint << ','
        << r.opt_iters << ',' << ms.str() << '\n';
  }
}

inline void write_report_ndjson(std::ostream& out, const CorrectionReport& report) {
  for (const auto& r : report.levels) {
    nlohmann::json j = {{"level", r.level},
                        {"dofs", r.dofs},
                        {"mg_cycles_state", r.mg_cycles_state},
                        {"mg_cycles_adjoint", r.mg_cycles_adjoint},
                        {"opt_iters", r.opt_iters},
                        {"wall_ms", r.wall_ms}};
    out << j.dump() << '\n';
  }
}

/// Writes CSV, or NDJSON when @p path ends in ".ndjson".
inline void write_report(const std::string& path, const CorrectionReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open diagnostics file: " + path);
  if (path.size() >= 7 && path.compare(path.size() - 7, 7, ".ndjson") == 0) {
    write_report_ndjson(out, report);
  } else {
    write_report_csv(out, report);
  }
  if (!out) throw std::runtime_error("failed writing diagnostics file: " + path);
}

}  // namespace mlc
