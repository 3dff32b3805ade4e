#pragma once
/**
 * @file study.hpp
 * @brief Manufactured benchmark problems with closed-form optimal triples,
 *        convergence studies (direct vs multilevel correction) and the CSV
 *        tables they produce.
 */

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mlc/correction.hpp"
#include "mlc/mesh.hpp"
#include "mlc/ocp.hpp"
#include "mlc/problem.hpp"

namespace mlc {

namespace detail {

inline double sin_sin(double x, double y) {
  return std::sin(std::numbers::pi * x) * std::sin(std::numbers::pi * y);
}

}  // namespace detail

inline const std::vector<std::string>& builtin_example_names() {
  static const std::vector<std::string> names = {"linear-ex1", "semilinear-ex2"};
  return names;
}

/// Registry of the two benchmark problems on the unit square. Both have the
/// optimal state y = sin(pi x1) sin(pi x2) and adjoint p = -2 pi^2 alpha y.
///
///  linear-ex1:     -Delta y = f + u,        a = -1, b = 1, alpha = 0.1
///  semilinear-ex2: -Delta y + y^3 = f + u,  a =  0, b = 3, alpha = 0.01
inline OcpProblem builtin_example(const std::string& name) {
  using std::numbers::pi;
  using detail::sin_sin;
  const double pi2 = pi * pi;
  const double pi4 = pi2 * pi2;
  OcpProblem prob;
  prob.name = name;
  if (name == "linear-ex1") {
    static constexpr double a = -1.0;
    static constexpr double b = 1.0;
    static constexpr double alpha = 0.1;
    auto g = [pi2](double x, double y) { return 2.0 * pi2 * sin_sin(x, y); };
    prob.alpha = alpha;
    prob.lower = [](double, double) { return a; };
    prob.upper = [](double, double) { return b; };
    prob.f = [g](double x, double y) {
      const double gv = g(x, y);
      return gv < a ? gv - a : (gv > b ? gv - b : 0.0);
    };
    prob.y_d = [pi4](double x, double y) { return sin_sin(x, y) + 4.0 * pi4 * alpha * sin_sin(x, y); };
    ExactSolution ex;
    ex.u = [g](double x, double y) { return std::clamp(g(x, y), a, b); };
    ex.y = sin_sin;
    ex.p = [pi2](double x, double y) { return -2.0 * pi2 * alpha * sin_sin(x, y); };
    ex.neg_laplace_y = [pi2](double x, double y) { return 2.0 * pi2 * sin_sin(x, y); };
    ex.neg_laplace_p = [pi4](double x, double y) { return -4.0 * pi4 * alpha * sin_sin(x, y); };
    prob.exact = ex;
  } else if (name == "semilinear-ex2") {
    static constexpr double a = 0.0;
    static constexpr double b = 3.0;
    static constexpr double alpha = 0.01;
    auto g1 = [pi2](double x, double y) { return 2.0 * pi2 * sin_sin(x, y); };
    auto g2 = [](double x, double y) { return std::pow(sin_sin(x, y), 3); };
    prob.alpha = alpha;
    prob.lower = [](double, double) { return a; };
    prob.upper = [](double, double) { return b; };
    prob.nonlinearity = Nonlinearity::cubic();
    prob.f = [g1, g2](double x, double y) {
      const double v1 = g1(x, y);
      const double v2 = g2(x, y);
      return v1 < a ? v1 + v2 - a : (v1 > b ? v1 + v2 - b : v2);
    };
    prob.y_d = [pi2, pi4](double x, double y) {
      const double s = sin_sin(x, y);
      const double p = -2.0 * pi2 * alpha * s;
      return s - 3.0 * s * s * p + 4.0 * pi4 * alpha * s;
    };
    ExactSolution ex;
    ex.u = [g1](double x, double y) { return std::clamp(g1(x, y), a, b); };
    ex.y = sin_sin;
    ex.p = [pi2](double x, double y) { return -2.0 * pi2 * alpha * sin_sin(x, y); };
    ex.neg_laplace_y = [pi2](double x, double y) { return 2.0 * pi2 * sin_sin(x, y); };
    ex.neg_laplace_p = [pi4](double x, double y) { return -4.0 * pi4 * alpha * sin_sin(x, y); };
    prob.exact = ex;
  } else {
    throw std::invalid_argument("unknown example '" + name + "'");
  }
  return prob;
}

struct OptimalityResiduals {
  double state = 0.0;
  double adjoint = 0.0;
  double projection = 0.0;

  [[nodiscard]] double max() const { return std::max({state, adjoint, projection}); }
};

/// Pointwise residuals of the continuous optimality system at a point.
inline OptimalityResiduals optimality_residuals(const OcpProblem& prob, double x, double y) {
  if (!prob.exact) throw std::invalid_argument("optimality_residuals: problem has no exact solution");
  const auto& ex = *prob.exact;
  const double ys = ex.y(x, y);
  const double ps = ex.p(x, y);
  const double us = ex.u(x, y);
  const double phi = prob.nonlinearity ? prob.nonlinearity->phi(ys) : 0.0;
  const double dphi = prob.nonlinearity ? prob.nonlinearity->dphi(ys) : 0.0;
  OptimalityResiduals r;
  r.state = std::abs(ex.neg_laplace_y(x, y) + phi - prob.f(x, y) - us);
  r.adjoint = std::abs(ex.neg_laplace_p(x, y) + dphi * ps - (ys - prob.y_d(x, y)));
  r.projection =
      std::abs(us - std::clamp(-ps / prob.alpha, prob.lower(x, y), prob.upper(x, y)));
  return r;
}

/// Largest optimality residual over @p samples random interior points.
inline double max_optimality_residual(const OcpProblem& prob, int samples = 100,
                                      unsigned long long seed = 20240101ULL) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double x = dist(rng);
    const double y = dist(rng);
    worst = std::max(worst, optimality_residuals(prob, x, y).max());
  }
  return worst;
}

/// log(e_coarse / e_fine) / log(beta); empty when either error is not positive.
inline std::optional<double> compute_order(double e_coarse, double e_fine, int beta) {
  if (!(e_coarse > 0.0) || !(e_fine > 0.0) || beta < 2) return std::nullopt;
  return std::log(e_coarse / e_fine) / std::log(static_cast<double>(beta));
}

struct StudyRecord {
  int level = 0;
  std::size_t dofs = 0;
  double err_u = 0.0;
  double err_y = 0.0;
  double err_p = 0.0;
  std::optional<double> order_u;
  std::optional<double> order_y;
  std::optional<double> order_p;
};

enum class StudyMethod { direct, mlc };

struct StudyConfig {
  std::string example = "linear-ex1";
  int base_m = 4;
  int beta = 2;
  int n_levels = 5;
  StudyMethod method = StudyMethod::direct;
  DiagonalPattern pattern = DiagonalPattern::right_diagonal;
  CorrectionConfig correction;
};

struct StudyResult {
  std::vector<StudyRecord> records;
  CorrectionReport report;
};

/// L2 errors of a triple against the problem's exact solution.
inline StudyRecord measure_errors(const OcpProblem& prob, const Mesh& mesh,
                                  const SolutionTriple& triple) {
  if (!prob.exact) throw std::invalid_argument("measure_errors: problem has no exact solution");
  StudyRecord r;
  r.level = triple.y.level;
  r.dofs = mesh.num_nodes();
  r.err_u = l2_error(mesh, triple.u.values, prob.exact->u);
  r.err_y = l2_error(mesh, triple.y, prob.exact->y);
  r.err_p = l2_error(mesh, triple.p, prob.exact->p);
  return r;
}

inline void fill_orders(std::vector<StudyRecord>& records, int beta) {
  for (std::size_t i = 1; i < records.size(); ++i) {
    records[i].order_u = compute_order(records[i - 1].err_u, records[i].err_u, beta);
    records[i].order_y = compute_order(records[i - 1].err_y, records[i].err_y, beta);
    records[i].order_p = compute_order(records[i - 1].err_p, records[i].err_p, beta);
  }
}

/// Runs a study on an existing discretization.
inline StudyResult run_study(Discretization& disc, const OcpProblem& prob, StudyMethod method,
                             const CorrectionConfig& cfg) {
  StudyResult result;
  if (method == StudyMethod::direct) {
    for (int l = cfg.first_level; l < disc.num_levels(); ++l) {
      LevelRecord rec;
      SolutionTriple t;
      try {
        t = solve_level(disc, l, prob, cfg, &rec);
      } catch (const std::exception& e) {
        throw LevelError(l, e.what());
      }
      result.report.levels.push_back(rec);
      result.records.push_back(measure_errors(prob, disc.mesh(l), t));
    }
  } else {
    auto [final_triple, report] =
        multilevel_solve(disc, prob, cfg, [&](int level, const SolutionTriple& t) {
          result.records.push_back(measure_errors(prob, disc.mesh(level), t));
        });
    result.report = std::move(report);
  }
  fill_orders(result.records, disc.hierarchy().beta);
  return result;
}

inline StudyResult run_study(const StudyConfig& cfg) {
  const OcpProblem prob = builtin_example(cfg.example);
  const MeshHierarchy hierarchy =
      build_hierarchy(generate_unit_square(cfg.base_m, cfg.pattern), cfg.beta, cfg.n_levels);
  Discretization disc(hierarchy);
  return run_study(disc, prob, cfg.method, cfg.correction);
}

namespace detail {

inline std::string format_error(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.5e", v);
  return buf;
}

inline std::string format_order(const std::optional<double>& v) {
  if (!v) return {};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

}  // namespace detail

inline constexpr const char* study_table_header = "dofs,err_u,order_u,err_y,order_y,err_p,order_p";

inline void write_table(std::ostream& out, const std::vector<StudyRecord>& records) {
  if (records.empty()) throw std::invalid_argument("write_table: no records");
  out << study_table_header << '\n';
  for (const auto& r : records) {
    out << r.dofs << ',' << detail::format_error(r.err_u) << ',' << detail::format_order(r.order_u)
        << ',' << detail::format_error(r.err_y) << ',' << detail::format_order(r.order_y) << ','
        << detail::format_error(r.err_p) << ',' << detail::format_order(r.order_p) << '\n';
  }
}

inline void write_table(const std::string& path, const std::vector<StudyRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open table file for writing: " + path);
  write_table(out, records);
  if (!out) throw std::runtime_error("failed writing table file: " + path);
}

inline void write_table_ndjson(std::ostream& out, const std::vector<StudyRecord>& records) {
  for (const auto& r : records) {
    nlohmann::json j = {{"dofs", r.dofs}, {"err_u", r.err_u}, {"err_y", r.err_y}, {"err_p", r.err_p}};
    j["order_u"] = r.order_u ? nlohmann::json(*r.order_u) : nlohmann::json(nullptr);
    j["order_y"] = r.order_y ? nlohmann::json(*r.order_y) : nlohmann::json(nullptr);
    j["order_p"] = r.order_p ? nlohmann::json(*r.order_p) : nlohmann::json(nullptr);
    out << j.dump() << '\n';
  }
}

inline void write_table_ndjson(const std::string& path, const std::vector<StudyRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open table file for writing: " + path);
  write_table_ndjson(out, records);
}

inline std::vector<StudyRecord> read_table(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != study_table_header) {
    throw std::runtime_error("read_table: missing or unexpected header");
  }
  std::vector<StudyRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (cells.size() != 7) throw std::runtime_error("read_table: malformed row '" + line + "'");
    auto order = [](const std::string& s) -> std::optional<double> {
      if (s.empty()) return std::nullopt;
      return std::stod(s);
    };
    StudyRecord r;
    r.level = static_cast<int>(records.size());
    r.dofs = std::stoull(cells[0]);
    r.err_u = std::stod(cells[1]);
    r.order_u = order(cells[2]);
    r.err_y = std::stod(cells[3]);
    r.order_y = order(cells[4]);
    r.err_p = std::stod(cells[5]);
    r.order_p = order(cells[6]);
    records.push_back(r);
  }
  return records;
}

inline std::vector<StudyRecord> read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open table file: " + path);
  return read_table(in);
}

}  // namespace mlc
