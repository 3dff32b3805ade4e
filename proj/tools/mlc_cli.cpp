// Command-line driver: direct solves, multilevel correction runs, convergence
// studies and the registry self-check.
//
// Exit codes: 0 success, 1 check failed, 2 usage error, 3 invalid
// configuration, 4 solver failure, 5 I/O error.

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "mlc/mlc.hpp"

namespace {

enum Exit : int {
  exit_ok = 0,
  exit_check_failed = 1,
  exit_usage = 2,
  exit_config = 3,
  exit_solver = 4,
  exit_io = 5,
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string example = "linear-ex1";
  int base_m = 4;
  int beta = 2;
  int levels = 5;
  std::string pattern = "right-diagonal";
  std::string method = "direct";
  std::optional<int> level;
  std::optional<double> alpha;
  std::optional<double> lower;
  std::optional<double> upper;

  mlc::CorrectionConfig correction;
  mlc::MgSettings mg;
  std::string mg_tol_level = "fine";
  std::string initial_guess = "projected-adjoint";

  std::string out;
  std::string ndjson;
  std::string report;
  std::string mesh_dump;
  unsigned threads = 1;
  unsigned long long seed = 20240101ULL;
  int samples = 100;
};

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("mlc");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  const char* env = std::getenv("MLC_LOG");
  const std::string level = env ? env : "info";
  if (level == "quiet") {
    spdlog::set_level(spdlog::level::off);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    spdlog::set_level(spdlog::level::info);
    if (level != "info") spdlog::warn("MLC_LOG='{}' not recognized, using info", level);
  }
}

void add_options(CLI::App& app, RunConfig& c) {
  app.add_option("--example", c.example, "Built-in problem: linear-ex1 | semilinear-ex2")
      ->capture_default_str();
  app.add_option("--base-m", c.base_m, "Subdivisions per side of the initial mesh")
      ->capture_default_str();
  app.add_option("--beta", c.beta, "Refinement factor between levels")->capture_default_str();
  app.add_option("--levels", c.levels, "Number of meshes in the hierarchy")->capture_default_str();
  app.add_option("--pattern", c.pattern, "Initial mesh: right-diagonal | criss-cross")
      ->capture_default_str();
  app.add_option("--method", c.method, "Study method: direct | mlc")->capture_default_str();
  app.add_option("--level", c.level, "Level for `solve` (default: finest)");
  app.add_option("--alpha", c.alpha, "Override the regularization weight");
  app.add_option("--lower", c.lower, "Override the lower control bound (constant)");
  app.add_option("--upper", c.upper, "Override the upper control bound (constant)");

  auto& cc = c.correction;
  app.add_option("--c-mg", cc.c_mg, "Multigrid stop: ||r|| <= c_mg h^2 ||b||")->capture_default_str();
  app.add_option("--mg-tol-level", c.mg_tol_level, "Mesh size in the MG stop: coarse | fine")
      ->capture_default_str();
  app.add_option("--tol-opt", cc.tol_opt_factor, "Optimizer tolerance factor (tol = f h^2)")
      ->capture_default_str();
  app.add_option("--newton-tol", cc.sqp.newton_tol, "Newton tolerance (0: 1e-3 * optimizer tol)")
      ->capture_default_str();
  app.add_option("--level-solver-tol", cc.level_solver_tol,
                 "Relative MG tolerance inside full-level optimizers")
      ->capture_default_str();
  app.add_option("--coarse-level", cc.coarse_space_level, "Hierarchy level of V_H")
      ->capture_default_str();
  app.add_option("--first-level", cc.first_level, "Level solved directly before corrections")
      ->capture_default_str();
  app.add_option("--initial-guess", c.initial_guess,
                 "Augmented-space start: projected-adjoint | previous-control")
      ->capture_default_str();
  app.add_option("--pre-sweeps", c.mg.pre_sweeps, "Gauss-Seidel pre-smoothing sweeps")
      ->capture_default_str();
  app.add_option("--post-sweeps", c.mg.post_sweeps, "Gauss-Seidel post-smoothing sweeps")
      ->capture_default_str();
  app.add_option("--max-cycles", c.mg.max_cycles, "V-cycle cap per solve")->capture_default_str();
  app.add_option("--pg-max-iter", cc.sqp.pg.max_iterations, "Projected-gradient iteration cap")
      ->capture_default_str();
  app.add_option("--sqp-max-iter", cc.sqp.max_iterations, "SQP iteration cap")
      ->capture_default_str();
  app.add_option("--sqp-inner-fraction", cc.sqp.inner_fraction,
                 "Inner solve tolerance as a fraction of the SQP tolerance")
      ->capture_default_str();

  app.add_option("--out", c.out, "Error table (CSV)");
  app.add_option("--ndjson", c.ndjson, "Error table mirror (NDJSON)");
  app.add_option("--report", c.report, "Per-level diagnostics (CSV, or NDJSON for *.ndjson)");
  app.add_option("--mesh-dump", c.mesh_dump, "Write the finest mesh in text format");
  app.add_option("--threads", c.threads, "Threads for element assembly")->capture_default_str();
  app.add_option("--seed", c.seed, "Seed for the random points of `check`")->capture_default_str();
  app.add_option("--samples", c.samples, "Random points used by `check`")->capture_default_str();
}

/// Validates @p c and returns every problem found in one message.
void validate(const RunConfig& c, const std::string& command) {
  std::vector<std::string> issues;
  const auto& names = mlc::builtin_example_names();
  if (std::find(names.begin(), names.end(), c.example) == names.end()) {
    issues.push_back("unknown example '" + c.example + "'");
  }
  if (command == "check") {
    if (c.samples < 1) issues.push_back("--samples must be >= 1");
  } else {
    if (c.base_m < 1) issues.push_back("--base-m must be >= 1");
    if (c.beta < 2) issues.push_back("--beta must be >= 2");
    if (c.levels < 1) issues.push_back("--levels must be >= 1");
    if (c.pattern != "right-diagonal" && c.pattern != "criss-cross") {
      issues.push_back("--pattern must be right-diagonal or criss-cross");
    }
    if (c.method != "direct" && c.method != "mlc") issues.push_back("--method must be direct or mlc");
    if (c.level && (*c.level < 0 || *c.level >= c.levels)) {
      issues.push_back("--level must lie in [0, levels)");
    }
    if (c.alpha && !(*c.alpha > 0.0)) issues.push_back("--alpha must be positive");
    if (c.lower && c.upper && !(*c.lower < *c.upper)) issues.push_back("--lower must be below --upper");
    const auto& cc = c.correction;
    if (!(cc.c_mg > 0.0)) issues.push_back("--c-mg must be positive");
    if (!(cc.tol_opt_factor > 0.0)) issues.push_back("--tol-opt must be positive");
    if (cc.sqp.newton_tol < 0.0) issues.push_back("--newton-tol must be nonnegative");
    if (!(cc.level_solver_tol > 0.0)) issues.push_back("--level-solver-tol must be positive");
    if (c.mg_tol_level != "coarse" && c.mg_tol_level != "fine") {
      issues.push_back("--mg-tol-level must be coarse or fine");
    }
    if (c.initial_guess != "projected-adjoint" && c.initial_guess != "previous-control") {
      issues.push_back("--initial-guess must be projected-adjoint or previous-control");
    }
    if (cc.first_level < 0 || cc.first_level >= c.levels) {
      issues.push_back("--first-level must lie in [0, levels)");
    }
    if (cc.coarse_space_level < 0 || cc.coarse_space_level > cc.first_level) {
      issues.push_back("--coarse-level must lie in [0, first-level]");
    }
    if (c.mg.pre_sweeps < 0 || c.mg.post_sweeps < 0 || c.mg.pre_sweeps + c.mg.post_sweeps == 0) {
      issues.push_back("smoothing sweeps must be nonnegative and not both zero");
    }
    if (c.mg.max_cycles < 1) issues.push_back("--max-cycles must be >= 1");
    if (cc.sqp.pg.max_iterations < 1) issues.push_back("--pg-max-iter must be >= 1");
    if (cc.sqp.max_iterations < 1) issues.push_back("--sqp-max-iter must be >= 1");
    if (!(cc.sqp.inner_fraction > 0.0 && cc.sqp.inner_fraction <= 1.0)) {
      issues.push_back("--sqp-inner-fraction must lie in (0, 1]");
    }
    if (c.threads < 1) issues.push_back("--threads must be >= 1");
    const bool overridden = c.alpha || c.lower || c.upper;
    if (command == "study" && overridden) {
      issues.push_back("study needs the exact solution; --alpha/--lower/--upper are not allowed");
    }
    if (command == "study" && c.out.empty() && c.ndjson.empty()) {
      issues.push_back("study needs --out or --ndjson");
    }
  }
  if (!issues.empty()) {
    std::string msg = "invalid configuration: ";
    for (std::size_t i = 0; i < issues.size(); ++i) msg += (i ? "; " : "") + issues[i];
    throw ConfigError(msg);
  }
}

mlc::OcpProblem make_problem(const RunConfig& c) {
  mlc::OcpProblem prob = mlc::builtin_example(c.example);
  if (c.alpha) prob.alpha = *c.alpha;
  if (c.lower) prob.lower = [v = *c.lower](double, double) { return v; };
  if (c.upper) prob.upper = [v = *c.upper](double, double) { return v; };
  if (c.alpha || c.lower || c.upper) {
    // The closed-form triple belongs to the unmodified data.
    prob.exact.reset();
    try {
      prob.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("invalid configuration: ") + e.what());
    }
  }
  return prob;
}

mlc::CorrectionConfig correction_config(const RunConfig& c) {
  mlc::CorrectionConfig cc = c.correction;
  cc.mg_tol_level =
      c.mg_tol_level == "coarse" ? mlc::MgToleranceLevel::coarse : mlc::MgToleranceLevel::fine;
  cc.initial_guess = c.initial_guess == "previous-control" ? mlc::InitialGuess::previous_control
                                                           : mlc::InitialGuess::projected_adjoint;
  return cc;
}

mlc::MeshHierarchy make_hierarchy(const RunConfig& c) {
  const auto pattern = c.pattern == "criss-cross" ? mlc::DiagonalPattern::criss_cross
                                                  : mlc::DiagonalPattern::right_diagonal;
  auto h = mlc::build_hierarchy(mlc::generate_unit_square(c.base_m, pattern), c.beta, c.levels);
  spdlog::info("hierarchy: {} levels, finest {} nodes", h.num_levels(), h.finest().num_nodes());
  if (!c.mesh_dump.empty()) {
    try {
      mlc::write_mesh(c.mesh_dump, h.finest());
    } catch (const std::exception& e) {
      throw IoError(e.what());
    }
  }
  return h;
}

template <class F>
void write_output(F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    throw IoError(e.what());
  }
}

void emit_tables(const RunConfig& c, const std::vector<mlc::StudyRecord>& records) {
  if (!c.out.empty()) write_output([&] { mlc::write_table(c.out, records); });
  if (!c.ndjson.empty()) write_output([&] { mlc::write_table_ndjson(c.ndjson, records); });
}

void print_triple(const mlc::OcpProblem& prob, const mlc::Mesh& mesh, const mlc::SolutionTriple& t) {
  std::printf("level %d, %zu nodes\n", t.y.level, mesh.num_nodes());
  std::printf("kkt_residual %.6e\n", mlc::kkt_residual(t, prob, mesh));
  if (prob.exact) {
    const auto r = mlc::measure_errors(prob, mesh, t);
    std::printf("err_u %.12e\nerr_y %.12e\nerr_p %.12e\n", r.err_u, r.err_y, r.err_p);
  }
}

int run_solve(const RunConfig& c) {
  const auto prob = make_problem(c);
  const auto hierarchy = make_hierarchy(c);
  mlc::Discretization disc(hierarchy, c.mg);
  const int level = c.level.value_or(hierarchy.num_levels() - 1);
  mlc::CorrectionReport report;
  mlc::LevelRecord rec;
  const auto triple = mlc::solve_level(disc, level, prob, correction_config(c), &rec);
  report.levels.push_back(rec);
  print_triple(prob, disc.mesh(level), triple);
  if (prob.exact) emit_tables(c, {mlc::measure_errors(prob, disc.mesh(level), triple)});
  if (!c.report.empty()) write_output([&] { mlc::write_report(c.report, report); });
  return exit_ok;
}

int run_mlc(const RunConfig& c) {
  const auto prob = make_problem(c);
  const auto hierarchy = make_hierarchy(c);
  mlc::Discretization disc(hierarchy, c.mg);
  std::vector<mlc::StudyRecord> records;
  const auto [triple, report] =
      mlc::multilevel_solve(disc, prob, correction_config(c), [&](int level, const mlc::SolutionTriple& t) {
        spdlog::debug("level {} done", level);
        if (prob.exact) records.push_back(mlc::measure_errors(prob, disc.mesh(level), t));
      });
  mlc::fill_orders(records, c.beta);
  print_triple(prob, hierarchy.finest(), triple);
  if (spdlog::get_level() <= spdlog::level::info) {
    mlc::print_work_summary(std::cerr, mlc::work_report(report));
  }
  if (prob.exact) emit_tables(c, records);
  if (!c.report.empty()) write_output([&] { mlc::write_report(c.report, report); });
  return exit_ok;
}

int run_study(const RunConfig& c) {
  const auto prob = make_problem(c);
  const auto hierarchy = make_hierarchy(c);
  mlc::Discretization disc(hierarchy, c.mg);
  const auto method = c.method == "mlc" ? mlc::StudyMethod::mlc : mlc::StudyMethod::direct;
  const auto result = mlc::run_study(disc, prob, method, correction_config(c));
  mlc::write_table(std::cout, result.records);
  emit_tables(c, result.records);
  if (!c.report.empty()) write_output([&] { mlc::write_report(c.report, result.report); });
  return exit_ok;
}

int run_check(const RunConfig& c) {
  const auto prob = mlc::builtin_example(c.example);
  const double worst = mlc::max_optimality_residual(prob, c.samples, c.seed);
  std::printf("%s: max optimality residual %.3e over %d points\n", c.example.c_str(), worst,
              c.samples);
  return worst <= 1e-10 ? exit_ok : exit_check_failed;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  RunConfig cfg;
  CLI::App app{"Multilevel correction solver for box-constrained elliptic optimal control"};
  app.footer(
      "Options may be given before or after the subcommand, or in a flat key=value\n"
      "file passed with --config (keys are long option names without dashes,\n"
      "e.g. base-m=4). Command-line flags override the file.\n"
      "Environment: MLC_LOG=quiet|info|debug.");
  app.set_config("--config", "", "Read options from an INI-style file");
  app.config_formatter(std::make_shared<CLI::ConfigINI>());
  app.require_subcommand(1);
  add_options(app, cfg);
  auto* solve = app.add_subcommand("solve", "Direct solve on one level");
  auto* mlc_cmd = app.add_subcommand("mlc", "Multilevel correction run over the hierarchy");
  auto* study = app.add_subcommand("study", "Convergence study with error tables");
  auto* check = app.add_subcommand("check", "Check the built-in exact solutions");
  for (auto* sub : {solve, mlc_cmd, study, check}) {
    sub->fallthrough();
    sub->footer("Run `mlc --help` for the full option list.");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_usage;
  }

  std::string command = solve->parsed() ? "solve" : mlc_cmd->parsed() ? "mlc"
                        : study->parsed() ? "study" : "check";
  try {
    validate(cfg, command);
    mlc::set_assembly_threads(cfg.threads);
    if (command == "solve") return run_solve(cfg);
    if (command == "mlc") return run_mlc(cfg);
    if (command == "study") return run_study(cfg);
    return run_check(cfg);
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return exit_config;
  } catch (const IoError& e) {
    spdlog::error("i/o error: {}", e.what());
    return exit_io;
  } catch (const std::exception& e) {
    spdlog::error("solver failure: {}", e.what());
    return exit_solver;
  }
}
