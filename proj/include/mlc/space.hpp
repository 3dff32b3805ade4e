#pragma once
/**
 * @file space.hpp
 * @brief Discrete spaces in which state and adjoint equations are solved.
 *
 * A SolveSpace represents a subspace of the P1 space on one fine level. It
 * solves Galerkin problems a(y, v) + (w y, v) = <load, v> for all v in the
 * subspace, where load is a fine-level dual vector and the optional reaction
 * weight w is set from a state through set_reaction(). Results are always
 * returned as fine-level nodal vectors.
 */

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mlc/fem.hpp"
#include "mlc/mesh.hpp"
#include "mlc/multigrid.hpp"

namespace mlc {

/// Level-wise matrices and quadrature, computed once per hierarchy level.
struct LevelData {
  const Mesh* mesh = nullptr;
  ElementQuadrature quadrature;
  SparseMatrix stiffness;
  SparseMatrix mass;
};

/// Lazily built per-level data, multigrid stacks and composite prolongations
/// for one mesh hierarchy. The hierarchy must outlive the object.
class Discretization {
 public:
  explicit Discretization(const MeshHierarchy& hierarchy, MgSettings mg = {})
      : hierarchy_(&hierarchy), mg_settings_(mg), levels_(hierarchy.num_levels()) {}

  [[nodiscard]] const MeshHierarchy& hierarchy() const { return *hierarchy_; }
  [[nodiscard]] const Mesh& mesh(int level) const { return hierarchy_->levels.at(level); }
  [[nodiscard]] int num_levels() const { return hierarchy_->num_levels(); }
  [[nodiscard]] const MgSettings& mg_settings() const { return mg_settings_; }

  const LevelData& level(int l) {
    auto& slot = levels_.at(l);
    if (!slot) {
      auto data = std::make_unique<LevelData>();
      data->mesh = &mesh(l);
      data->quadrature = ElementQuadrature(mesh(l), default_rule());
      data->stiffness = assemble_stiffness(mesh(l));
      data->mass = assemble_mass(mesh(l));
      slot = std::move(data);
    }
    return *slot;
  }

  /// Poisson multigrid stack with top level @p l.
  const MgOperatorStack& poisson(int l) {
    auto it = stacks_.find(l);
    if (it == stacks_.end()) {
      std::vector<SparseMatrix> ops;
      for (int k = 0; k <= l; ++k) ops.push_back(level(k).stiffness);
      it = stacks_.emplace(l, std::make_unique<MgOperatorStack>(*hierarchy_, std::move(ops),
                                                                mg_settings_))
               .first;
    }
    return *it->second;
  }

  /// Nodal interpolation from level @p coarse to level @p fine (composite of
  /// the consecutive prolongations; identity when the levels coincide).
  const SparseMatrix& transfer(int coarse, int fine) {
    if (coarse > fine) throw std::invalid_argument("transfer: coarse level above fine level");
    const auto key = std::make_pair(coarse, fine);
    auto it = transfers_.find(key);
    if (it == transfers_.end()) {
      SparseMatrix p = SparseMatrix::identity(mesh(coarse).num_nodes());
      for (int l = coarse; l < fine; ++l) p = hierarchy_->prolongations[l].matrix * p;
      it = transfers_.emplace(key, std::move(p)).first;
    }
    return it->second;
  }

  /// Prolongs a nodal vector from level @p coarse to level @p fine.
  Vector prolong(std::span<const double> v, int coarse, int fine) {
    Vector out(v.begin(), v.end());
    for (int l = coarse; l < fine; ++l) out = hierarchy_->prolongations[l].matrix * out;
    return out;
  }

 private:
  const MeshHierarchy* hierarchy_;
  MgSettings mg_settings_;
  std::vector<std::unique_ptr<LevelData>> levels_;
  std::map<int, std::unique_ptr<MgOperatorStack>> stacks_;
  std::map<std::pair<int, int>, SparseMatrix> transfers_;
};

struct SpaceCounters {
  int solves = 0;
  int mg_cycles = 0;
};

class SolveSpace {
 public:
  virtual ~SolveSpace() = default;

  [[nodiscard]] virtual int level() const = 0;
  [[nodiscard]] virtual const LevelData& data() const = 0;
  [[nodiscard]] const Mesh& mesh() const { return *data().mesh; }

  /// Galerkin solution in the space; @p guess may be empty.
  virtual Vector solve(std::span<const double> load, std::span<const double> guess) = 0;

  /// Sets the reaction weight w = weight(state(x)) for subsequent solves.
  virtual void set_reaction(std::span<const double> state,
                            const std::function<double(double)>& weight) = 0;
  virtual void clear_reaction() = 0;

  /// Euclidean norm of a fine-level dual vector restricted to the space.
  [[nodiscard]] virtual double dual_norm(std::span<const double> dual) const = 0;

  [[nodiscard]] const SpaceCounters& counters() const { return counters_; }
  void reset_counters() { counters_ = {}; }

 protected:
  SpaceCounters counters_;
};

/// The full P1 space of one hierarchy level, solved by multigrid.
class LevelSpace final : public SolveSpace {
 public:
  /// Solves stop once ||b - A x|| <= relative_tolerance * ||b||.
  LevelSpace(Discretization& disc, int level, double relative_tolerance = 1e-11)
      : disc_(&disc), level_(level), data_(&disc.level(level)), rel_tol_(relative_tolerance) {}

  [[nodiscard]] int level() const override { return level_; }
  [[nodiscard]] const LevelData& data() const override { return *data_; }

  void set_relative_tolerance(double tol) { rel_tol_ = tol; }

  Vector solve(std::span<const double> load, std::span<const double> guess) override {
    Vector b(load.begin(), load.end());
    zero_boundary(b, mesh().boundary_mask);
    ++counters_.solves;
    const double bnorm = norm2(b);
    if (bnorm == 0.0) return Vector(b.size(), 0.0);
    const MgOperatorStack& stack = reaction_ ? *reaction_ : disc_->poisson(level_);
    auto result = mg_solve(stack, b, rel_tol_ * bnorm, guess);
    counters_.mg_cycles += result.iterations;
    return std::move(result.x);
  }

  void set_reaction(std::span<const double> state,
                    const std::function<double(double)>& weight) override {
    reaction_ = std::make_unique<MgOperatorStack>(
        reaction_stack(disc_->hierarchy(), level_, state, weight, disc_->mg_settings()));
  }

  void clear_reaction() override { reaction_.reset(); }

  [[nodiscard]] double dual_norm(std::span<const double> dual) const override {
    double s = 0.0;
    for (std::size_t i = 0; i < dual.size(); ++i) {
      if (!mesh().boundary_mask[i]) s += dual[i] * dual[i];
    }
    return std::sqrt(s);
  }

 private:
  Discretization* disc_;
  int level_;
  const LevelData* data_;
  double rel_tol_;
  std::unique_ptr<MgOperatorStack> reaction_;
};

}  // namespace mlc
