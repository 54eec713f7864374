#pragma once

// Zero-boundary Dirichlet problem for the discrete Monge-Ampere measure:
// find convex u with u = 0 on the boundary nodes and cell areas equal to the
// prescribed nodal masses.
//
// The default path is a damped Newton iteration on the active nodes (positive
// target mass). Cell areas are differentiable in the node values with an
// explicit sparse Jacobian read off the cell edges, and its negative is
// symmetric positive definite, so each step is one sparse LDLT solve. When
// Newton cannot make progress, Perron lowering from u = 0 takes over: nodes are
// visited in mesh order and each is lowered by bisection until its own cell
// carries its target mass.

#include "maeigen/error.hpp"
#include "maeigen/node_function.hpp"
#include "maeigen/pl_convex.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <optional>
#include <vector>

namespace maeigen::dirichlet {

struct SolverConfig {
  double mass_tolerance = 1e-8;
  int max_sweeps = 10000;
  double per_node_root_tolerance = 1e-12;
  bool newton_acceleration = true;
  double newton_damping = 1.0;
  double newton_damping_floor = 1.0 / 64.0;
  /// Called after every lowering sweep with the current node values.
  std::function<void(int, std::span<const double>)> sweep_observer;

  void validate() const {
    if (!(mass_tolerance > 0.0))
      throw Error(ErrorCode::ValidationError, "mass_tolerance must be positive");
    if (max_sweeps < 1) throw Error(ErrorCode::ValidationError, "max_sweeps must be at least 1");
    if (!(per_node_root_tolerance > 0.0))
      throw Error(ErrorCode::ValidationError, "per_node_root_tolerance must be positive");
    if (!(newton_damping > 0.0 && newton_damping <= 1.0))
      throw Error(ErrorCode::ValidationError, "newton_damping must lie in (0, 1]");
    if (!(newton_damping_floor > 0.0 && newton_damping_floor <= newton_damping))
      throw Error(ErrorCode::ValidationError, "newton_damping_floor must lie in (0, newton_damping]");
  }
};

struct SolveReport {
  int sweeps_used = 0;
  double final_residual = 0.0;
  bool converged = false;
  int newton_steps = 0;
  int lowering_sweeps = 0;
};

struct SolveResult {
  NodeFunction u;
  SolveReport report;
};

/// Raised when the sweep budget runs out; carries the last iterate.
class SolveFailure : public Error {
 public:
  SolveFailure(SolveReport report, NodeFunction u)
      : Error(ErrorCode::DidNotConverge,
              "residual " + std::to_string(report.final_residual) + " after " +
                  std::to_string(report.sweeps_used) + " sweeps"),
        report_(report),
        u_(std::move(u)) {}
  const SolveReport& report() const { return report_; }
  const NodeFunction& last_iterate() const { return u_; }

 private:
  SolveReport report_;
  NodeFunction u_;
};

inline void validate_measure(const MeshPtr& mesh, const DiscreteMeasure& mu) {
  if (mu.mesh != mesh || mu.mass.size() != mesh->num_interior())
    throw Error(ErrorCode::MeshMismatch, "measure does not live on this mesh");
  for (double m : mu.mass) {
    if (!std::isfinite(m)) throw Error(ErrorCode::NonFiniteMass, "non-finite nodal mass");
    if (m < 0.0) throw Error(ErrorCode::NegativeMass, "negative nodal mass");
  }
  if (!std::isfinite(mu.total())) throw Error(ErrorCode::NonFiniteMass, "total mass overflows");
}

namespace detail {

class Solver {
  static constexpr int kMaxPolish = 8;
  static constexpr double kEps = std::numeric_limits<double>::epsilon();

 public:
  Solver(MeshPtr mesh, const DiscreteMeasure& mu, const SolverConfig& cfg)
      : mesh_(std::move(mesh)), mu_(mu.mass), cfg_(cfg), total_(mu.total()) {
    const std::size_t interior = mesh_->num_interior();
    active_.assign(interior, 0);
    // Masses at rounding level of the total cannot be told apart from zero by
    // any cell-area computation; those nodes are solved as zero-mass nodes.
    const double floor = 64.0 * std::numeric_limits<double>::epsilon() * total_;
    for (std::size_t i = 0; i < interior; ++i)
      if (mu_[i] > floor) {
        active_[i] = 1;
        index_.push_back(static_cast<int>(i));
      } else {
        dropped_ = std::max(dropped_, mu_[i]);
      }
    u_.assign(mesh_->num_nodes(), 0.0);
  }

  SolveResult run(const NodeFunction* warm) {
    if (cfg_.newton_acceleration) {
      // A warm start can sit next to a degenerate configuration where the
      // Jacobian is singular; the bowl start is tried before lowering.
      if (warm && newton(start_point(warm))) return finish();
      if (newton(start_point(nullptr))) return finish();
    }
    lowering();
    return finish();
  }

 private:
  double residual(const pl::CellComplex& cells) const {
    double r = dropped_;
    for (int i : index_) r = std::max(r, std::abs(cells.cells[i].area() - mu_[i]));
    return r / total_;
  }

  void count_sweep() {
    ++report_.sweeps_used;
    if (report_.sweeps_used > cfg_.max_sweeps) {
      report_.sweeps_used = cfg_.max_sweeps;
      throw SolveFailure(report_, NodeFunction(mesh_, u_, false));
    }
  }

  /// Warm start scaled to the target total, or a strictly convex bowl.
  std::optional<std::vector<double>> start_point(const NodeFunction* warm) {
    pl::HullEngine engine(mesh_, active_, true);
    pl::CellComplex cells;
    auto scaled_to_total = [&](std::vector<double> v) -> std::optional<std::vector<double>> {
      if (!engine.evaluate(v, cells)) return std::nullopt;
      double t = 0.0;
      for (int i : index_) {
        if (!(cells.cells[i].area() > 0.0)) return std::nullopt;
        t += cells.cells[i].area();
      }
      const double s = std::sqrt(total_ / t);
      for (double& x : v) x *= s;
      return v;
    };
    if (warm && warm->mesh == mesh_ && warm->has_zero_boundary()) {
      std::vector<double> v(mesh_->num_nodes(), 0.0);
      bool negative = true;
      for (int i : index_) {
        v[i] = warm->values[i];
        negative = negative && v[i] < 0.0;
      }
      if (negative)
        if (auto s = scaled_to_total(std::move(v))) return s;
    }
    const Point2 c = mesh_->domain.centroid();
    double top = 0.0;
    for (const auto& p : mesh_->domain.vertices()) top = std::max(top, dot(p - c, p - c));
    std::vector<double> v(mesh_->num_nodes(), 0.0);
    for (int i : index_) v[i] = dot(mesh_->nodes[i] - c, mesh_->nodes[i] - c) - top;
    return scaled_to_total(std::move(v));
  }

  Eigen::VectorXd mismatch(const pl::CellComplex& cells) const {
    Eigen::VectorXd f(index_.size());
    for (std::size_t k = 0; k < index_.size(); ++k)
      f[k] = cells.cells[index_[k]].area() - mu_[index_[k]];
    return f;
  }

  double min_mass(const pl::CellComplex& cells) const {
    double m = std::numeric_limits<double>::infinity();
    for (int i : index_) m = std::min(m, cells.cells[i].area());
    return m;
  }

  /// Negative Jacobian of the active cell areas with respect to the active values.
  Eigen::SparseMatrix<double> stiffness(const pl::CellComplex& cells) const {
    std::vector<int> pos(mesh_->num_nodes(), -1);
    for (std::size_t k = 0; k < index_.size(); ++k) pos[index_[k]] = static_cast<int>(k);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(index_.size() * 8);
    for (std::size_t k = 0; k < index_.size(); ++k) {
      const int i = index_[k];
      const auto& cell = cells.cells[i];
      const std::size_t m = cell.vertices.size();
      double diag = 0.0;
      for (std::size_t e = 0; e < m; ++e) {
        const int j = cell.labels[e];
        if (j < 0) continue;
        const double len = norm(cell.vertices[(e + 1) % m] - cell.vertices[e]);
        const double coef = len / norm(mesh_->nodes[j] - mesh_->nodes[i]);
        diag += coef;
        if (pos[j] >= 0) trip.emplace_back(static_cast<int>(k), pos[j], -0.5 * coef);
        if (pos[j] >= 0) trip.emplace_back(pos[j], static_cast<int>(k), -0.5 * coef);
      }
      trip.emplace_back(static_cast<int>(k), static_cast<int>(k), diag);
    }
    Eigen::SparseMatrix<double> a(index_.size(), index_.size());
    a.setFromTriplets(trip.begin(), trip.end());
    return a;
  }

  bool newton(std::optional<std::vector<double>> start) {
    if (!start) return false;
    pl::HullEngine engine(mesh_, active_, true);
    pl::CellComplex cells, trial_cells;
    std::vector<double> u = std::move(*start);
    if (!engine.evaluate(u, cells)) return false;
    double min_target = std::numeric_limits<double>::infinity();
    for (int i : index_) min_target = std::min(min_target, mu_[i]);
    const double eps0 = 0.5 * std::min(min_target, min_mass(cells));
    Eigen::VectorXd f = mismatch(cells);
    double res = residual(cells);
    int polish = 0;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
    while (true) {
      if (res <= cfg_.mass_tolerance) {
        if (polish == 0) {
          u_ = u;
          report_.final_residual = res;
          report_.converged = true;
        }
        if (polish >= kMaxPolish || res <= 64.0 * kEps) break;
      }
      ldlt.compute(stiffness(cells));
      if (ldlt.info() != Eigen::Success) break;
      const Eigen::VectorXd d = ldlt.solve(f);
      if (ldlt.info() != Eigen::Success || !d.allFinite()) break;
      const double fnorm = f.norm();
      bool accepted = false;
      std::vector<double> trial(u.size());
      for (double tau = report_.converged ? 1.0 : cfg_.newton_damping; tau >= cfg_.newton_damping_floor;
           tau *= 0.5) {
        trial = u;
        for (std::size_t k = 0; k < index_.size(); ++k) trial[index_[k]] += tau * d[k];
        if (!engine.evaluate(trial, trial_cells)) continue;
        if (min_mass(trial_cells) < eps0) continue;
        const Eigen::VectorXd ft = mismatch(trial_cells);
        if (ft.norm() > (1.0 - 0.5 * tau) * fnorm) continue;
        accepted = true;
        break;
      }
      if (!accepted) break;
      count_sweep();
      ++report_.newton_steps;
      const double res_trial = residual(trial_cells);
      if (report_.converged && res_trial > res) break;  // polishing stalled
      u.swap(trial);
      std::swap(cells, trial_cells);
      f = mismatch(cells);
      res = res_trial;
      if (report_.converged) {
        // Keep polishing only while each step at least halves the residual.
        polish = res_trial <= 0.5 * report_.final_residual ? polish + 1 : kMaxPolish;
        u_ = u;
        report_.final_residual = res;
      }
    }
    return report_.converged;
  }

  double cell_mass(std::size_t i, double t) const {
    return pl::clip_cell(*mesh_, u_, i, t, &active_, 0.0).area();
  }

  void lowering() {
    std::fill(u_.begin(), u_.end(), 0.0);
    const double diam = mesh_->domain.diameter();
    bool tried_newton = !cfg_.newton_acceleration;
    while (true) {
      count_sweep();
      ++report_.lowering_sweeps;
      for (int i : index_) {
        double hi = u_[i];
        if (cell_mass(i, hi) >= mu_[i]) continue;
        double step = std::sqrt(mu_[i]) * diam + cfg_.per_node_root_tolerance;
        double lo = hi - step;
        while (cell_mass(i, lo) < mu_[i]) {
          hi = lo;
          step *= 2.0;
          lo = hi - step;
        }
        while (hi - lo > cfg_.per_node_root_tolerance) {
          const double mid = 0.5 * (lo + hi);
          if (mid <= lo || mid >= hi) break;
          (cell_mass(i, mid) < mu_[i] ? hi : lo) = mid;
        }
        u_[i] = hi;
      }
      if (cfg_.sweep_observer) cfg_.sweep_observer(report_.lowering_sweeps, u_);
      const auto cells = pl::clip_cells(*mesh_, u_, &active_);
      const double res = residual(cells);
      report_.final_residual = res;
      if (res <= cfg_.mass_tolerance) {
        report_.converged = true;
        return;
      }
      if (!tried_newton && res < 100.0 * cfg_.mass_tolerance) {
        tried_newton = true;
        std::vector<double> start = u_;
        const std::vector<double> keep = u_;
        const SolveReport before = report_;
        if (newton(std::move(start))) return;
        u_ = keep;
        const int used = report_.sweeps_used;
        report_ = before;
        report_.sweeps_used = used;
      }
    }
  }

  SolveResult finish() {
    const std::size_t interior = mesh_->num_interior();
    if (index_.size() < interior) {
      // Zero-target nodes take the value of the hull spanned by the others.
      pl::HullEngine engine(mesh_, active_, true);
      pl::CellComplex cells;
      if (engine.evaluate(u_, cells)) {
        for (std::size_t i = 0; i < interior; ++i)
          if (!active_[i]) u_[i] = std::min(0.0, engine.hull_value(mesh_->nodes[i]));
      } else {
        for (std::size_t i = 0; i < interior; ++i)
          if (!active_[i]) u_[i] = 0.0;
        u_ = pl::convex_envelope(NodeFunction(mesh_, u_)).values;
      }
    }
    return {NodeFunction(mesh_, u_, true), report_};
  }

  MeshPtr mesh_;
  std::vector<double> mu_;
  SolverConfig cfg_;
  double total_;
  std::vector<char> active_;
  std::vector<int> index_;
  std::vector<double> u_;
  double dropped_ = 0.0;  // largest target mass solved as zero
  SolveReport report_;
};

}  // namespace detail

/// Solves for the convex u with zero boundary values whose nodal measure is mu.
/// `warm`, when given, seeds the Newton iteration (it is rescaled to the target
/// total mass and ignored if unusable).
inline SolveResult solve_dirichlet(const MeshPtr& mesh, const DiscreteMeasure& mu,
                                   const SolverConfig& cfg = {},
                                   const NodeFunction* warm = nullptr) {
  cfg.validate();
  validate_measure(mesh, mu);
  if (mu.total() == 0.0) return {NodeFunction::zeros(mesh), SolveReport{0, 0.0, true, 0, 0}};
  detail::Solver solver(mesh, mu, cfg);
  return solver.run(warm);
}

}  // namespace maeigen::dirichlet
