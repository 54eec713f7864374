#pragma once

// Inverse iteration: u_{k+1} solves the zero-boundary problem with nodal masses
// R(u_k) |u_k(x_i)|^2 w_i. Iterates are not normalized.

#include "maeigen/dirichlet.hpp"
#include "maeigen/error.hpp"
#include "maeigen/functionals.hpp"
#include "maeigen/node_function.hpp"
#include "maeigen/pl_convex.hpp"

#include <chrono>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace maeigen::iteration {

enum class InitialKind { Cone, Paraboloid, MaxAffine, VanishingAtPoint, Custom };

inline std::string to_string(InitialKind k) {
  switch (k) {
    case InitialKind::Cone: return "cone";
    case InitialKind::Paraboloid: return "paraboloid";
    case InitialKind::MaxAffine: return "max_affine";
    case InitialKind::VanishingAtPoint: return "vanishing";
    case InitialKind::Custom: return "custom";
  }
  return "cone";
}

inline InitialKind initial_kind_from(const std::string& s) {
  if (s == "cone") return InitialKind::Cone;
  if (s == "paraboloid") return InitialKind::Paraboloid;
  if (s == "max_affine") return InitialKind::MaxAffine;
  if (s == "vanishing") return InitialKind::VanishingAtPoint;
  if (s == "custom") return InitialKind::Custom;
  throw Error(ErrorCode::ValidationError, "unknown initial kind '" + s + "'");
}

struct InitialData {
  InitialKind kind = InitialKind::Cone;
  int affine_count = 4;                // MaxAffine: number of planes
  std::optional<Point2> point;         // VanishingAtPoint: target (nearest interior node is used)
  std::vector<double> values;          // Custom: one value per node

  friend bool operator==(const InitialData&, const InitialData&) = default;
};

struct SchemeConfig {
  int max_iterations = 200;
  double rayleigh_rel_tolerance = 1e-8;
  double iterate_sup_tolerance = 1e-8;
  dirichlet::SolverConfig solver;
  InitialData initial;
  bool record_trace = true;
  bool sup_normalize = false;

  void validate() const {
    if (max_iterations < 1) throw Error(ErrorCode::ValidationError, "max_iterations must be >= 1");
    if (!(rayleigh_rel_tolerance > 0.0))
      throw Error(ErrorCode::ValidationError, "rayleigh_rel_tolerance must be positive");
    if (!(iterate_sup_tolerance > 0.0))
      throw Error(ErrorCode::ValidationError, "iterate_sup_tolerance must be positive");
    solver.validate();
    if (initial.kind == InitialKind::MaxAffine && initial.affine_count < 1)
      throw Error(ErrorCode::ValidationError, "affine_count must be >= 1");
  }
};

struct TraceRow {
  int k = 0;
  double rayleigh = 0.0;
  double sup = 0.0;
  double norm = 0.0;
  double energy = 0.0;   // R_k * norm_k^n
  double pairing = 0.0;  // t_k against the final iterate
  double residual = 0.0;
  double wall_ms = 0.0;
};

struct IterationTrace {
  std::vector<TraceRow> rows;
  std::size_t size() const { return rows.size(); }
  const TraceRow& operator[](std::size_t k) const { return rows[k]; }
};

struct SchemeResult {
  NodeFunction u_inf;
  double lambda_estimate = 0.0;
  IterationTrace trace;
  bool converged = false;
  int iterations = 0;
  std::vector<NodeFunction> iterates;  // u_0 .. u_K
};

/// Raised when max_iterations is reached; the partial result stays available.
class SchemeFailure : public Error {
 public:
  explicit SchemeFailure(SchemeResult r)
      : Error(ErrorCode::MaxIterationsExceeded,
              "no convergence after " + std::to_string(r.iterations) + " iterations"),
        result_(std::move(r)) {}
  const SchemeResult& result() const { return result_; }

 private:
  SchemeResult result_;
};

namespace detail {

inline std::size_t nearest_interior(const Mesh& mesh, Point2 z) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < mesh.num_interior(); ++i)
    if (norm(mesh.nodes[i] - z) < norm(mesh.nodes[best] - z)) best = i;
  return best;
}

}  // namespace detail

/// Convex initial guess u_0 with 0 < R(u_0) < infinity.
inline NodeFunction make_initial(const MeshPtr& mesh, const InitialData& init, std::uint64_t seed) {
  const auto& dom = mesh->domain;
  const std::size_t n = mesh->num_nodes();
  std::vector<double> v(n, 0.0);
  switch (init.kind) {
    case InitialKind::Cone:
      for (std::size_t i = 0; i < mesh->num_interior(); ++i)
        v[i] = -geometry::distance_to_boundary(dom, mesh->nodes[i]);
      break;
    case InitialKind::Paraboloid: {
      const Point2 c = dom.centroid();
      double top = 0.0;
      for (const auto& p : dom.vertices()) top = std::max(top, 0.5 * dot(p - c, p - c));
      for (std::size_t i = 0; i < mesh->num_interior(); ++i)
        v[i] = 0.5 * dot(mesh->nodes[i] - c, mesh->nodes[i] - c) - top;
      break;
    }
    case InitialKind::MaxAffine: {
      // Boundary values are left unpinned, so a single plane stays affine.
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> d(-1.0, 1.0);
      const Point2 c = dom.centroid();
      const double scale = 1.0 / std::max(dom.diameter(), 1e-300);
      std::vector<std::array<double, 3>> planes(init.affine_count);
      for (auto& p : planes) p = {d(rng) * scale, d(rng) * scale, d(rng) * 0.25 - 0.5};
      for (std::size_t i = 0; i < n; ++i) {
        double best = -std::numeric_limits<double>::infinity();
        const Point2 x = mesh->nodes[i] - c;
        for (const auto& p : planes) best = std::max(best, p[0] * x.x + p[1] * x.y + p[2]);
        v[i] = best;
      }
      break;
    }
    case InitialKind::VanishingAtPoint: {
      // max(-dist, g.(x - z)) with g the unit direction from the centroid to z.
      const Point2 c = dom.centroid();
      const Point2 target = init.point.value_or(c + 0.5 * (dom.vertices()[0] - c));
      const Point2 z = mesh->nodes[detail::nearest_interior(*mesh, target)];
      Point2 g = z - c;
      const double len = norm(g);
      g = len > 0.0 ? (1.0 / len) * g : Point2{1.0, 0.0};
      for (std::size_t i = 0; i < n; ++i) {
        const Point2 x = mesh->nodes[i];
        const double cone = mesh->is_interior(i) ? -geometry::distance_to_boundary(dom, x) : 0.0;
        v[i] = std::max(cone, dot(g, x - z));
      }
      break;
    }
    case InitialKind::Custom:
      if (init.values.size() != n)
        throw Error(ErrorCode::MeshMismatch, "custom initial data has the wrong node count");
      v = init.values;
      break;
  }
  NodeFunction u = pl::convex_envelope(NodeFunction(mesh, std::move(v)));
  if (u.sup_norm() == 0.0) throw Error(ErrorCode::ZeroInitialData, "initial data vanishes identically");
  // R scales like length^-4; affine data leaves only rounding-level masses.
  const double r = functionals::rayleigh(u);
  const double diam = dom.diameter();
  if (!(r * diam * diam * diam * diam > 1e-8))
    throw Error(ErrorCode::DegenerateInitialData, "zero Rayleigh quotient (affine initial data)");
  if (!std::isfinite(r)) throw Error(ErrorCode::DegenerateInitialData, "Rayleigh quotient is not finite");
  return u;
}

struct StepResult {
  NodeFunction u;
  double rayleigh = 0.0;  // R(u_k)
  dirichlet::SolveReport report;
};

/// Right-hand side R |u_i|^n w_i at interior nodes.
inline DiscreteMeasure scheme_measure(const NodeFunction& u, double r) {
  const auto& mesh = *u.mesh;
  DiscreteMeasure mu{u.mesh, std::vector<double>(mesh.num_interior())};
  for (std::size_t i = 0; i < mu.size(); ++i) mu.mass[i] = r * u[i] * u[i] * mesh.weights[i];
  return mu;
}

inline StepResult step_with(const NodeFunction& u, double r, const SchemeConfig& cfg) {
  if (!(r > 0.0)) throw Error(ErrorCode::ZeroRayleigh, "zero Rayleigh quotient");
  auto solved = dirichlet::solve_dirichlet(u.mesh, scheme_measure(u, r), cfg.solver,
                                           u.has_zero_boundary() ? &u : nullptr);
  return {std::move(solved.u), r, solved.report};
}

inline StepResult step(const NodeFunction& u, const SchemeConfig& cfg = {}) {
  pl::require_convexified(u);
  return step_with(u, functionals::rayleigh(u), cfg);
}

/// Iterates until both the Rayleigh quotient and the iterate stagnate.
inline SchemeResult run_from(NodeFunction u0, const SchemeConfig& cfg) {
  cfg.validate();
  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  };
  const double n = functionals::kPlane.n;
  SchemeResult res;
  auto record = [&](const NodeFunction& u, double r, double residual) {
    TraceRow row;
    row.k = static_cast<int>(res.trace.rows.size());
    row.rayleigh = r;
    row.sup = u.sup_norm();
    row.norm = functionals::lp_norm(u);
    row.energy = r * std::pow(row.norm, n);
    row.residual = residual;
    row.wall_ms = elapsed();
    res.trace.rows.push_back(row);
  };

  NodeFunction u = std::move(u0);
  double r = functionals::rayleigh(u);
  record(u, r, 0.0);
  res.iterates.push_back(u);
  for (int k = 0; k < cfg.max_iterations; ++k) {
    StepResult next = step_with(u, r, cfg);
    const double r_next = functionals::rayleigh(next.u);
    double diff = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) diff = std::max(diff, std::abs(next.u[i] - u[i]));
    const double rel_sup = diff / u.sup_norm();
    const double rel_r = std::abs(r_next - r) / r_next;
    record(next.u, r_next, next.report.final_residual);
    res.iterations = k + 1;
    if (cfg.sup_normalize) {
      // Recorded before rescaling; R is scale invariant, so only u changes.
      const double s = next.u.sup_norm();
      next.u = scaled(next.u, 1.0 / s);
    }
    u = std::move(next.u);
    r = r_next;
    res.iterates.push_back(u);
    if (rel_r <= cfg.rayleigh_rel_tolerance && rel_sup <= cfg.iterate_sup_tolerance) {
      res.converged = true;
      break;
    }
  }
  res.u_inf = u;
  res.lambda_estimate = r;
  for (std::size_t k = 0; k < res.iterates.size(); ++k)
    res.trace.rows[k].pairing = functionals::weighted_pairing(res.iterates[k], res.u_inf);
  if (!cfg.record_trace) res.iterates.clear();
  if (!res.converged) throw SchemeFailure(std::move(res));
  return res;
}

inline SchemeResult run_scheme(const MeshPtr& mesh, const SchemeConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  return run_from(make_initial(mesh, cfg.initial, seed), cfg);
}

}  // namespace maeigen::iteration
