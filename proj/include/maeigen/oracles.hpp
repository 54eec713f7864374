#pragma once

// Reference solutions and property checkers.
//
// The radial profile solves u'' u' / r = lambda u^2 with u(0) = -1, u'(0) = 0 by
// shooting on lambda. Every checker returns a CheckResult whose worst_margin is
// the smallest (normalized) slack of the inequality it tests; a check passes
// when that margin is at least -tolerance.

#include "maeigen/dirichlet.hpp"
#include "maeigen/error.hpp"
#include "maeigen/functionals.hpp"
#include "maeigen/iteration.hpp"
#include "maeigen/node_function.hpp"
#include "maeigen/pl_convex.hpp"

#include <boost/numeric/odeint.hpp>

#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace maeigen::oracles {

struct RadialProfile {
  std::vector<double> r;
  std::vector<double> u;
  std::vector<double> du;
  double lambda = 0.0;
  double radius = 0.0;
};

namespace detail {

using State = std::array<double, 2>;

struct RadialRhs {
  double lambda;
  void operator()(const State& s, State& ds, double r) const {
    ds[0] = s[1];
    ds[1] = lambda * r * s[0] * s[0] / s[1];
  }
};

/// Series start u = -1 + a r^2 + b r^4 with a = sqrt(lambda)/2, b = -lambda/16.
inline State series(double lambda, double r) {
  const double a = 0.5 * std::sqrt(lambda), b = -lambda / 16.0;
  return {-1.0 + a * r * r + b * r * r * r * r, 2.0 * a * r + 4.0 * b * r * r * r};
}

inline double start_radius(double radius) { return 1e-4 * radius; }

inline double value_at(double lambda, double radius, double tol) {
  namespace ode = boost::numeric::odeint;
  const double r0 = start_radius(radius);
  State s = series(lambda, r0);
  auto stepper = ode::make_controlled(tol, tol, ode::runge_kutta_dopri5<State>());
  ode::integrate_adaptive(stepper, RadialRhs{lambda}, s, r0, radius, radius * 1e-3);
  return s[0];
}

}  // namespace detail

/// Radial eigenpair on the disk of the given radius.
inline RadialProfile radial_eigen_oracle(double radius, double ode_tolerance = 1e-10,
                                         int samples = 2001) {
  if (!(radius > 0.0)) throw Error(ErrorCode::ValidationError, "radius must be positive");
  if (!(ode_tolerance > 0.0)) throw Error(ErrorCode::ValidationError, "tolerance must be positive");
  const double step_tol = ode_tolerance * 1e-3;
  auto f = [&](double lam) { return detail::value_at(lam, radius, step_tol); };
  // u(radius) increases with lambda: bracket the sign change by doubling.
  double lo = 1.0 / std::pow(radius, 4), hi = lo;
  int guard = 0;
  while (f(lo) >= 0.0) {
    lo *= 0.5;
    if (++guard > 200) throw Error(ErrorCode::ShootingBracketFailure, "no lower bracket");
  }
  hi = lo;
  while (f(hi) <= 0.0) {
    hi *= 2.0;
    if (++guard > 400) throw Error(ErrorCode::ShootingBracketFailure, "no upper bracket");
  }
  double lam = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    lam = 0.5 * (lo + hi);
    const double v = f(lam);
    if (std::abs(v) <= 0.1 * ode_tolerance && hi - lo <= 1e-3 * ode_tolerance * lam) break;
    (v < 0.0 ? lo : hi) = lam;
  }
  if (std::abs(f(lam)) > ode_tolerance)
    throw Error(ErrorCode::ShootingBracketFailure, "bisection did not reach the tolerance");

  namespace ode = boost::numeric::odeint;
  RadialProfile prof;
  prof.lambda = lam;
  prof.radius = radius;
  const double r0 = detail::start_radius(radius);
  std::vector<double> times(samples);
  for (int j = 0; j < samples; ++j) times[j] = r0 + (radius - r0) * j / (samples - 1);
  detail::State s = detail::series(lam, r0);
  auto stepper = ode::make_controlled(step_tol, step_tol, ode::runge_kutta_dopri5<detail::State>());
  prof.r.push_back(0.0);
  prof.u.push_back(-1.0);
  prof.du.push_back(0.0);
  ode::integrate_times(stepper, detail::RadialRhs{lam}, s, times.begin(), times.end(),
                       radius * 1e-3, [&](const detail::State& x, double r) {
                         prof.r.push_back(r);
                         prof.u.push_back(x[0]);
                         prof.du.push_back(x[1]);
                       });
  return prof;
}

/// Floor added to every relative tolerance so exact identities survive rounding.
inline constexpr double kRoundoff = 1e-12;

struct CheckResult {
  std::string name;
  bool passed = true;
  double worst_margin = std::numeric_limits<double>::infinity();
  long location = -1;
  double tolerance = 0.0;

  void observe(double margin, long where) {
    if (margin < worst_margin) {
      worst_margin = margin;
      location = where;
    }
  }
  CheckResult& finish() {
    if (!std::isfinite(worst_margin) && worst_margin > 0) worst_margin = 0.0;
    passed = worst_margin >= -tolerance;
    return *this;
  }
};

/// |u_i|^2 <= diam * dist(x_i) * total mass at every interior node. Margins are
/// relative: (bound - u_i^2) / max(bound, u_i^2), and 0 where both vanish.
inline CheckResult check_aleksandrov(const NodeFunction& u, const DiscreteMeasure& mu) {
  CheckResult c{"aleksandrov"};
  const auto& mesh = *u.mesh;
  const double diam = mesh.domain.diameter(), total = mu.total();
  for (std::size_t i = 0; i < mesh.num_interior(); ++i) {
    const double bound = diam * geometry::distance_to_boundary(mesh.domain, mesh.nodes[i]) * total;
    const double sq = u[i] * u[i], scale = std::max(bound, sq);
    c.observe(scale > 0.0 ? (bound - sq) / scale : 0.0, static_cast<long>(i));
  }
  c.tolerance = kRoundoff;
  return c.finish();
}

inline CheckResult check_aleksandrov(const NodeFunction& u) {
  return check_aleksandrov(u, pl::ma_measure(u));
}

/// sqrt(lambda) sum w|u||e|^2 >= sum w sqrt(mu(u)/w) |e|^2 for an eigenfunction e with
/// eigenvalue lambda (w are node weights). The margin is relative to the larger side.
inline CheckResult check_reverse_aleksandrov(const NodeFunction& u, const NodeFunction& w,
                                             double lambda, double slack,
                                             const DiscreteMeasure* mu_u = nullptr) {
  require_same_mesh(u, w);
  const DiscreteMeasure mu = mu_u ? *mu_u : pl::ma_measure(u);
  const auto& wt = u.mesh->weights;
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    lhs += wt[i] * std::abs(u[i]) * w[i] * w[i];
    rhs += wt[i] * std::sqrt(mu[i] / wt[i]) * w[i] * w[i];
  }
  lhs *= std::sqrt(lambda);
  CheckResult c{"reverse_aleksandrov"};
  const double scale = std::max(lhs, rhs);
  c.observe(scale > 0.0 ? (lhs - rhs) / scale : 0.0, 0);
  c.tolerance = slack + kRoundoff;
  return c.finish();
}

/// sum |u| mu(v) >= sum |v| sqrt(mu(u) mu(v)), margin relative to the larger side.
inline CheckResult check_nibp(const NodeFunction& u, const NodeFunction& v, double slack,
                              const DiscreteMeasure* mu_u = nullptr,
                              const DiscreteMeasure* mu_v = nullptr) {
  require_same_mesh(u, v);
  const DiscreteMeasure mu = mu_u ? *mu_u : pl::ma_measure(u);
  const DiscreteMeasure nu = mu_v ? *mu_v : pl::ma_measure(v);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    lhs += std::abs(u[i]) * nu[i];
    rhs += std::abs(v[i]) * std::sqrt(mu[i] * nu[i]);
  }
  CheckResult c{"nibp"};
  const double scale = std::max(lhs, rhs);
  c.observe(scale > 0.0 ? (lhs - rhs) / scale : 0.0, 0);
  c.tolerance = slack + kRoundoff;
  return c.finish();
}

inline void require_length(const iteration::IterationTrace& trace, std::size_t n) {
  if (trace.size() < n)
    throw Error(ErrorCode::TraceTooShort,
                "trace has " + std::to_string(trace.size()) + " rows, need " + std::to_string(n));
}

/// R_k^{1/2} - lambda^{1/2} <= lambda^{1/2} (t_{k+1} - t_k) / t_3 + slack lambda^{1/2}, k >= 3.
inline CheckResult check_rate_chain(const iteration::IterationTrace& trace, double lambda,
                                    double slack) {
  require_length(trace, 5);
  CheckResult c{"rate_chain"};
  const double s = std::sqrt(lambda), t3 = trace[3].pairing;
  for (std::size_t k = 3; k + 1 < trace.size(); ++k) {
    const double lhs = std::sqrt(trace[k].rayleigh) - s;
    const double rhs = s * (trace[k + 1].pairing - trace[k].pairing) / t3;
    c.observe((rhs - lhs) / s, static_cast<long>(k));
  }
  c.tolerance = slack + kRoundoff;
  return c.finish();
}

/// E_{k+1} <= E_k (1 + rel) for all k.
inline CheckResult check_energy_monotone(const iteration::IterationTrace& trace,
                                         double rel = 1e-9) {
  CheckResult c{"energy_monotone"};
  for (std::size_t k = 0; k + 1 < trace.size(); ++k)
    c.observe((trace[k].energy - trace[k + 1].energy) / trace[k].energy, static_cast<long>(k));
  c.tolerance = rel + kRoundoff;
  return c.finish();
}

/// t_{k+1} >= t_k - slack t_k for k >= 3.
inline CheckResult check_pairing_monotone(const iteration::IterationTrace& trace, double slack) {
  require_length(trace, 5);
  CheckResult c{"pairing_monotone"};
  for (std::size_t k = 3; k + 1 < trace.size(); ++k)
    c.observe((trace[k + 1].pairing - trace[k].pairing) / trace[k].pairing, static_cast<long>(k));
  c.tolerance = slack + kRoundoff;
  return c.finish();
}

/// R_k >= lambda - slack lambda for k >= 1.
inline CheckResult check_rayleigh_lower_bound(const iteration::IterationTrace& trace,
                                              double lambda, double slack) {
  CheckResult c{"rayleigh_lower_bound"};
  for (std::size_t k = 1; k < trace.size(); ++k)
    c.observe((trace[k].rayleigh - lambda) / lambda, static_cast<long>(k));
  c.tolerance = slack + kRoundoff;
  return c.finish();
}

/// norm_k^n <= R_0 norm_0^n / lambda (1 + rel) for k >= 1.
inline CheckResult check_norm_bound(const iteration::IterationTrace& trace, double lambda,
                                    double rel) {
  CheckResult c{"norm_bound"};
  const double bound = trace[0].energy / lambda;
  for (std::size_t k = 1; k < trace.size(); ++k)
    c.observe((bound - trace[k].norm * trace[k].norm) / bound, static_cast<long>(k));
  c.tolerance = rel + kRoundoff;
  return c.finish();
}

namespace detail {

inline double signed_energy(const NodeFunction& w, const DiscreteMeasure& mu) {
  double s = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) s += w[i] * mu[i];
  return s;
}

/// Measure and hull faces of zero-boundary convex data.
inline DiscreteMeasure measure_and_faces(const NodeFunction& w,
                                         std::vector<std::array<int, 3>>& faces) {
  pl::HullEngine engine(w.mesh, {}, true);
  pl::CellComplex cells;
  if (!engine.evaluate(w.values, cells)) {
    faces.clear();
    return pl::measure_of(w.mesh, pl::clip_cells(*w.mesh, w.values));
  }
  faces = engine.faces();
  return pl::measure_of(w.mesh, cells);
}

}  // namespace detail

/// d/dt sum w(t) mu(w(t)) = 3 sum (v - u) mu(w(t)) along w(t) = (1-t) u + t v.
inline CheckResult krylov_derivative_check(const NodeFunction& u, const NodeFunction& v, double t,
                                           double fd_step) {
  require_same_mesh(u, v);
  pl::require_convexified(u);
  pl::require_convexified(v);
  if (!(t > 0.0 && t < 1.0)) throw Error(ErrorCode::ValidationError, "t must lie in (0, 1)");
  CheckResult c{"krylov"};
  c.tolerance = std::max(1e-4, 10.0 * fd_step);
  const NodeFunction wt = combine(1.0 - t, u, t, v);
  std::vector<std::array<int, 3>> f0, fm, fp;
  const DiscreteMeasure mu = detail::measure_and_faces(wt, f0);
  double exact = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) exact += 3.0 * (v[i] - u[i]) * mu[i];
  double delta = fd_step;
  for (int attempt = 0; attempt < 4; ++attempt, delta *= 0.1) {
    const NodeFunction wm = combine(1.0 - (t - delta), u, t - delta, v);
    const NodeFunction wp = combine(1.0 - (t + delta), u, t + delta, v);
    const DiscreteMeasure mm = detail::measure_and_faces(wm, fm);
    const DiscreteMeasure mp = detail::measure_and_faces(wp, fp);
    if (f0.empty() || fm != f0 || fp != f0) continue;
    const double fd =
        (detail::signed_energy(wp, mp) - detail::signed_energy(wm, mm)) / (2.0 * delta);
    const double scale =
        std::max({std::abs(exact), std::abs(fd), std::abs(detail::signed_energy(wt, mu))});
    c.observe(scale > 0.0 ? -std::abs(fd - exact) / scale : 0.0, attempt);
    return c.finish();
  }
  throw Error(ErrorCode::DegenerateDirection, "hull combinatorics change at every step size");
}

/// Random zero-boundary convex function: Dirichlet solution for a smooth
/// positive density built from a few random Gaussian bumps.
inline NodeFunction random_smooth_convex(const MeshPtr& mesh, std::uint64_t seed,
                                         const dirichlet::SolverConfig& cfg = {}) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  const auto& dom = mesh->domain;
  const Point2 c = dom.centroid();
  const double diam = dom.diameter();
  struct Bump {
    Point2 x;
    double amp, width;
  };
  std::vector<Bump> bumps(3);
  for (auto& b : bumps)
    b = {c + Point2{(d(rng) - 0.5) * 0.6 * diam, (d(rng) - 0.5) * 0.6 * diam}, 4.0 * d(rng),
         (0.1 + 0.3 * d(rng)) * diam};
  DiscreteMeasure mu{mesh, std::vector<double>(mesh->num_interior())};
  for (std::size_t i = 0; i < mu.size(); ++i) {
    double dens = 0.5 + d(rng) * 0.0;
    for (const auto& b : bumps) {
      const Point2 r = mesh->nodes[i] - b.x;
      dens += b.amp * std::exp(-dot(r, r) / (b.width * b.width));
    }
    mu.mass[i] = dens * mesh->weights[i];
  }
  return dirichlet::solve_dirichlet(mesh, mu, cfg).u;
}

/// R((1 - t) u_inf + t v) >= R(u_inf) (1 - slack) for seeded convex targets v.
inline CheckResult stationarity_check(const NodeFunction& u_inf, int trial_count, double t,
                                      std::uint64_t seed, double slack = 0.0) {
  pl::require_convexified(u_inf);
  CheckResult c{"stationarity"};
  c.tolerance = slack + kRoundoff;
  const double r0 = functionals::rayleigh(u_inf);
  for (int k = 0; k < trial_count; ++k) {
    const NodeFunction v = random_smooth_convex(u_inf.mesh, seed + static_cast<std::uint64_t>(k));
    // Match amplitudes so the segment is not dominated by either end.
    const NodeFunction vs = scaled(v, u_inf.sup_norm() / v.sup_norm());
    const double r = functionals::rayleigh(combine(1.0 - t, u_inf, t, vs));
    c.observe((r - r0) / r0, k);
  }
  if (trial_count <= 0) c.worst_margin = 0.0;
  return c.finish();
}

}  // namespace maeigen::oracles
