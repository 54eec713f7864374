#pragma once

// Norms, pairings and the Rayleigh quotient, all on the mesh node weights.
// Sums run over every node in mesh order; iterates vanish on the boundary, so
// for them this equals the interior sum, while data with unpinned boundary
// values (initial guesses) keeps its boundary contribution.

#include "maeigen/error.hpp"
#include "maeigen/node_function.hpp"
#include "maeigen/pl_convex.hpp"

#include <cmath>

namespace maeigen::functionals {

/// Spatial dimension n of the geometric kernel; the norm exponent is n + 1.
struct Exponents {
  int n = 2;
  int p() const { return n + 1; }
};

inline constexpr Exponents kPlane{};

inline double lp_norm(const NodeFunction& u, double p = kPlane.p()) {
  if (!(p >= 1.0)) throw Error(ErrorCode::ValidationError, "norm exponent must be at least 1");
  const auto& w = u.mesh->weights;
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += w[i] * std::pow(std::abs(u[i]), p);
  return std::pow(s, 1.0 / p);
}

/// sum_i w_i |u_i| |v_i|^n
inline double weighted_pairing(const NodeFunction& u, const NodeFunction& v) {
  require_same_mesh(u, v);
  const auto& w = u.mesh->weights;
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += w[i] * std::abs(u[i]) * v[i] * v[i];
  return s;
}

/// sum_i |u_i| mu_i over interior nodes.
inline double energy(const NodeFunction& u, const DiscreteMeasure& mu) {
  double s = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) s += std::abs(u[i]) * mu[i];
  return s;
}

inline double energy(const NodeFunction& u) { return energy(u, pl::ma_measure(u)); }

inline double rayleigh(const NodeFunction& u, const DiscreteMeasure& mu) {
  const double p = kPlane.p();
  const double den = std::pow(lp_norm(u, p), p);
  if (!(den > 0.0)) throw Error(ErrorCode::ZeroDenominator, "Rayleigh quotient of the zero function");
  return energy(u, mu) / den;
}

inline double rayleigh(const NodeFunction& u) {
  pl::require_convexified(u);
  return rayleigh(u, pl::ma_measure(u));
}

}  // namespace maeigen::functionals
