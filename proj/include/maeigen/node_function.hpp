#pragma once

#include "maeigen/error.hpp"
#include "maeigen/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace maeigen {

using geometry::Mesh;
using geometry::MeshPtr;

/// Nodal values of a piecewise-linear function, in mesh order (interior, then boundary).
struct NodeFunction {
  MeshPtr mesh;
  std::vector<double> values;
  bool is_convexified = false;

  NodeFunction() = default;
  NodeFunction(MeshPtr m, std::vector<double> v, bool convexified = false)
      : mesh(std::move(m)), values(std::move(v)), is_convexified(convexified) {
    if (!mesh) throw Error(ErrorCode::ValidationError, "node function without a mesh");
    if (values.size() != mesh->num_nodes())
      throw Error(ErrorCode::MeshMismatch, "value count does not match node count");
    for (double x : values)
      if (!std::isfinite(x)) throw Error(ErrorCode::ValidationError, "non-finite node value");
  }

  static NodeFunction zeros(MeshPtr m) {
    const auto n = m->num_nodes();
    return NodeFunction(std::move(m), std::vector<double>(n, 0.0), true);
  }

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }

  bool has_zero_boundary() const {
    return std::all_of(values.begin() + mesh->num_interior(), values.end(),
                       [](double x) { return x == 0.0; });
  }

  double sup_norm() const {
    double s = 0.0;
    for (double x : values) s = std::max(s, std::abs(x));
    return s;
  }
};

inline void require_same_mesh(const NodeFunction& a, const NodeFunction& b) {
  if (a.mesh != b.mesh) throw Error(ErrorCode::MeshMismatch, "functions live on different meshes");
}

/// c * u; nonnegative scaling keeps convexity.
inline NodeFunction scaled(const NodeFunction& u, double c) {
  NodeFunction out = u;
  for (double& x : out.values) x *= c;
  out.is_convexified = u.is_convexified && c >= 0.0;
  return out;
}

/// a*u + b*v. Restrictions of convex functions add to a restriction of a convex
/// function, so nonnegative combinations of convexified data stay convexified.
inline NodeFunction combine(double a, const NodeFunction& u, double b, const NodeFunction& v) {
  require_same_mesh(u, v);
  NodeFunction out = u;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = a * u[i] + b * v[i];
  out.is_convexified = u.is_convexified && v.is_convexified && a >= 0.0 && b >= 0.0;
  return out;
}

/// Nonnegative masses at interior nodes.
struct DiscreteMeasure {
  MeshPtr mesh;
  std::vector<double> mass;

  double total() const { return std::accumulate(mass.begin(), mass.end(), 0.0); }
  std::size_t size() const { return mass.size(); }
  double operator[](std::size_t i) const { return mass[i]; }
};

}  // namespace maeigen
