#pragma once

// Independent brute-force references used by the unit and acceptance tests.
// None of this code shares logic with the library's cell engines.

#include "maeigen/geometry.hpp"
#include "maeigen/node_function.hpp"
#include "maeigen/pl_convex.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace support {

using maeigen::NodeFunction;
using maeigen::Point2;
using maeigen::geometry::MeshPtr;

/// Area of the convex hull of a point cloud (Andrew's monotone chain).
inline double hull_area(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end(), [](Point2 a, Point2 b) { return maeigen::lex_less(a, b); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return 0.0;
  std::vector<Point2> h(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && maeigen::cross(h[k - 1] - h[k - 2], pts[i] - h[k - 2]) <= 0) --k;
    h[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && maeigen::cross(h[k - 1] - h[k - 2], pts[i] - h[k - 2]) <= 0) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  double s = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) s += maeigen::cross(h[i], h[(i + 1) % h.size()]);
  return 0.5 * s;
}

/// Subgradient cell of node i by enumerating planes through node triples (i, j, k)
/// and keeping the ones that support the data at every node.
inline std::vector<Point2> brute_cell(const maeigen::geometry::Mesh& mesh,
                                      const std::vector<double>& u, std::size_t i,
                                      double tol = 1e-11) {
  const auto& x = mesh.nodes;
  const std::size_t n = x.size();
  std::vector<Point2> out;
  double scale = 1.0;
  for (double v : u) scale = std::max(scale, std::abs(v));
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) continue;
    for (std::size_t k = j + 1; k < n; ++k) {
      if (k == i) continue;
      const Point2 a = x[j] - x[i], b = x[k] - x[i];
      const double det = maeigen::cross(a, b);
      if (std::abs(det) < 1e-14) continue;
      const double ca = u[j] - u[i], cb = u[k] - u[i];
      const Point2 p{(ca * b.y - cb * a.y) / det, (cb * a.x - ca * b.x) / det};
      bool ok = true;
      for (std::size_t l = 0; l < n && ok; ++l)
        ok = u[l] - u[i] - maeigen::dot(p, x[l] - x[i]) >= -tol * scale;
      if (ok) out.push_back(p);
    }
  }
  return out;
}

inline std::vector<double> brute_masses(const NodeFunction& u) {
  std::vector<double> m(u.mesh->num_interior());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = hull_area(brute_cell(*u.mesh, u.values, i));
  return m;
}

/// Lower convex envelope at node i: minimum over node triples whose triangle
/// contains x_i of the barycentric interpolant (Caratheodory in the plane).
inline double brute_envelope_at(const maeigen::geometry::Mesh& mesh,
                                const std::vector<double>& f, std::size_t i) {
  const auto& x = mesh.nodes;
  const std::size_t n = x.size();
  double best = f[i];
  const Point2 p = x[i];
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) {
      // Segment case: p on the segment [a, b].
      const Point2 ab = x[b] - x[a];
      if (std::abs(maeigen::cross(ab, p - x[a])) <= 1e-14 * maeigen::dot(ab, ab)) {
        const double t = maeigen::dot(p - x[a], ab) / maeigen::dot(ab, ab);
        if (t >= 0.0 && t <= 1.0) best = std::min(best, (1 - t) * f[a] + t * f[b]);
      }
      for (std::size_t c = b + 1; c < n; ++c) {
        const double det = maeigen::cross(x[b] - x[a], x[c] - x[a]);
        if (std::abs(det) < 1e-14) continue;
        const double l1 = maeigen::cross(x[b] - p, x[c] - p) / det;
        const double l2 = maeigen::cross(x[c] - p, x[a] - p) / det;
        const double l3 = 1.0 - l1 - l2;
        if (l1 < -1e-14 || l2 < -1e-14 || l3 < -1e-14) continue;
        best = std::min(best, l1 * f[a] + l2 * f[b] + l3 * f[c]);
      }
    }
  return best;
}

/// Random convex data with zero boundary: envelope of values in [-1, 0].
inline NodeFunction random_zero_boundary(const MeshPtr& mesh, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-1.0, 0.0);
  std::vector<double> v(mesh->num_nodes(), 0.0);
  for (std::size_t i = 0; i < mesh->num_interior(); ++i) v[i] = d(rng);
  return maeigen::pl::convex_envelope(NodeFunction(mesh, v));
}

/// Random strictly convex-ish data with zero boundary: a scaled paraboloid bowl
/// plus a random max-affine term, then enveloped.
inline NodeFunction random_bowl(const MeshPtr& mesh, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  const Point2 c = mesh->domain.centroid();
  const int m = 3;
  std::vector<std::array<double, 3>> planes(m);
  for (auto& p : planes) p = {d(rng), d(rng), d(rng) * 0.2};
  double top = 0.0;
  std::vector<double> v(mesh->num_nodes(), 0.0);
  auto f = [&](Point2 x) {
    double a = -1e300;
    for (auto& p : planes) a = std::max(a, p[0] * (x.x - c.x) + p[1] * (x.y - c.y) + p[2]);
    const Point2 r = x - c;
    return 0.5 * maeigen::dot(r, r) + 0.3 * a;
  };
  for (std::size_t b = mesh->num_interior(); b < mesh->num_nodes(); ++b)
    top = std::max(top, f(mesh->nodes[b]));
  for (std::size_t i = 0; i < mesh->num_interior(); ++i) v[i] = std::min(0.0, f(mesh->nodes[i]) - top);
  return maeigen::pl::convex_envelope(NodeFunction(mesh, v));
}

}  // namespace support
