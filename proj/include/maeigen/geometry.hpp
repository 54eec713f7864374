#pragma once

// Convex polygonal domains and the deterministic node meshes built on them.

#include "maeigen/error.hpp"
#include "maeigen/point.hpp"
#include "maeigen/predicates.hpp"
#include "maeigen/triangulation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace maeigen::geometry {

/// A strictly convex polygon with counterclockwise vertices.
class ConvexPolygon {
 public:
  std::span<const Point2> vertices() const { return vertices_; }
  std::size_t size() const { return vertices_.size(); }
  double area() const { return area_; }
  double diameter() const { return diameter_; }
  Point2 centroid() const { return centroid_; }

  /// Exact test: strictly left of every edge.
  bool contains_strict(Point2 p) const {
    const std::size_t m = vertices_.size();
    for (std::size_t k = 0; k < m; ++k) {
      const Point2 a = vertices_[k], b = vertices_[(k + 1) % m];
      if (predicates::orient2d(a.x, a.y, b.x, b.y, p.x, p.y) <= 0) return false;
    }
    return true;
  }

  /// Signed distance to the nearest edge line: positive inside.
  double signed_edge_distance(Point2 p) const {
    double best = std::numeric_limits<double>::infinity();
    const std::size_t m = vertices_.size();
    for (std::size_t k = 0; k < m; ++k) {
      const Point2 a = vertices_[k], b = vertices_[(k + 1) % m];
      best = std::min(best, cross(b - a, p - a) / norm(b - a));
    }
    return best;
  }

  friend ConvexPolygon build_polygon(std::span<const Point2> vertices);

 private:
  std::vector<Point2> vertices_;
  double area_ = 0.0;
  double diameter_ = 0.0;
  Point2 centroid_{};
};

inline ConvexPolygon build_polygon(std::span<const Point2> vertices) {
  const std::size_t m = vertices.size();
  if (m < 3) throw Error(ErrorCode::TooFewVertices, "a polygon needs at least 3 vertices");
  for (const auto& p : vertices)
    if (!is_finite(p)) throw Error(ErrorCode::DegenerateArea, "non-finite vertex coordinate");
  // Every other vertex strictly left of every edge: strict convexity, no repeats,
  // counterclockwise, and a single winding.
  for (std::size_t k = 0; k < m; ++k) {
    const Point2 a = vertices[k], b = vertices[(k + 1) % m];
    for (std::size_t j = 0; j < m; ++j) {
      if (j == k || j == (k + 1) % m) continue;
      const Point2 c = vertices[j];
      if (predicates::orient2d(a.x, a.y, b.x, b.y, c.x, c.y) <= 0)
        throw Error(ErrorCode::NonConvexInput,
                    "vertex " + std::to_string(j) + " is not strictly left of edge " +
                        std::to_string(k));
    }
  }
  ConvexPolygon poly;
  poly.vertices_.assign(vertices.begin(), vertices.end());
  double twice_area = 0.0, cx = 0.0, cy = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const Point2 a = vertices[k], b = vertices[(k + 1) % m];
    const double c = cross(a, b);
    twice_area += c;
    cx += (a.x + b.x) * c;
    cy += (a.y + b.y) * c;
  }
  if (!(twice_area > 0.0)) throw Error(ErrorCode::DegenerateArea, "polygon area is not positive");
  poly.area_ = 0.5 * twice_area;
  poly.centroid_ = {cx / (3.0 * twice_area), cy / (3.0 * twice_area)};
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      poly.diameter_ = std::max(poly.diameter_, norm(vertices[i] - vertices[j]));
  return poly;
}

inline ConvexPolygon build_polygon(std::initializer_list<Point2> vertices) {
  return build_polygon(std::span<const Point2>(vertices.begin(), vertices.size()));
}

inline ConvexPolygon regular_ngon(int m, double radius, Point2 center = {0.0, 0.0}) {
  if (m < 3) throw Error(ErrorCode::TooFewVertices, "regular polygon needs m >= 3");
  if (!(radius > 0.0) || !std::isfinite(radius))
    throw Error(ErrorCode::DegenerateArea, "radius must be positive");
  std::vector<Point2> v(m);
  for (int j = 0; j < m; ++j) {
    const double theta = 2.0 * std::numbers::pi * j / m;
    v[j] = {center.x + radius * std::cos(theta), center.y + radius * std::sin(theta)};
  }
  // Exact multiples of pi/2 land on the axes.
  for (int j = 0; j < m; ++j) {
    if (4 * j % m == 0) {
      const int quarter = 4 * j / m;
      const double cs[4] = {1.0, 0.0, -1.0, 0.0};
      const double sn[4] = {0.0, 1.0, 0.0, -1.0};
      v[j] = {center.x + radius * cs[quarter], center.y + radius * sn[quarter]};
    }
  }
  return build_polygon(v);
}

inline ConvexPolygon axis_square(double side, Point2 origin = {0.0, 0.0}) {
  return build_polygon({origin, {origin.x + side, origin.y}, {origin.x + side, origin.y + side},
                        {origin.x, origin.y + side}});
}

inline double segment_distance(Point2 p, Point2 a, Point2 b) {
  const Point2 ab = b - a;
  const double len2 = dot(ab, ab);
  double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return norm(p - (a + t * ab));
}

/// Distance from a point of the closed domain to its boundary.
inline double distance_to_boundary(const ConvexPolygon& domain, Point2 p) {
  const auto v = domain.vertices();
  const double slack = 1e-12 * std::max(1.0, domain.diameter());
  if (!is_finite(p) || domain.signed_edge_distance(p) < -slack)
    throw Error(ErrorCode::PointOutsideDomain, "point lies outside the domain");
  // For a point of a convex polygon the nearest boundary point lies on the
  // nearest edge line, so line distances suffice and vanish exactly on edges.
  (void)v;
  return std::max(0.0, domain.signed_edge_distance(p));
}

/// Nodes are stored interior first (lexicographic in (x, y)), then boundary
/// (counterclockwise, starting at vertex 0).
struct Mesh {
  ConvexPolygon domain;
  double h = 0.0;
  std::vector<Point2> nodes;
  std::size_t interior_count = 0;
  std::vector<std::array<int, 3>> triangles;
  std::vector<double> weights;
  std::vector<int> vertex_nodes;              // node index of each polygon vertex
  std::vector<std::vector<int>> neighbors;    // Delaunay adjacency per node

  std::size_t num_nodes() const { return nodes.size(); }
  std::size_t num_interior() const { return interior_count; }
  std::size_t num_boundary() const { return nodes.size() - interior_count; }
  bool is_interior(std::size_t i) const { return i < interior_count; }
  std::span<const Point2> interior_nodes() const { return {nodes.data(), interior_count}; }
  std::span<const Point2> boundary_nodes() const {
    return {nodes.data() + interior_count, nodes.size() - interior_count};
  }
};

using MeshPtr = std::shared_ptr<const Mesh>;

inline double triangle_area(Point2 a, Point2 b, Point2 c) { return 0.5 * cross(b - a, c - a); }

/// Builds a mesh from already-placed nodes (interior first). Used by build_mesh
/// and by callers that need hand-made node sets.
inline MeshPtr assemble_mesh(ConvexPolygon domain, double h, std::vector<Point2> interior,
                             std::vector<Point2> boundary, std::vector<int> vertex_nodes) {
  auto mesh = std::make_shared<Mesh>();
  mesh->domain = std::move(domain);
  mesh->h = h;
  mesh->interior_count = interior.size();
  mesh->nodes = std::move(interior);
  mesh->nodes.insert(mesh->nodes.end(), boundary.begin(), boundary.end());
  mesh->vertex_nodes = std::move(vertex_nodes);

  triangulation::Triangulation tri(mesh->nodes);
  const Point2 c = mesh->domain.centroid();
  std::vector<double> z(mesh->nodes.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const Point2 d = mesh->nodes[i] - c;
    z[i] = dot(d, d);
  }
  if (!tri.flip_to_lower_hull(z))
    throw Error(ErrorCode::DegenerateArea, "Delaunay flipping failed");

  mesh->weights.assign(mesh->nodes.size(), 0.0);
  mesh->neighbors.assign(mesh->nodes.size(), {});
  for (const auto& t : tri.triangles()) {
    mesh->triangles.push_back(t.v);
    const double area =
        triangle_area(mesh->nodes[t.v[0]], mesh->nodes[t.v[1]], mesh->nodes[t.v[2]]);
    for (int k = 0; k < 3; ++k) {
      mesh->weights[t.v[k]] += area / 3.0;
      mesh->neighbors[t.v[k]].push_back(t.v[(k + 1) % 3]);
      mesh->neighbors[t.v[k]].push_back(t.v[(k + 2) % 3]);
    }
  }
  for (auto& nb : mesh->neighbors) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
  return mesh;
}

inline MeshPtr build_mesh(const ConvexPolygon& domain, double h) {
  if (!(h > 0.0) || !std::isfinite(h))
    throw Error(ErrorCode::InvalidSpacing, "h must be positive");
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& v : domain.vertices()) {
    xmin = std::min(xmin, v.x);
    xmax = std::max(xmax, v.x);
    ymin = std::min(ymin, v.y);
    ymax = std::max(ymax, v.y);
  }
  const double i0 = std::ceil(xmin / h), i1 = std::floor(xmax / h);
  const double j0 = std::ceil(ymin / h), j1 = std::floor(ymax / h);
  if ((i1 - i0 + 1) * (j1 - j0 + 1) > 4.0e6)
    throw Error(ErrorCode::InvalidSpacing, "h is too small for this domain");

  std::vector<Point2> interior;
  for (double i = i0; i <= i1; i += 1.0)
    for (double j = j0; j <= j1; j += 1.0) {
      const Point2 p{i * h, j * h};
      if (domain.contains_strict(p)) interior.push_back(p);
    }
  if (interior.empty()) throw Error(ErrorCode::MeshTooCoarse, "no grid point inside the domain");

  std::vector<Point2> boundary;
  std::vector<int> vertex_nodes;
  const auto v = domain.vertices();
  for (std::size_t k = 0; k < v.size(); ++k) {
    const Point2 a = v[k], b = v[(k + 1) % v.size()];
    vertex_nodes.push_back(static_cast<int>(interior.size() + boundary.size()));
    boundary.push_back(a);
    const int segments = std::max(1, static_cast<int>(std::ceil(norm(b - a) / h - 1e-12)));
    for (int j = 1; j < segments; ++j) {
      const double t = static_cast<double>(j) / segments;
      boundary.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
    }
  }
  return assemble_mesh(domain, h, std::move(interior), std::move(boundary),
                       std::move(vertex_nodes));
}

}  // namespace maeigen::geometry
