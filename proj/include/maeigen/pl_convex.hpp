#pragma once

// Piecewise-linear convex functions on a node set: subgradient cells, the
// discrete Monge-Ampere measure and the lower convex envelope.
//
// Two engines produce cells. The hull engine drives a triangulation to the
// lower hull of the lifted nodes by exact flips, then reads each cell off the
// gradients of the incident faces; it is fast but needs convex data. The
// clipping engine intersects the half-planes p.(x_j - x_i) <= u_j - u_i for all
// j directly; it is quadratic in the node count and accepts any data.

#include "maeigen/geometry.hpp"
#include "maeigen/node_function.hpp"
#include "maeigen/triangulation.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

namespace maeigen::pl {

/// A convex polygon in slope space. labels[k] is the node whose constraint
/// carries the edge from vertices[k] to vertices[k+1] (-1 for none).
struct GradientCell {
  std::vector<Point2> vertices;
  std::vector<int> labels;

  double area() const {
    double s = 0.0;
    const std::size_t m = vertices.size();
    for (std::size_t k = 0; k < m; ++k) s += cross(vertices[k], vertices[(k + 1) % m]);
    return std::max(0.0, 0.5 * s);
  }
  bool empty() const { return vertices.empty(); }
};

struct CellComplex {
  std::vector<GradientCell> cells;  // one per interior node; empty when inactive
  bool from_hull = false;
};

namespace detail {

inline double max_value(std::span<const double> z, const std::vector<char>* active,
                        std::size_t interior) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < z.size(); ++j)
    if (j >= interior || !active || (*active)[j]) m = std::max(m, z[j]);
  return m;
}

class Clipper {
 public:
  explicit Clipper(double box) {
    cell_.vertices = {{-box, -box}, {box, -box}, {box, box}, {-box, box}};
    cell_.labels = {-1, -1, -1, -1};
    refresh();
  }

  /// Intersects with {p : p.d <= c}, labelling the new edge with `label`.
  void clip(Point2 d, double c, int label) {
    if (cell_.vertices.empty()) return;
    const double g = c - dot(d, center_);
    if (g >= 0.0 && g * g >= radius2_ * dot(d, d)) return;
    const auto& P = cell_.vertices;
    const auto& E = cell_.labels;
    const std::size_t m = P.size();
    s_.resize(m);
    bool any_out = false, any_in = false;
    for (std::size_t k = 0; k < m; ++k) {
      s_[k] = dot(d, P[k]) - c;
      (s_[k] > 0.0 ? any_out : any_in) = true;
    }
    if (!any_out) return;
    if (!any_in) {
      cell_.vertices.clear();
      cell_.labels.clear();
      return;
    }
    next_.vertices.clear();
    next_.labels.clear();
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t k1 = (k + 1) % m;
      const double sa = s_[k], sb = s_[k1];
      if (sa <= 0.0) {
        next_.vertices.push_back(P[k]);
        next_.labels.push_back(E[k]);
        if (sb > 0.0) {
          next_.vertices.push_back(cut(P[k], P[k1], sa, sb));
          next_.labels.push_back(label);
        }
      } else if (sb <= 0.0) {
        next_.vertices.push_back(cut(P[k], P[k1], sa, sb));
        next_.labels.push_back(E[k]);
      }
    }
    std::swap(cell_, next_);
    refresh();
  }

  bool empty() const { return cell_.vertices.empty(); }
  GradientCell take() { return std::move(cell_); }

 private:
  static Point2 cut(Point2 a, Point2 b, double sa, double sb) {
    const double t = sa / (sa - sb);
    return {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
  }

  void refresh() {
    center_ = {0.0, 0.0};
    const auto& P = cell_.vertices;
    if (P.empty()) return;
    for (const auto& p : P) center_ = center_ + p;
    center_ = (1.0 / static_cast<double>(P.size())) * center_;
    radius2_ = 0.0;
    for (const auto& p : P) radius2_ = std::max(radius2_, dot(p - center_, p - center_));
    radius2_ *= 1.0 + 1e-12;
  }

  GradientCell cell_, next_;
  std::vector<double> s_;
  Point2 center_{};
  double radius2_ = 0.0;
};

}  // namespace detail

/// Slope cell of interior node i when node i carries value zi and every other
/// participating node j carries z[j]. Interior nodes with active[j] == 0 are
/// left out (their value acts as +infinity).
inline GradientCell clip_cell(const Mesh& mesh, std::span<const double> z, std::size_t i,
                              double zi, const std::vector<char>* active = nullptr,
                              std::optional<double> zmax = std::nullopt) {
  const std::size_t interior = mesh.num_interior();
  const double top = zmax ? *zmax : detail::max_value(z, active, interior);
  const Point2 xi = mesh.nodes[i];
  const double dist = std::max(mesh.domain.signed_edge_distance(xi), 1e-300);
  const double box = 2.0 * (top - zi) / dist;
  if (!(box > 0.0)) {
    // Node at or above every other value: the cell is empty unless the data is
    // constant, in which case it is the single slope 0.
    GradientCell cell;
    if (top == zi) {
      bool flat = true;
      for (std::size_t j = 0; j < z.size() && flat; ++j)
        if (j != i && (j >= interior || !active || (*active)[j])) flat = z[j] == zi;
      if (flat) {
        cell.vertices = {{0.0, 0.0}};
        cell.labels = {-1};
      }
    }
    return cell;
  }
  detail::Clipper clipper(box);
  auto use = [&](std::size_t j) {
    if (j == i) return;
    if (j < interior && active && !(*active)[j]) return;
    clipper.clip(mesh.nodes[j] - xi, z[j] - zi, static_cast<int>(j));
  };
  for (int j : mesh.neighbors[i]) use(static_cast<std::size_t>(j));
  for (std::size_t j = 0; j < z.size() && !clipper.empty(); ++j) use(j);
  return clipper.take();
}

inline CellComplex clip_cells(const Mesh& mesh, std::span<const double> z,
                              const std::vector<char>* active = nullptr) {
  CellComplex out;
  const std::size_t interior = mesh.num_interior();
  out.cells.resize(interior);
  const double top = detail::max_value(z, active, interior);
  for (std::size_t i = 0; i < interior; ++i)
    if (!active || (*active)[i]) out.cells[i] = clip_cell(mesh, z, i, z[i], active, top);
  return out;
}

/// Lower-hull engine over the active interior nodes plus boundary nodes. When
/// the boundary data is identically zero, only the polygon vertices are used as
/// boundary points: the other samples lie on the segments joining them at
/// height zero and cannot change the hull. The triangulation persists between
/// evaluations, so nearby data re-flips cheaply.
class HullEngine {
 public:
  HullEngine(MeshPtr mesh, std::vector<char> active, bool zero_boundary)
      : mesh_(std::move(mesh)), active_(std::move(active)) {
    const std::size_t interior = mesh_->num_interior();
    local_of_.assign(mesh_->num_nodes(), -1);
    for (std::size_t i = 0; i < interior; ++i)
      if (active_.empty() || active_[i]) add(static_cast<int>(i));
    if (zero_boundary) {
      for (int v : mesh_->vertex_nodes) add(v);
    } else {
      for (std::size_t j = interior; j < mesh_->num_nodes(); ++j) add(static_cast<int>(j));
    }
    std::vector<Point2> pts;
    pts.reserve(node_of_.size());
    for (int v : node_of_) pts.push_back(mesh_->nodes[v]);
    tri_.emplace(pts);
  }

  /// Fills `out` and returns true when the data is convex on the engine's nodes.
  bool evaluate(std::span<const double> values, CellComplex& out) {
    const std::size_t interior = mesh_->num_interior();
    z_.resize(node_of_.size());
    for (std::size_t k = 0; k < node_of_.size(); ++k) z_[k] = values[node_of_[k]];
    if (!tri_->flip_to_lower_hull(z_)) return false;

    const auto tris = tri_->triangles();
    grad_.resize(tris.size());
    for (std::size_t t = 0; t < tris.size(); ++t) {
      const auto& v = tris[t].v;
      const Point2 a = mesh_->nodes[node_of_[v[0]]];
      const Point2 b = mesh_->nodes[node_of_[v[1]]] - a;
      const Point2 c = mesh_->nodes[node_of_[v[2]]] - a;
      const double zb = z_[v[1]] - z_[v[0]], zc = z_[v[2]] - z_[v[0]];
      const double det = cross(b, c);
      grad_[t] = {(zb * c.y - zc * b.y) / det, (zc * b.x - zb * c.x) / det};
    }
    const auto start = tri_->vertex_triangles();
    out.cells.assign(interior, {});
    out.from_hull = true;
    for (std::size_t k = 0; k < node_of_.size(); ++k) {
      const int node = node_of_[k];
      if (static_cast<std::size_t>(node) >= interior) continue;
      GradientCell& cell = out.cells[node];
      int t = start[k];
      const int t0 = t;
      do {
        const auto& tri = tris[t];
        int pos = 0;
        while (tri.v[pos] != static_cast<int>(k)) ++pos;
        cell.vertices.push_back(grad_[t]);
        cell.labels.push_back(node_of_[tri.v[(pos + 2) % 3]]);
        t = tri.n[(pos + 1) % 3];
        if (t < 0) return false;
      } while (t != t0);
    }
    return true;
  }

  /// Faces of the current hull as sorted mesh-node triples, in sorted order.
  std::vector<std::array<int, 3>> faces() const {
    std::vector<std::array<int, 3>> out;
    for (const auto& t : tri_->triangles()) {
      std::array<int, 3> f{node_of_[t.v[0]], node_of_[t.v[1]], node_of_[t.v[2]]};
      std::sort(f.begin(), f.end());
      out.push_back(f);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Value of the lower hull from the last successful evaluation at x: the
  /// maximum of the face planes, which equals the hull inside its support.
  double hull_value(Point2 x) const {
    double best = -std::numeric_limits<double>::infinity();
    const auto tris = tri_->triangles();
    for (std::size_t t = 0; t < tris.size(); ++t) {
      const int a = tris[t].v[0];
      best = std::max(best, z_[a] + dot(grad_[t], x - mesh_->nodes[node_of_[a]]));
    }
    return best;
  }

 private:
  void add(int node) {
    local_of_[node] = static_cast<int>(node_of_.size());
    node_of_.push_back(node);
  }

  MeshPtr mesh_;
  std::vector<char> active_;
  std::vector<int> node_of_, local_of_;
  std::optional<triangulation::Triangulation> tri_;
  std::vector<double> z_;
  std::vector<Point2> grad_;
};

/// Cells of every interior node; hull engine first, clipping when it reports
/// non-convex data.
inline CellComplex compute_cells(const NodeFunction& u) {
  const Mesh& mesh = *u.mesh;
  const bool zero_boundary = u.has_zero_boundary();
  HullEngine engine(u.mesh, {}, zero_boundary);
  CellComplex out;
  if (engine.evaluate(u.values, out)) return out;
  return clip_cells(mesh, u.values);
}

inline void require_convexified(const NodeFunction& u) {
  if (!u.is_convexified)
    throw Error(ErrorCode::NotConvexified, "function must be convexified first");
}

inline DiscreteMeasure measure_of(const MeshPtr& mesh, const CellComplex& cells) {
  DiscreteMeasure mu{mesh, std::vector<double>(mesh->num_interior(), 0.0)};
  for (std::size_t i = 0; i < cells.cells.size(); ++i) mu.mass[i] = cells.cells[i].area();
  return mu;
}

inline DiscreteMeasure ma_measure(const NodeFunction& u) {
  require_convexified(u);
  return measure_of(u.mesh, compute_cells(u));
}

inline GradientCell subdifferential_cell(const NodeFunction& u, std::size_t i) {
  require_convexified(u);
  if (i >= u.mesh->num_interior())
    throw Error(ErrorCode::IndexOutOfRange, "node " + std::to_string(i) + " is not interior");
  return std::move(compute_cells(u).cells[i]);
}

/// Lower envelope of boundary data along each polygon edge. A boundary node is
/// never a convex combination involving interior nodes, so its envelope value
/// only depends on the nodes of its own edge.
inline void envelope_boundary(const Mesh& mesh, std::vector<double>& z) {
  const auto& vn = mesh.vertex_nodes;
  const std::size_t nb = mesh.num_nodes();
  for (std::size_t k = 0; k < vn.size(); ++k) {
    const int first = vn[k];
    const int last = k + 1 < vn.size() ? vn[k + 1] : vn[0];
    std::vector<int> chain;
    for (int j = first; j != last; j = (static_cast<std::size_t>(j + 1) == nb)
                                           ? static_cast<int>(mesh.num_interior())
                                           : j + 1)
      chain.push_back(j);
    chain.push_back(last);
    const Point2 a = mesh.nodes[first], b = mesh.nodes[last];
    const Point2 ab = b - a;
    const double len2 = dot(ab, ab);
    auto param = [&](int j) { return dot(mesh.nodes[j] - a, ab) / len2; };
    // Lower hull of (t_j, z_j) by a monotone chain.
    std::vector<int> hull;
    for (int j : chain) {
      while (hull.size() >= 2) {
        const int p = hull[hull.size() - 2], q = hull.back();
        const double t1 = param(q) - param(p), t2 = param(j) - param(p);
        if ((z[q] - z[p]) * t2 - (z[j] - z[p]) * t1 >= 0.0)
          hull.pop_back();
        else
          break;
      }
      hull.push_back(j);
    }
    for (std::size_t s = 0; s + 1 < hull.size(); ++s) {
      const int p = hull[s], q = hull[s + 1];
      const double tp = param(p), tq = param(q);
      for (std::size_t c = 0; c < chain.size(); ++c) {
        const int j = chain[c];
        const double t = param(j);
        if (t <= tp || t >= tq) continue;
        const double lam = (t - tp) / (tq - tp);
        z[j] = std::min(z[j], (1.0 - lam) * z[p] + lam * z[q]);
      }
    }
  }
}

/// Largest PL convex function below f at the nodes.
inline NodeFunction convex_envelope(const NodeFunction& f) {
  const Mesh& mesh = *f.mesh;
  const std::size_t interior = mesh.num_interior();
  std::vector<double> z = f.values;
  envelope_boundary(mesh, z);

  // Fast path: data that is already convex is its own envelope.
  {
    NodeFunction probe(f.mesh, z);
    HullEngine engine(f.mesh, {}, probe.has_zero_boundary());
    CellComplex cells;
    if (engine.evaluate(z, cells)) return NodeFunction(f.mesh, std::move(z), true);
  }

  const double top = detail::max_value(z, nullptr, interior);
  std::vector<GradientCell> cells(interior);
  std::vector<char> vertex(interior, 0);
  for (std::size_t i = 0; i < interior; ++i) {
    cells[i] = clip_cell(mesh, z, i, z[i], nullptr, top);
    vertex[i] = cells[i].vertices.size() >= 3 && cells[i].area() > 0.0;
  }
  // Supporting planes of the hull: one per (vertex node, cell corner).
  struct Plane {
    Point2 x;
    double z;
    Point2 p;
  };
  std::vector<Plane> planes;
  for (std::size_t i = 0; i < interior; ++i)
    if (vertex[i])
      for (const auto& p : cells[i].vertices) planes.push_back({mesh.nodes[i], z[i], p});
  // A non-vertex node's envelope value is the largest t for which its cell
  // against the other nodes is nonempty. The best supporting plane gives a
  // lower bound; faces spanned by boundary nodes alone can sit higher, so the
  // bound is confirmed or improved by bisection on emptiness.
  double zmin = std::numeric_limits<double>::infinity();
  for (double x : z) zmin = std::min(zmin, x);
  const double scale = std::max({1.0, std::abs(top), std::abs(zmin)});
  std::vector<double> out = z;
  for (std::size_t i = 0; i < interior; ++i) {
    if (vertex[i]) continue;
    double lo = zmin;
    for (const auto& pl : planes) lo = std::max(lo, pl.z + dot(pl.p, mesh.nodes[i] - pl.x));
    double hi = z[i];
    if (hi <= lo) {
      out[i] = hi;
      continue;
    }
    auto nonempty = [&](double t) { return !clip_cell(mesh, z, i, t, nullptr, top).empty(); };
    if (!nonempty(std::min(hi, lo + 1e-13 * scale))) {
      out[i] = lo;
      continue;
    }
    for (int it = 0; it < 200 && hi - lo > 1e-15 * scale; ++it) {
      const double mid = 0.5 * (lo + hi);
      (nonempty(mid) ? lo : hi) = mid;
    }
    out[i] = lo;
  }
  return NodeFunction(f.mesh, std::move(out), true);
}

}  // namespace maeigen::pl
