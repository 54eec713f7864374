#pragma once

// Planar triangulations over a fixed point set, driven to the lower convex hull
// of lifted points by edge flips. Heights are symbolically lowered by eps^rank,
// rank being the lexicographic (x, y) position, so every non-redundant tie is
// resolved the same way regardless of the starting triangulation.

#include "maeigen/error.hpp"
#include "maeigen/point.hpp"
#include "maeigen/predicates.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <span>
#include <unordered_map>
#include <vector>

namespace maeigen::triangulation {

struct Triangle {
  std::array<int, 3> v{};         // counterclockwise
  std::array<int, 3> n{-1, -1, -1};  // n[k] is the neighbour across the edge opposite v[k]
};

class Triangulation {
 public:
  /// Lexicographic sweep: every point becomes a vertex, triangles are strictly
  /// counterclockwise. Throws DegenerateArea if all points are collinear.
  explicit Triangulation(std::span<const Point2> points)
      : pts_(points.begin(), points.end()), rank_(points.size()) {
    const int m = static_cast<int>(pts_.size());
    if (m < 3) throw Error(ErrorCode::DegenerateArea, "triangulation needs at least 3 points");
    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return lex_less(pts_[a], pts_[b]) || (pts_[a] == pts_[b] && a < b);
    });
    for (int k = 0; k < m; ++k) rank_[order[k]] = k;
    sweep(order);
    link();
  }

  std::span<const Triangle> triangles() const { return tris_; }
  std::span<const Point2> points() const { return pts_; }
  std::int64_t rank(int i) const { return rank_[i]; }

  /// Flips toward the lower hull of (p_i, z_i). Returns false when a reflex
  /// edge cannot be flipped, which happens exactly when some lifted point is
  /// strictly above the hull of the others (the data is not convex).
  bool flip_to_lower_hull(std::span<const double> z) {
    std::vector<std::pair<int, int>> stack;
    stack.reserve(tris_.size() * 3);
    for (int t = 0; t < static_cast<int>(tris_.size()); ++t)
      for (int k = 0; k < 3; ++k)
        if (tris_[t].n[k] > t) stack.emplace_back(t, k);

    const std::size_t flip_cap = 64 * tris_.size() * tris_.size() + 1024;
    std::size_t flips = 0;
    while (true) {
      while (!stack.empty()) {
        auto [t, k] = stack.back();
        stack.pop_back();
        const int status = edge_status(t, k, z);
        if (status == kFlippable) {
          flip(t, k, stack);
          if (++flips > flip_cap) return false;
        }
      }
      bool stuck = false;
      for (int t = 0; t < static_cast<int>(tris_.size()); ++t) {
        for (int k = 0; k < 3; ++k) {
          if (tris_[t].n[k] < t) continue;
          const int status = edge_status(t, k, z);
          if (status == kFlippable) stack.emplace_back(t, k);
          if (status == kStuck) stuck = true;
        }
      }
      if (stack.empty()) return !stuck;
    }
  }

  /// Index of a triangle incident to each point (-1 if none).
  std::vector<int> vertex_triangles() const {
    std::vector<int> out(pts_.size(), -1);
    for (int t = 0; t < static_cast<int>(tris_.size()); ++t)
      for (int v : tris_[t].v) out[v] = t;
    return out;
  }

  predicates::Lifted lifted(int i, std::span<const double> z) const {
    return {pts_[i].x, pts_[i].y, z[i], rank_[i]};
  }

 private:
  static constexpr int kLocallyConvex = 0;
  static constexpr int kFlippable = 1;
  static constexpr int kStuck = 2;

  static int local(const Triangle& t, int vertex) {
    for (int k = 0; k < 3; ++k)
      if (t.v[k] == vertex) return k;
    return -1;
  }

  int orient(int a, int b, int c) const {
    return predicates::orient2d(pts_[a].x, pts_[a].y, pts_[b].x, pts_[b].y, pts_[c].x, pts_[c].y);
  }

  int edge_status(int t, int k, std::span<const double> z) const {
    const Triangle& tri = tris_[t];
    const int u = tri.n[k];
    if (u < 0) return kLocallyConvex;
    const int c = tri.v[k], a = tri.v[(k + 1) % 3], b = tri.v[(k + 2) % 3];
    const Triangle& other = tris_[u];
    int d = -1;
    for (int v : other.v)
      if (v != a && v != b) d = v;
    if (predicates::power(lifted(c, z), lifted(a, z), lifted(b, z), lifted(d, z)) <= 0)
      return kLocallyConvex;
    if (orient(c, a, d) > 0 && orient(c, d, b) > 0) return kFlippable;
    return kStuck;
  }

  void replace_neighbor(int t, int old_n, int new_n) {
    if (t < 0) return;
    for (int& x : tris_[t].n)
      if (x == old_n) x = new_n;
  }

  void flip(int t, int k, std::vector<std::pair<int, int>>& stack) {
    const int u = tris_[t].n[k];
    const Triangle T = tris_[t];
    const Triangle U = tris_[u];
    const int c = T.v[k], a = T.v[(k + 1) % 3], b = T.v[(k + 2) % 3];
    int kd = 0;
    for (int j = 0; j < 3; ++j)
      if (U.v[j] != a && U.v[j] != b) kd = j;
    const int d = U.v[kd];
    const int nta = T.n[(k + 1) % 3];  // across (b, c)
    const int ntb = T.n[(k + 2) % 3];  // across (c, a)
    const int nua = U.n[local(U, a)];  // across (d, b)
    const int nub = U.n[local(U, b)];  // across (a, d)

    tris_[t].v = {c, a, d};
    tris_[t].n = {nub, u, ntb};
    tris_[u].v = {c, d, b};
    tris_[u].n = {nua, nta, t};
    replace_neighbor(nub, u, t);
    replace_neighbor(nta, t, u);

    stack.emplace_back(t, 0);
    stack.emplace_back(t, 2);
    stack.emplace_back(u, 0);
    stack.emplace_back(u, 1);
  }

  void sweep(const std::vector<int>& order) {
    const int m = static_cast<int>(order.size());
    int first = -1;
    int s = 0;
    for (int k = 2; k < m; ++k) {
      s = orient(order[0], order[1], order[k]);
      if (s != 0) {
        first = k;
        break;
      }
    }
    if (first < 0) throw Error(ErrorCode::DegenerateArea, "all points are collinear");
    // Points order[0..first-1] are collinear and sorted along their line.
    const int apex = order[first];
    next_.assign(pts_.size(), -1);
    prev_.assign(pts_.size(), -1);
    auto connect = [&](int from, int to) {
      next_[from] = to;
      prev_[to] = from;
    };
    for (int j = 0; j + 1 < first; ++j) {
      if (s > 0)
        tris_.push_back({{order[j], order[j + 1], apex}});
      else
        tris_.push_back({{order[j + 1], order[j], apex}});
    }
    if (s > 0) {
      for (int j = 0; j + 1 < first; ++j) connect(order[j], order[j + 1]);
      connect(order[first - 1], apex);
      connect(apex, order[0]);
    } else {
      connect(order[0], apex);
      connect(apex, order[first - 1]);
      for (int j = first - 1; j > 0; --j) connect(order[j], order[j - 1]);
    }
    int last = apex;
    for (int k = first + 1; k < m; ++k) {
      const int q = order[k];
      auto visible = [&](int from) { return orient(from, next_[from], q) < 0; };
      int a = -1;
      if (visible(last))
        a = last;
      else if (visible(prev_[last]))
        a = prev_[last];
      else {
        int v = last;
        do {
          if (visible(v)) {
            a = v;
            break;
          }
          v = next_[v];
        } while (v != last);
      }
      if (a < 0) throw Error(ErrorCode::DegenerateArea, "sweep found no visible hull edge");
      int b = next_[a];
      while (visible(prev_[a])) a = prev_[a];
      while (visible(b)) b = next_[b];
      for (int v = a; v != b; v = next_[v]) tris_.push_back({{next_[v], v, q}});
      connect(a, q);
      connect(q, b);
      last = q;
    }
  }

  void link() {
    std::unordered_map<std::uint64_t, int> edges;
    edges.reserve(tris_.size() * 3);
    auto key = [](int a, int b) {
      return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
             static_cast<std::uint32_t>(b);
    };
    for (int t = 0; t < static_cast<int>(tris_.size()); ++t)
      for (int k = 0; k < 3; ++k) edges[key(tris_[t].v[(k + 1) % 3], tris_[t].v[(k + 2) % 3])] = t;
    for (int t = 0; t < static_cast<int>(tris_.size()); ++t) {
      for (int k = 0; k < 3; ++k) {
        auto it = edges.find(key(tris_[t].v[(k + 2) % 3], tris_[t].v[(k + 1) % 3]));
        tris_[t].n[k] = it == edges.end() ? -1 : it->second;
      }
    }
  }

  std::vector<Point2> pts_;
  std::vector<std::int64_t> rank_;
  std::vector<Triangle> tris_;
  std::vector<int> next_, prev_;
};

}  // namespace maeigen::triangulation
