// Ear clipping of the boundary, incremental insertion of inner points, then
// Lawson flips towards a constrained Delaunay triangulation.
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <unordered_set>

#include "sewkit/mesh.hpp"

namespace sewkit {

namespace {

double orient(const Vec2& a, const Vec2& b, const Vec2& c) {
  return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

// > 0 when d lies inside the circumcircle of the counter-clockwise (a, b, c).
double incircle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d, double* scale) {
  const double adx = a.x() - d.x(), ady = a.y() - d.y();
  const double bdx = b.x() - d.x(), bdy = b.y() - d.y();
  const double cdx = c.x() - d.x(), cdy = c.y() - d.y();
  const double ad = adx * adx + ady * ady;
  const double bd = bdx * bdx + bdy * bdy;
  const double cd = cdx * cdx + cdy * cdy;
  const double t1 = ad * (bdx * cdy - cdx * bdy);
  const double t2 = bd * (cdx * ady - adx * cdy);
  const double t3 = cd * (adx * bdy - bdx * ady);
  *scale = std::abs(t1) + std::abs(t2) + std::abs(t3);
  return t1 + t2 + t3;
}

// Points within rounding distance of an edge count as on it.
bool in_triangle_closed(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& p) {
  constexpr double tol = 1e-9;
  return orient(a, b, p) >= -tol * (b - a).norm() * (p - a).norm() &&
         orient(b, c, p) >= -tol * (c - b).norm() * (p - b).norm() &&
         orient(c, a, p) >= -tol * (a - c).norm() * (p - c).norm();
}

std::vector<std::array<int, 3>> ear_clip(const Polyline2& poly) {
  const int n = static_cast<int>(poly.size());
  std::vector<int> ring(n);
  for (int i = 0; i < n; ++i) ring[i] = i;
  std::vector<std::array<int, 3>> out;
  int guard = 0;
  std::size_t i = 0;
  while (ring.size() > 3) {
    const std::size_t m = ring.size();
    const int a = ring[(i + m - 1) % m], b = ring[i % m], c = ring[(i + 1) % m];
    bool ear = orient(poly[a], poly[b], poly[c]) > 1e-9 * (poly[b] - poly[a]).norm() * (poly[c] - poly[b]).norm();
    if (ear) {
      for (std::size_t k = 0; k < m && ear; ++k) {
        const int v = ring[k];
        if (v == a || v == b || v == c) continue;
        if (poly[v] == poly[a] || poly[v] == poly[b] || poly[v] == poly[c]) continue;
        if (in_triangle_closed(poly[a], poly[b], poly[c], poly[v])) ear = false;
      }
    }
    if (ear) {
      out.push_back({a, b, c});
      ring.erase(ring.begin() + static_cast<std::ptrdiff_t>(i % m));
      guard = 0;
      if (i >= ring.size()) i = 0;
    } else {
      i = (i + 1) % m;
      if (++guard > static_cast<int>(m)) throw Error("triangulation-failed", "no ear found in contour");
    }
  }
  if (orient(poly[ring[0]], poly[ring[1]], poly[ring[2]]) <= 0.0) {
    throw Error("triangulation-failed", "degenerate final ear");
  }
  out.push_back({ring[0], ring[1], ring[2]});
  return out;
}

class Triangulation {
 public:
  explicit Triangulation(const std::vector<Vec2>& pts) : pts_(pts) {}

  int add(int a, int b, int c) {
    int t;
    if (!free_.empty()) {
      t = free_.back();
      free_.pop_back();
      tris_[t] = {a, b, c};
      alive_[t] = true;
    } else {
      t = static_cast<int>(tris_.size());
      tris_.push_back({a, b, c});
      alive_.push_back(true);
    }
    edges_[key(a, b)] = t;
    edges_[key(b, c)] = t;
    edges_[key(c, a)] = t;
    last_ = t;
    return t;
  }

  void remove(int t) {
    const auto& v = tris_[t];
    for (int i = 0; i < 3; ++i) edges_.erase(key(v[i], v[(i + 1) % 3]));
    alive_[t] = false;
    free_.push_back(t);
  }

  void fix(int a, int b) { fixed_.insert(ukey(a, b)); }
  bool fixed(int a, int b) const { return fixed_.count(ukey(a, b)) != 0; }

  // triangle holding the directed edge a -> b, or -1
  int owner(int a, int b) const {
    auto it = edges_.find(key(a, b));
    return it == edges_.end() ? -1 : it->second;
  }

  int third(int t, int a, int b) const {
    for (int v : tris_[t]) {
      if (v != a && v != b) return v;
    }
    return -1;
  }

  void insert(int p) {
    const Vec2& q = pts_[p];
    int t = locate(q);
    const auto v = tris_[t];
    double o[3];
    for (int i = 0; i < 3; ++i) o[i] = orient(pts_[v[i]], pts_[v[(i + 1) % 3]], q);
    const int zeros = (o[0] == 0.0) + (o[1] == 0.0) + (o[2] == 0.0);
    if (zeros >= 2) throw Error("triangulation-failed", "inner point coincides with a vertex");
    std::vector<std::pair<int, int>> stack;
    if (zeros == 0) {
      remove(t);
      for (int i = 0; i < 3; ++i) {
        add(v[i], v[(i + 1) % 3], p);
        stack.emplace_back(v[i], v[(i + 1) % 3]);
      }
    } else {
      int e = o[0] == 0.0 ? 0 : (o[1] == 0.0 ? 1 : 2);
      const int a = v[e], b = v[(e + 1) % 3], c = v[(e + 2) % 3];
      if (fixed(a, b)) throw Error("triangulation-failed", "inner point lies on the boundary");
      const int u = owner(b, a);
      if (u < 0) throw Error("triangulation-failed", "inner point lies on the hull");
      const int d = third(u, a, b);
      remove(t);
      remove(u);
      add(p, b, c);
      add(a, p, c);
      add(p, a, d);
      add(b, p, d);
      stack = {{b, c}, {c, a}, {a, d}, {d, b}};
    }
    legalize(stack);
  }

  // Flip every non-fixed edge failing the empty-circle test, until none is left.
  void global_flip() {
    std::vector<std::pair<int, int>> stack;
    for (std::size_t t = 0; t < tris_.size(); ++t) {
      if (!alive_[t]) continue;
      for (int i = 0; i < 3; ++i) stack.emplace_back(tris_[t][i], tris_[t][(i + 1) % 3]);
    }
    legalize(stack);
  }

  std::vector<std::array<int, 3>> triangles() const {
    std::vector<std::array<int, 3>> out;
    for (std::size_t t = 0; t < tris_.size(); ++t) {
      if (alive_[t]) out.push_back(tris_[t]);
    }
    // deterministic order independent of slot reuse
    for (auto& f : out) std::rotate(f.begin(), std::min_element(f.begin(), f.end()), f.end());
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  std::uint64_t key(int a, int b) const {
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
  }
  std::uint64_t ukey(int a, int b) const { return a < b ? key(a, b) : key(b, a); }

  int locate(const Vec2& q) {
    int t = last_;
    if (t < 0 || !alive_[t]) {
      for (t = 0; !alive_[t]; ++t) {
      }
    }
    const int limit = 4 * static_cast<int>(tris_.size()) + 16;
    unsigned rot = 0;
    for (int step = 0; step < limit; ++step) {
      const auto& v = tris_[t];
      int next = -1;
      bool blocked = false;
      rot = rot * 1103515245u + 12345u;
      const int start = static_cast<int>((rot >> 16) % 3);
      for (int k = 0; k < 3; ++k) {
        const int i = (start + k) % 3;
        const int a = v[i], b = v[(i + 1) % 3];
        if (orient(pts_[a], pts_[b], q) < 0.0) {
          blocked = true;
          next = owner(b, a);
          if (next >= 0) break;
        }
      }
      // a non-convex contour can block the straight walk; scan instead
      if (next < 0 && blocked) break;
      if (next < 0) return t;
      t = next;
    }
    for (std::size_t s = 0; s < tris_.size(); ++s) {
      if (!alive_[s]) continue;
      const auto& v = tris_[s];
      if (in_triangle_closed(pts_[v[0]], pts_[v[1]], pts_[v[2]], q)) return static_cast<int>(s);
    }
    throw Error("triangulation-failed", "inner point outside the contour");
  }

  void legalize(std::vector<std::pair<int, int>>& stack) {
    std::size_t budget = 64 * pts_.size() + 1024;
    while (!stack.empty()) {
      const auto [a, b] = stack.back();
      stack.pop_back();
      if (fixed(a, b)) continue;
      const int t = owner(a, b);
      const int u = owner(b, a);
      if (t < 0 || u < 0) continue;
      const int x = third(t, a, b);
      const int y = third(u, a, b);
      double scale = 0.0;
      const double det = incircle(pts_[a], pts_[b], pts_[x], pts_[y], &scale);
      if (!(det > 1e-12 * scale)) continue;
      // the flipped pair must stay counter-clockwise
      if (!(orient(pts_[a], pts_[y], pts_[x]) > 0.0 && orient(pts_[y], pts_[b], pts_[x]) > 0.0)) continue;
      if (budget-- == 0) break;
      remove(t);
      remove(u);
      add(a, y, x);
      add(y, b, x);
      stack.emplace_back(a, y);
      stack.emplace_back(y, b);
      stack.emplace_back(b, x);
      stack.emplace_back(x, a);
    }
  }

  const std::vector<Vec2>& pts_;
  std::vector<std::array<int, 3>> tris_;
  std::vector<bool> alive_;
  std::vector<int> free_;
  std::unordered_map<std::uint64_t, int> edges_;
  std::unordered_set<std::uint64_t> fixed_;
  int last_ = -1;
};

}  // namespace

std::vector<std::array<int, 3>> triangulate_polygon(const Polyline2& boundary, const Polyline2& inner) {
  const int n = static_cast<int>(boundary.size());
  if (n < 3 || !(polygon_area(boundary) > 0.0)) {
    throw Error("triangulation-failed", "contour must be a counter-clockwise polygon");
  }
  std::vector<Vec2> pts(boundary.begin(), boundary.end());
  pts.insert(pts.end(), inner.begin(), inner.end());
  Triangulation tri(pts);
  for (const auto& f : ear_clip(boundary)) tri.add(f[0], f[1], f[2]);
  for (int i = 0; i < n; ++i) tri.fix(i, (i + 1) % n);
  for (int i = 0; i < static_cast<int>(inner.size()); ++i) tri.insert(n + i);
  tri.global_flip();
  return tri.triangles();
}

}  // namespace sewkit
