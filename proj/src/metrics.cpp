#include "sewkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <tuple>

#include "sewkit/random.hpp"

namespace sewkit {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

std::vector<Vec3> sample_surface(const TriMesh& mesh, int count, std::uint64_t seed) {
  if (count < 0) throw Error("invalid-argument", "negative sample count");
  std::vector<double> cumulative(mesh.faces.size());
  double total = 0.0;
  for (int f = 0; f < mesh.face_count(); ++f) {
    total += mesh.face_area(f);
    cumulative[f] = total;
  }
  if (!(total > 0.0)) throw Error("empty-mesh", "mesh has no surface area to sample");
  Rng rng(seed);
  std::vector<Vec3> out;
  out.reserve(count);
  for (int s = 0; s < count; ++s) {
    const double r = rng.uniform() * total;
    int f = static_cast<int>(std::upper_bound(cumulative.begin(), cumulative.end(), r) - cumulative.begin());
    f = std::min(f, mesh.face_count() - 1);
    while (f > 0 && cumulative[f] == cumulative[f - 1]) --f;  // never land on a zero-area face
    const double u = std::sqrt(rng.uniform());
    const double v = rng.uniform();
    const auto& t = mesh.faces[f];
    out.push_back((1.0 - u) * mesh.vertices[t[0]] + u * (1.0 - v) * mesh.vertices[t[1]] +
                  u * v * mesh.vertices[t[2]]);
  }
  return out;
}

// --- kd-tree -------------------------------------------------------------------------

KdTree::KdTree(std::vector<Vec3> points) : points_(std::move(points)) {
  std::vector<int> idx(points_.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  nodes_.reserve(points_.size());
  root_ = build(idx, 0, static_cast<int>(idx.size()), 0);
}

int KdTree::build(std::vector<int>& idx, int lo, int hi, int depth) {
  if (lo >= hi) return -1;
  const int axis = depth % 3;
  const int mid = (lo + hi) / 2;
  std::nth_element(idx.begin() + lo, idx.begin() + mid, idx.begin() + hi, [&](int a, int b) {
    return points_[a](axis) < points_[b](axis) || (points_[a](axis) == points_[b](axis) && a < b);
  });
  const int node = static_cast<int>(nodes_.size());
  nodes_.push_back({idx[mid], axis, -1, -1});
  const int left = build(idx, lo, mid, depth + 1);
  const int right = build(idx, mid + 1, hi, depth + 1);
  nodes_[node].left = left;
  nodes_[node].right = right;
  return node;
}

void KdTree::search(int node, const Vec3& q, std::pair<int, double>& best) const {
  if (node < 0) return;
  const Node& n = nodes_[node];
  const double d = (points_[n.point] - q).squaredNorm();
  if (d < best.second || (d == best.second && n.point < best.first)) best = {n.point, d};
  const double delta = q(n.axis) - points_[n.point](n.axis);
  const int near = delta < 0.0 ? n.left : n.right;
  const int far = delta < 0.0 ? n.right : n.left;
  search(near, q, best);
  if (delta * delta <= best.second) search(far, q, best);
}

std::pair<int, double> KdTree::nearest(const Vec3& q) const {
  if (root_ < 0) throw Error("empty-input", "nearest neighbour in an empty set");
  std::pair<int, double> best{-1, kInf};
  search(root_, q, best);
  return best;
}

// --- point to triangle ----------------------------------------------------------------

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  // Voronoi-region walk (Ericson, Real-Time Collision Detection 5.1.5)
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double den = d1 - d3;
    return den > 0.0 ? Vec3(a + (d1 / den) * ab) : a;
  }
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double den = d2 - d6;
    return den > 0.0 ? Vec3(a + (d2 / den) * ac) : a;
  }
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double den = (d4 - d3) + (d5 - d6);
    return den > 0.0 ? Vec3(b + ((d4 - d3) / den) * (c - b)) : b;
  }
  const double sum = va + vb + vc;
  if (!(sum > 0.0)) {
    // degenerate triangle: nearest of its three edges
    Vec3 best = a;
    double bd = (p - a).squaredNorm();
    for (const auto& [s, e] : {std::pair{a, b}, std::pair{b, c}, std::pair{c, a}}) {
      const Vec3 d = e - s;
      const double len2 = d.squaredNorm();
      const double t = len2 > 0.0 ? std::clamp((p - s).dot(d) / len2, 0.0, 1.0) : 0.0;
      const Vec3 q = s + t * d;
      if ((p - q).squaredNorm() < bd) {
        bd = (p - q).squaredNorm();
        best = q;
      }
    }
    return best;
  }
  const double denom = 1.0 / sum;
  const double v = vb * denom, w = vc * denom;
  return a + ab * v + ac * w;
}

// --- BVH -------------------------------------------------------------------------------

TriangleBvh::TriangleBvh(const TriMesh& mesh) : mesh_(&mesh) {
  if (mesh.faces.empty()) throw Error("empty-mesh", "mesh has no faces");
  order_.resize(mesh.faces.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
  build(0, static_cast<int>(order_.size()));
}

int TriangleBvh::build(int lo, int hi) {
  const int node = static_cast<int>(nodes_.size());
  nodes_.push_back({});
  Eigen::AlignedBox3d box;
  Eigen::AlignedBox3d centroids;
  for (int i = lo; i < hi; ++i) {
    const auto& t = mesh_->faces[order_[i]];
    for (int k = 0; k < 3; ++k) box.extend(mesh_->vertices[t[k]]);
    centroids.extend((mesh_->vertices[t[0]] + mesh_->vertices[t[1]] + mesh_->vertices[t[2]]) / 3.0);
  }
  nodes_[node].box = box;
  if (hi - lo <= 4) {
    nodes_[node].first = lo;
    nodes_[node].count = hi - lo;
    return node;
  }
  int axis = 0;
  centroids.sizes().maxCoeff(&axis);
  const int mid = (lo + hi) / 2;
  auto centroid = [&](int f) {
    const auto& t = mesh_->faces[f];
    return mesh_->vertices[t[0]](axis) + mesh_->vertices[t[1]](axis) + mesh_->vertices[t[2]](axis);
  };
  std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi, [&](int a, int b) {
    const double ca = centroid(a), cb = centroid(b);
    return ca < cb || (ca == cb && a < b);
  });
  const int left = build(lo, mid);
  const int right = build(mid, hi);
  nodes_[node].left = left;
  nodes_[node].right = right;
  return node;
}

void TriangleBvh::search(int node, const Vec3& q, Hit& best) const {
  const Node& n = nodes_[node];
  if (n.box.squaredExteriorDistance(q) > best.squared_distance) return;
  if (n.left < 0) {
    for (int i = n.first; i < n.first + n.count; ++i) {
      const int f = order_[i];
      const auto& t = mesh_->faces[f];
      const Vec3 c = closest_point_on_triangle(q, mesh_->vertices[t[0]], mesh_->vertices[t[1]], mesh_->vertices[t[2]]);
      const double d = (q - c).squaredNorm();
      if (d < best.squared_distance || (d == best.squared_distance && f < best.face)) best = {f, c, d};
    }
    return;
  }
  const double dl = nodes_[n.left].box.squaredExteriorDistance(q);
  const double dr = nodes_[n.right].box.squaredExteriorDistance(q);
  if (dl <= dr) {
    search(n.left, q, best);
    search(n.right, q, best);
  } else {
    search(n.right, q, best);
    search(n.left, q, best);
  }
}

TriangleBvh::Hit TriangleBvh::closest(const Vec3& q) const {
  Hit best;
  best.squared_distance = kInf;
  search(0, q, best);
  return best;
}

// --- Chamfer / P2S ----------------------------------------------------------------------

namespace {

double mean_nearest(std::span<const Vec3> from, const KdTree& to) {
  double sum = 0.0;
  for (const Vec3& p : from) sum += std::sqrt(to.nearest(p).second);
  return sum / static_cast<double>(from.size());
}

}  // namespace

double chamfer(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || b.empty()) throw Error("empty-input", "chamfer of an empty sample");
  const KdTree ta({a.begin(), a.end()});
  const KdTree tb({b.begin(), b.end()});
  return 0.5 * (mean_nearest(a, tb) + mean_nearest(b, ta));
}

double p2s(std::span<const Vec3> points, const TriMesh& mesh) {
  if (points.empty()) throw Error("empty-input", "p2s of an empty sample");
  const TriangleBvh bvh(mesh);
  double sum = 0.0;
  for (const Vec3& p : points) sum += std::sqrt(bvh.closest(p).squared_distance);
  return sum / static_cast<double>(points.size());
}

// --- geodesics ----------------------------------------------------------------------------

GeodesicGraph::GeodesicGraph(const TriMesh& mesh) : vertices_(mesh.vertex_count()) {
  std::map<std::pair<int, int>, int> midpoint;
  auto mid = [&](int a, int b) {
    const std::pair<int, int> key{std::min(a, b), std::max(a, b)};
    auto [it, fresh] = midpoint.try_emplace(key, vertices_ + static_cast<int>(midpoint.size()));
    return std::pair<int, bool>{it->second, fresh};
  };
  std::vector<std::tuple<int, int, double>> arcs;
  auto link = [&](int a, int b, double w) {
    arcs.emplace_back(a, b, w);
    arcs.emplace_back(b, a, w);
  };
  const auto& v = mesh.vertices;
  for (const auto& f : mesh.faces) {
    int m[3];
    for (int i = 0; i < 3; ++i) {
      const int a = f[i], b = f[(i + 1) % 3];
      const auto [id, fresh] = mid(a, b);
      m[i] = id;
      if (fresh) {
        const double half = 0.5 * (v[a] - v[b]).norm();
        link(a, id, half);
        link(id, b, half);
      }
    }
    // midpoint triangle: m[i] sits on edge (f[i], f[i+1]); its sides are half the opposite edges
    for (int i = 0; i < 3; ++i) {
      const int j = (i + 1) % 3;
      const Vec3 pi = 0.5 * (v[f[i]] + v[f[(i + 1) % 3]]);
      const Vec3 pj = 0.5 * (v[f[j]] + v[f[(j + 1) % 3]]);
      link(m[i], m[j], (pi - pj).norm());
    }
  }
  // Opposite vertices of two faces sharing an edge, joined by the straight
  // line of the unfolded pair when that line crosses the shared edge.
  std::map<std::pair<int, int>, std::vector<int>> across;
  for (const auto& f : mesh.faces) {
    for (int i = 0; i < 3; ++i) {
      const int a = f[i], b = f[(i + 1) % 3];
      across[{std::min(a, b), std::max(a, b)}].push_back(f[(i + 2) % 3]);
    }
  }
  for (const auto& [e, opp] : across) {
    if (opp.size() != 2 || opp[0] == opp[1]) continue;
    const Vec3 a = v[e.first];
    const Vec3 ab = v[e.second] - a;
    const double len = ab.norm();
    if (!(len > 0.0)) continue;
    const Vec3 x = ab / len;
    auto flat = [&](int c) {
      const Vec3 d = v[c] - a;
      const double along = d.dot(x);
      return Vec2(along, (d - along * x).norm());
    };
    const Vec2 c = flat(opp[0]);
    const Vec2 d = flat(opp[1]);
    if (!(c.y() > 0.0 && d.y() > 0.0)) continue;
    const double cross = c.x() + (d.x() - c.x()) * c.y() / (c.y() + d.y());
    if (cross <= 0.0 || cross >= len) continue;
    link(opp[0], opp[1], (c - Vec2(d.x(), -d.y())).norm());
  }
  const int nodes = vertices_ + static_cast<int>(midpoint.size());
  offsets_.assign(nodes + 1, 0);
  for (const auto& [a, b, w] : arcs) ++offsets_[a + 1];
  for (int i = 0; i < nodes; ++i) offsets_[i + 1] += offsets_[i];
  arcs_.resize(arcs.size());
  std::vector<int> fill(offsets_.begin(), offsets_.end() - 1);
  for (const auto& [a, b, w] : arcs) arcs_[fill[a]++] = {b, w};
}

std::vector<double> GeodesicGraph::from(int vertex) const {
  if (vertex < 0 || vertex >= vertices_) throw Error("index-out-of-range", "geodesic source out of range");
  const int nodes = static_cast<int>(offsets_.size()) - 1;
  std::vector<double> dist(nodes, kInf);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[vertex] = 0.0;
  heap.push({0.0, vertex});
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (d > dist[u]) continue;
    for (int k = offsets_[u]; k < offsets_[u + 1]; ++k) {
      const auto [w, len] = arcs_[k];
      const double nd = d + len;
      if (nd < dist[w]) {
        dist[w] = nd;
        heap.push({nd, w});
      }
    }
  }
  dist.resize(vertices_);
  return dist;
}

double geodesic(const TriMesh& mesh, int i, int j) {
  if (i == j) {
    if (i < 0 || i >= mesh.vertex_count()) throw Error("index-out-of-range", "geodesic vertex out of range");
    return 0.0;
  }
  const GeodesicGraph g(mesh);
  if (j < 0 || j >= mesh.vertex_count()) throw Error("index-out-of-range", "geodesic vertex out of range");
  const double d = g.from(i)[j];
  if (!std::isfinite(d)) throw Error("disconnected", "vertices are not connected");
  return d;
}

// --- MGLE ---------------------------------------------------------------------------------

namespace {

class MgleContext {
 public:
  MgleContext(const TriMesh& gt, const TriMesh& pred)
      : gt_(gt), gt_graph_(gt), pred_graph_(pred), gt_vertices_(gt.vertices), pred_vertices_(pred.vertices),
        pred_bvh_(pred) {}

  void draw(int k, std::uint64_t seed, double& sum, int& pairs, int& excluded) {
    const std::vector<Vec3> samples = sample_surface(gt_, k, seed);
    std::vector<int> xs, ys;
    for (const Vec3& s : samples) {
      const int x = gt_vertices_.nearest(s).first;
      const Vec3 on_pred = pred_bvh_.closest(gt_.vertices[x]).point;
      xs.push_back(x);
      ys.push_back(pred_vertices_.nearest(on_pred).first);
    }
    for (int i = 0; i < k; ++i) {
      const auto& gi = distances(gt_graph_, gt_cache_, xs[i]);
      const auto& pi = distances(pred_graph_, pred_cache_, ys[i]);
      for (int j = i + 1; j < k; ++j) {
        const double a = gi[xs[j]];
        const double b = pi[ys[j]];
        if (!std::isfinite(a) || !std::isfinite(b)) {
          ++excluded;
          continue;
        }
        sum += std::abs(a - b);
        ++pairs;
      }
    }
  }

 private:
  static const std::vector<double>& distances(const GeodesicGraph& g, std::unordered_map<int, std::vector<double>>& cache,
                                              int v) {
    auto it = cache.find(v);
    if (it == cache.end()) it = cache.emplace(v, g.from(v)).first;
    return it->second;
  }

  const TriMesh& gt_;
  GeodesicGraph gt_graph_;
  GeodesicGraph pred_graph_;
  KdTree gt_vertices_;
  KdTree pred_vertices_;
  TriangleBvh pred_bvh_;
  std::unordered_map<int, std::vector<double>> gt_cache_;
  std::unordered_map<int, std::vector<double>> pred_cache_;
};

}  // namespace

MgleResult mgle(const TriMesh& gt, const TriMesh& pred, int k, std::uint64_t seed) {
  if (k < 2) throw Error("invalid-argument", "MGLE needs at least two samples");
  if (gt.faces.empty() || pred.faces.empty()) throw Error("empty-mesh", "MGLE on an empty mesh");
  MgleContext ctx(gt, pred);
  double sum = 0.0;
  MgleResult r;
  ctx.draw(k, seed, sum, r.pairs, r.excluded);
  r.value = r.pairs > 0 ? sum / r.pairs : 0.0;
  return r;
}

MgleResult mgle_pooled(const TriMesh& gt, const TriMesh& pred, int k, std::uint64_t seed, int min_pairs) {
  if (k < 2) throw Error("invalid-argument", "MGLE needs at least two samples");
  if (gt.faces.empty() || pred.faces.empty()) throw Error("empty-mesh", "MGLE on an empty mesh");
  MgleContext ctx(gt, pred);
  double sum = 0.0;
  MgleResult r;
  for (std::uint64_t rep = 0; r.pairs < min_pairs; ++rep) {
    const int before = r.pairs + r.excluded;
    ctx.draw(k, derive_seed(seed, rep), sum, r.pairs, r.excluded);
    if (r.pairs + r.excluded == before) break;
    if (r.pairs == 0 && rep > 16) break;
  }
  r.value = r.pairs > 0 ? sum / r.pairs : 0.0;
  return r;
}

GarmentMetrics evaluate_meshes(const TriMesh& gt, const TriMesh& pred, std::uint64_t seed, int samples) {
  const std::vector<Vec3> a = sample_surface(gt, samples, derive_seed(seed, 1));
  const std::vector<Vec3> b = sample_surface(pred, samples, derive_seed(seed, 2));
  GarmentMetrics m;
  m.chamfer = chamfer(a, b);
  m.p2s = p2s(a, pred);
  m.mgle = mgle(gt, pred, kMgleSamples, derive_seed(seed, 3)).value;
  return m;
}

}  // namespace sewkit
