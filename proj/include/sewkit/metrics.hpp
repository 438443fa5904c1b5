#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sewkit/mesh.hpp"

namespace sewkit {

inline constexpr int kMetricSamples = 10000;
inline constexpr int kMgleSamples = 20;

/// Area-uniform points on the mesh surface (zero-area faces are never hit).
std::vector<Vec3> sample_surface(const TriMesh& mesh, int count, std::uint64_t seed);

class KdTree {
 public:
  explicit KdTree(std::vector<Vec3> points);

  /// (index, squared distance) of the nearest point; ties go to the lower index.
  std::pair<int, double> nearest(const Vec3& q) const;
  const std::vector<Vec3>& points() const noexcept { return points_; }

 private:
  struct Node {
    int point = -1;
    int axis = 0;
    int left = -1;
    int right = -1;
  };
  int build(std::vector<int>& idx, int lo, int hi, int depth);
  void search(int node, const Vec3& q, std::pair<int, double>& best) const;

  std::vector<Vec3> points_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

class TriangleBvh {
 public:
  explicit TriangleBvh(const TriMesh& mesh);

  struct Hit {
    int face = -1;
    Vec3 point = Vec3::Zero();
    double squared_distance = 0.0;
  };
  Hit closest(const Vec3& q) const;

 private:
  struct Node {
    Eigen::AlignedBox3d box;
    int left = -1;
    int right = -1;
    int first = 0;
    int count = 0;
  };
  int build(int lo, int hi);
  void search(int node, const Vec3& q, Hit& best) const;

  const TriMesh* mesh_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

/// Symmetric mean nearest-neighbour distance.
double chamfer(std::span<const Vec3> a, std::span<const Vec3> b);

/// Mean exact point-to-triangle distance.
double p2s(std::span<const Vec3> points, const TriMesh& mesh);

/// Shortest paths over mesh edges, the face diagonals of the one-step
/// midpoint subdivision (each edge midpoint is an extra node) and, for every
/// pair of faces sharing an edge, the unfolded straight line between their
/// opposite vertices when it crosses that edge.
class GeodesicGraph {
 public:
  explicit GeodesicGraph(const TriMesh& mesh);

  /// Distances to every mesh vertex (infinity when unreachable).
  std::vector<double> from(int vertex) const;
  int vertex_count() const noexcept { return vertices_; }

 private:
  int vertices_ = 0;
  std::vector<int> offsets_;
  std::vector<std::pair<int, double>> arcs_;
};

double geodesic(const TriMesh& mesh, int i, int j);

struct MgleResult {
  double value = 0.0;
  int pairs = 0;
  int excluded = 0;  // disconnected on either mesh
};

MgleResult mgle(const TriMesh& gt, const TriMesh& pred, int k = kMgleSamples, std::uint64_t seed = 0);

/// Pools independent K-point draws (seeds derived from `seed`) until at
/// least `min_pairs` pairs have been measured.
MgleResult mgle_pooled(const TriMesh& gt, const TriMesh& pred, int k, std::uint64_t seed, int min_pairs);

struct GarmentMetrics {
  double chamfer = 0.0;
  double p2s = 0.0;
  double mgle = 0.0;
};

/// Chamfer and P2S on `samples` area-uniform points per mesh, MGLE with K = 20.
GarmentMetrics evaluate_meshes(const TriMesh& gt, const TriMesh& pred, std::uint64_t seed,
                               int samples = kMetricSamples);

}  // namespace sewkit
