#pragma once

#include <algorithm>
#include <limits>
#include <vector>

#include "sewkit/mesh.hpp"

// Brute-force references for the metric code.
namespace oracles {

using sewkit::TriMesh;
using sewkit::Vec3;

inline double brute_chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  auto one = [](const std::vector<Vec3>& p, const std::vector<Vec3>& q) {
    double sum = 0.0;
    for (const Vec3& x : p) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec3& y : q) best = std::min(best, (x - y).norm());
      sum += best;
    }
    return sum / p.size();
  };
  return 0.5 * (one(a, b) + one(b, a));
}

inline double segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 d = b - a;
  const double t = std::clamp((p - a).dot(d) / d.squaredNorm(), 0.0, 1.0);
  return (p - (a + t * d)).norm();
}

// Plane projection when the foot lies inside, otherwise the nearest side.
inline double triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 n = (b - a).cross(c - a);
  const Vec3 foot = p - n * (p - a).dot(n) / n.squaredNorm();
  const bool inside = (b - a).cross(foot - a).dot(n) >= 0 && (c - b).cross(foot - b).dot(n) >= 0 &&
                      (a - c).cross(foot - c).dot(n) >= 0;
  if (inside) return (p - foot).norm();
  return std::min({segment_distance(p, a, b), segment_distance(p, b, c), segment_distance(p, c, a)});
}

inline double brute_p2s(const std::vector<Vec3>& pts, const TriMesh& m) {
  double sum = 0.0;
  for (const Vec3& p : pts) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& f : m.faces)
      best = std::min(best, triangle_distance(p, m.vertices[f[0]], m.vertices[f[1]], m.vertices[f[2]]));
    sum += best;
  }
  return sum / pts.size();
}

}  // namespace oracles
