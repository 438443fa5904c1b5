#pragma once

#include <map>
#include <tuple>

#include "sewkit/mesh.hpp"

namespace meshes {

// Surface of the unit cube, n x n quads per face, each split along the
// diagonal through its (0, 0) corner.
inline sewkit::TriMesh cube(int n) {
  using sewkit::Vec3;
  sewkit::TriMesh m;
  std::map<std::tuple<int, int, int>, int> index;
  auto vertex = [&](int x, int y, int z) {
    auto [it, fresh] = index.try_emplace({x, y, z}, m.vertex_count());
    if (fresh) {
      m.vertices.push_back(Vec3(x, y, z) / n);
      m.panel_of_vertex.push_back(0);
    }
    return it->second;
  };
  for (int axis = 0; axis < 3; ++axis) {
    for (int side : {0, n}) {
      for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
          auto at = [&](int u, int v) {
            int c[3];
            c[axis] = side;
            c[(axis + 1) % 3] = u;
            c[(axis + 2) % 3] = v;
            return vertex(c[0], c[1], c[2]);
          };
          const int p00 = at(a, b), p10 = at(a + 1, b), p11 = at(a + 1, b + 1), p01 = at(a, b + 1);
          m.faces.push_back({p00, p10, p11});
          m.faces.push_back({p00, p11, p01});
          m.face_panel.push_back(0);
          m.face_panel.push_back(0);
        }
      }
    }
  }
  m.panel_names = {"cube"};
  return m;
}

inline int cube_corner(const sewkit::TriMesh& m, const sewkit::Vec3& c) {
  for (int i = 0; i < m.vertex_count(); ++i)
    if ((m.vertices[i] - c).norm() < 1e-12) return i;
  return -1;
}

// Regular grid sheet of w x h quads at spacing `step`, z = 0.
inline sewkit::TriMesh sheet(int w, int h, double step) {
  sewkit::TriMesh m;
  for (int i = 0; i <= h; ++i)
    for (int j = 0; j <= w; ++j) {
      m.vertices.push_back(sewkit::Vec3(j * step, i * step, 0));
      m.panel_of_vertex.push_back(0);
    }
  auto id = [w](int i, int j) { return i * (w + 1) + j; };
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      m.faces.push_back({id(i, j), id(i, j + 1), id(i + 1, j + 1)});
      m.faces.push_back({id(i, j), id(i + 1, j + 1), id(i + 1, j)});
      m.face_panel.push_back(0);
      m.face_panel.push_back(0);
    }
  m.panel_names = {"sheet"};
  return m;
}

}  // namespace meshes
