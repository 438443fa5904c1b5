#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "sewkit/mesh.hpp"
#include "sewkit/random.hpp"

using namespace sewkit;

namespace {

PanelOutline square_panel(const std::string& id, double side, int k) {
  PanelOutline p;
  p.id = id;
  const Vec2 c[4] = {{0, 0}, {side, 0}, {side, side}, {0, side}};
  for (int i = 0; i < 4; ++i) p.edges.push_back(resample_polyline({c[i], c[(i + 1) % 4]}, k));
  return p;
}

// Flat maps: panel t sits at z = 10 t, identity in x, y.
struct Flat {
  GarmentOutline outline;
  std::vector<MaskMap> masks;
  std::vector<PositionMap> maps;
};

Flat flat(GarmentOutline o) {
  Flat f;
  f.outline = std::move(o);
  f.masks = rasterize_outline(f.outline);
  for (std::size_t t = 0; t < f.masks.size(); ++t) {
    const MaskMap& m = f.masks[t];
    PositionMap y(m.rows(), m.cols(), m.panel_id);
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < m.cols(); ++j) {
        const Vec2 p = m.frame.pixel_center(i, j);
        y.at(i, j) << p.x(), p.y(), 10.0 * t;
      }
    f.maps.push_back(std::move(y));
  }
  return f;
}

Vec3 face_normal(const TriMesh& m, int f) {
  const auto& t = m.faces[f];
  return (m.vertices[t[1]] - m.vertices[t[0]]).cross(m.vertices[t[2]] - m.vertices[t[0]]);
}

}  // namespace

TEST(Triangulate, CoversPolygon) {
  const Polyline2 boundary{{0, 0}, {6, 0}, {6, 2}, {3, 1}, {0, 4}};
  const Polyline2 inner{{1, 1}, {4.5, 0.8}};
  const auto tris = triangulate_polygon(boundary, inner);
  std::vector<Vec2> pts = boundary;
  pts.insert(pts.end(), inner.begin(), inner.end());
  EXPECT_EQ(tris.size(), boundary.size() - 2 + 2 * inner.size());
  double area = 0.0;
  for (const auto& t : tris) {
    const Vec2 a = pts[t[0]], b = pts[t[1]], c = pts[t[2]];
    const double s = 0.5 * ((b - a).x() * (c - a).y() - (b - a).y() * (c - a).x());
    EXPECT_GT(s, 0.0);
    area += s;
  }
  EXPECT_NEAR(area, polygon_area(boundary), 1e-12);
}

TEST(Readout, SquareIsADisk) {
  GarmentOutline o;
  o.panels.push_back(square_panel("sq", 30, 20));
  const Flat f = flat(o);
  const TriMesh m = readout_mesh(f.maps, f.masks, f.outline, 20);
  EXPECT_EQ(euler_characteristic(m), 1);
  EXPECT_TRUE(mesh_violations(m).empty());
  // Interior pixel centres plus the shared-corner boundary.
  int inner = 0;
  for (int i = 0; i < f.masks[0].rows(); ++i)
    for (int j = 0; j < f.masks[0].cols(); ++j) inner += f.masks[0].inside(i, j);
  EXPECT_EQ(m.vertex_count(), inner + 4 * 19);
}

TEST(Readout, FlatMapsGiveParallelNormals) {
  GarmentOutline o;
  o.panels.push_back(square_panel("sq", 24, 12));
  const Flat f = flat(o);
  const TriMesh m = readout_mesh(f.maps, f.masks, f.outline, 12);
  for (int k = 0; k < m.face_count(); ++k) {
    const Vec3 n = face_normal(m, k).normalized();
    EXPECT_LT(n.head<2>().norm(), 1e-9);
  }
}

TEST(Readout, SeamBandOfTwoPanels) {
  GarmentOutline o;
  o.panels.push_back(square_panel("a", 20, 10));
  o.panels.push_back(square_panel("b", 20, 10));
  o.stitches.push_back({{"a", 1}, {"b", 3}, true});
  const Flat f = flat(o);
  const TriMesh m = readout_mesh(f.maps, f.masks, f.outline, 10);
  ASSERT_EQ(m.seam_bands.size(), 1u);
  const SeamBand& band = m.seam_bands[0];
  EXPECT_EQ(band.face_count, 18);
  ASSERT_EQ(band.pairs.size(), 10u);
  std::set<int> left, right;
  for (const auto& [x, y] : band.pairs) {
    left.insert(x);
    right.insert(y);
    EXPECT_EQ(m.panel_of_vertex[x], 0);
    EXPECT_EQ(m.panel_of_vertex[y], 1);
  }
  EXPECT_EQ(left.size(), 10u);
  EXPECT_EQ(right.size(), 10u);
  for (int k = band.first_face; k < band.first_face + band.face_count; ++k) EXPECT_EQ(m.face_panel[k], -1);
  EXPECT_TRUE(mesh_violations(m).empty());
  // two disks glued along one strip: still a disk
  EXPECT_EQ(euler_characteristic(m), 1);
}

TEST(Readout, ViolationsDetectBrokenMesh) {
  GarmentOutline o;
  o.panels.push_back(square_panel("sq", 20, 10));
  const Flat f = flat(o);
  TriMesh m = readout_mesh(f.maps, f.masks, f.outline, 10);
  m.faces.push_back(m.faces.front());
  m.face_panel.push_back(0);
  m.faces.push_back(m.faces.front());
  m.face_panel.push_back(0);
  EXPECT_FALSE(mesh_violations(m).empty());
}

TEST(Export, SingleTriangle) {
  TriMesh m;
  m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0.5)};
  m.faces = {{0, 1, 2}};
  m.face_panel = {0};
  m.panel_of_vertex = {0, 0, 0};
  m.panel_names = {"t"};
  const std::string text = export_mesh(m);
  int v = 0, fl = 0;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    v += line.rfind("v ", 0) == 0;
    fl += line.rfind("f ", 0) == 0;
  }
  EXPECT_EQ(v, 3);
  EXPECT_EQ(fl, 1);
}

TEST(Export, Roundtrip) {
  GarmentOutline o;
  o.panels.push_back(square_panel("a", 20, 10));
  o.panels.push_back(square_panel("b", 20, 10));
  o.stitches.push_back({{"a", 1}, {"b", 3}, true});
  const Flat f = flat(o);
  const TriMesh m = readout_mesh(f.maps, f.masks, f.outline, 10);
  const TriMesh back = parse_mesh(export_mesh(m));
  ASSERT_EQ(back.vertex_count(), m.vertex_count());
  ASSERT_EQ(back.face_count(), m.face_count());
  for (int i = 0; i < m.vertex_count(); ++i) EXPECT_LT((back.vertices[i] - m.vertices[i]).norm(), 1e-5);
  EXPECT_EQ(back.faces, m.faces);
}

TEST(Export, ParsesPolygonsAndSlashes) {
  const TriMesh m = parse_mesh("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvt 0 0\nf 1/1 2/1 3/1 4/1\n");
  EXPECT_EQ(m.vertex_count(), 4);
  EXPECT_EQ(m.face_count(), 2);
}
