#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "fixture.hpp"
#include "sewkit/losses.hpp"
#include "sewkit/random.hpp"
#include "sewkit/uv_field.hpp"

using namespace sewkit;

namespace {

Polyline2 rect(double w, double h, Vec2 o = Vec2::Zero()) {
  return {o, o + Vec2(w, 0), o + Vec2(w, h), o + Vec2(0, h)};
}

GarmentOutline one_panel(const Polyline2& corners, const std::string& id = "p") {
  PanelOutline p;
  p.id = id;
  const int n = static_cast<int>(corners.size());
  for (int i = 0; i < n; ++i) p.edges.push_back(resample_polyline({corners[i], corners[(i + 1) % n]}, 20));
  GarmentOutline o;
  o.panels.push_back(p);
  return o;
}

MaskMap full_mask(int rows, int cols) {
  MaskMap m;
  m.frame.rows = rows;
  m.frame.cols = cols;
  m.occupied.setZero(rows, cols);
  m.occupied.block(1, 1, rows - 2, cols - 2).setOnes();
  return m;
}

double angle(const Vec3& a, const Vec3& b) { return std::atan2(a.cross(b).norm(), a.dot(b)); }

}  // namespace

TEST(Rasterize, SquareMatchesPerPixelOracle) {
  const std::vector<Polyline2> c{rect(30, 30)};
  const MaskMap m = rasterize_masks(c)[0];
  int expected = 0;
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      const Vec2 p = m.frame.pixel_center(i, j);
      const bool inside = p.x() > 0 && p.x() < 30 && p.y() > 0 && p.y() < 30;
      expected += inside;
      EXPECT_EQ(m.inside(i, j), inside) << i << "," << j;
    }
  }
  EXPECT_EQ(expected, 400);
  EXPECT_EQ(m.count(), 400);
}

TEST(Rasterize, ZeroAreaContour) {
  const std::vector<Polyline2> c{{Vec2(0, 0), Vec2(10, 0), Vec2(20, 0)}};
  EXPECT_THROW(rasterize_masks(c), Error);
}

TEST(Rasterize, PanelExceedsMap) {
  const std::vector<Polyline2> c{rect(200, 20)};
  try {
    rasterize_masks(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "panel-exceeds-map");
  }
}

TEST(Rasterize, AreaConverges) {
  // Circle of radius 20 cm: about 560 pixels.
  Polyline2 circle;
  for (int k = 0; k < 400; ++k) {
    const double t = 2 * std::numbers::pi * k / 400;
    circle.push_back(Vec2(20 * std::cos(t), 20 * std::sin(t)));
  }
  const std::vector<Polyline2> c{circle};
  const MaskMap m = rasterize_masks(c)[0];
  const double area = polygon_area(circle);
  EXPECT_LT(std::abs(m.count() * 1.5 * 1.5 - area) / area, 0.02);
  EXPECT_TRUE(mask_connected(m));
}

TEST(Bilinear, Cases) {
  PositionMap y(4, 5);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 5; ++j) y.at(i, j) << 2.0 * j - i, 0.5 * i + 3, std::sin(i + 2.0 * j);
  EXPECT_EQ(bilinear_sample(y, Vec2(2, 1)), y.point(y.index(1, 2)));
  const Vec3 mean = 0.25 * (y.point(y.index(1, 1)) + y.point(y.index(1, 2)) + y.point(y.index(2, 1)) +
                            y.point(y.index(2, 2)));
  EXPECT_NEAR(bilinear_sample(y, Vec2(1.5, 1.5)).head<2>().x(), mean.x(), 1e-12);
  EXPECT_NEAR(bilinear_sample(y, Vec2(1.5, 1.5)).y(), mean.y(), 1e-12);
  EXPECT_NEAR(bilinear_sample(y, Vec2(1.5, 1.5)).z(), mean.z(), 1e-12);
  EXPECT_THROW(bilinear_sample(y, Vec2(-0.1, 0)), Error);
  EXPECT_THROW(bilinear_sample(y, Vec2(0, 3.5)), Error);
  EXPECT_NO_THROW(bilinear_sample(y, Vec2(4, 3)));
}

TEST(Bilinear, ExactOnAffineFields) {
  Rng rng(5);
  PositionMap y(6, 7);
  Eigen::Matrix<double, 3, 2> a;
  a << 1.2, -0.3, 0.7, 2.0, -1.1, 0.4;
  const Vec3 b(3, -2, 1);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 7; ++j) y.at(i, j) = (a * Vec2(j, i) + b).transpose();
  for (int k = 0; k < 50; ++k) {
    const Vec2 uv(rng.uniform(0, 6), rng.uniform(0, 5));
    EXPECT_LT((bilinear_sample(y, uv) - (a * uv + b)).norm(), 1e-12);
  }
}

TEST(Normals, FlatSheetPointsDown) {
  PositionMap y(8, 8);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) y.at(i, j) << j, i, 4.0;
  const MaskMap m = full_mask(8, 8);
  const NormalMap n = compute_normals(y, m);
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      if (m.inside(i, j)) {
        EXPECT_LT((n.point(n.index(i, j)) - Vec3(0, 0, -1)).norm(), 1e-12);
      } else {
        EXPECT_EQ(n.point(n.index(i, j)), Vec3::Zero());
      }
    }
  }
}

TEST(Normals, CylinderIsRadial) {
  const double r = 20.0, s = kPixelPitch;
  PositionMap y(30, 30);
  for (int i = 0; i < 30; ++i) {
    for (int j = 0; j < 30; ++j) {
      const double t = j * s / r;
      y.at(i, j) << r * std::sin(t), i * s, r * std::cos(t);
    }
  }
  const MaskMap m = full_mask(30, 30);
  const NormalMap n = compute_normals(y, m);
  double worst = 0.0;
  for (int i = 1; i < 29; ++i) {
    for (int j = 1; j < 29; ++j) {
      // -(Y_u x Y_v) for this wrap is the inward radial direction.
      const double t = j * s / r;
      worst = std::max(worst, angle(n.point(n.index(i, j)), -Vec3(std::sin(t), 0, std::cos(t))));
    }
  }
  EXPECT_LT(worst, 2 * s / r);
}

TEST(Normals, TranslationInvariantRotationEquivariant) {
  Rng rng(6);
  PositionMap y(10, 10);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) y.at(i, j) << 1.5 * j, 1.5 * i, std::sin(0.3 * i) + 0.2 * rng.normal();
  const MaskMap m = full_mask(10, 10);
  const NormalMap n = compute_normals(y, m);
  const Eigen::Matrix3d rot = Eigen::AngleAxisd(1.1, Vec3(0.2, -1, 0.5).normalized()).toRotationMatrix();
  PositionMap z = y;
  for (Eigen::Index p = 0; p < z.pixels(); ++p) z.values.row(p) = (rot * y.point(p) + Vec3(5, 6, 7)).transpose();
  const NormalMap nz = compute_normals(z, m);
  for (Eigen::Index p = 0; p < n.pixels(); ++p) EXPECT_LT((nz.point(p) - rot * n.point(p)).norm(), 1e-12);
}

TEST(Bake, IdentityDrape) {
  const GarmentOutline o = one_panel(rect(30, 24));
  const auto baked = bake_ground_truth(o, [](const std::string&, const Vec2& p) {
    return std::optional<Vec3>(Vec3(p.x(), p.y(), 0));
  });
  ASSERT_EQ(baked.size(), 1u);
  const BakedPanel& b = baked[0];
  for (int i = 0; i < b.mask.rows(); ++i) {
    for (int j = 0; j < b.mask.cols(); ++j) {
      if (!b.mask.inside(i, j)) continue;
      const Vec2 p = b.mask.frame.pixel_center(i, j);
      EXPECT_EQ(b.positions.point(b.positions.index(i, j)), Vec3(p.x(), p.y(), 0));
    }
  }
}

TEST(Bake, CylinderWrapCloses) {
  const double r = 8.0, w = 2 * std::numbers::pi * r;
  const GarmentOutline o = one_panel(rect(w, 30));
  auto wrap = [r](const std::string&, const Vec2& p) {
    return std::optional<Vec3>(Vec3(r * std::sin(p.x() / r), p.y(), r * std::cos(p.x() / r)));
  };
  const auto baked = bake_ground_truth(o, wrap);
  const BakedPanel& b = baked[0];
  const std::vector<MaskMap> masks{b.mask};
  const std::vector<PositionMap> maps{b.positions};
  int rows_checked = 0;
  for (int i = 0; i < b.mask.rows(); ++i) {
    int first = -1, last = -1;
    for (int j = 0; j < b.mask.cols(); ++j) {
      if (!b.mask.inside(i, j)) continue;
      if (first < 0) first = j;
      last = j;
    }
    if (first < 0) continue;
    ++rows_checked;
    const double gap = (b.positions.point(b.positions.index(i, first)) - b.positions.point(b.positions.index(i, last))).norm();
    EXPECT_LT(gap, kPixelPitch);
  }
  EXPECT_GT(rows_checked, 10);
  EXPECT_LT(loss_inn(maps, masks).value, 1e-3 * kPixelPitch);
}

TEST(Bake, ConeIsNearIsometric) {
  // Sector of a cone with apex at the origin of the panel plane.
  const double slant0 = 40.0, slant1 = 70.0, phi = 0.9;
  Polyline2 c;
  for (int k = 0; k <= 20; ++k) {
    const double t = -phi / 2 + phi * k / 20;
    c.push_back(Vec2(slant1 * std::sin(t), -slant1 * std::cos(t) + 55));
  }
  for (int k = 20; k >= 0; --k) {
    const double t = -phi / 2 + phi * k / 20;
    c.push_back(Vec2(slant0 * std::sin(t), -slant0 * std::cos(t) + 55));
  }
  GarmentOutline o;
  PanelOutline p;
  p.id = "cone";
  p.edges = {c};
  o.panels.push_back(p);
  const double ratio = 0.6;  // circumference on the cone = ratio * sector arc
  auto cone = [&](const std::string&, const Vec2& q) {
    const Vec2 d = q - Vec2(0, 55);
    const double rho = d.norm();
    const double t = std::atan2(d.x(), -d.y());
    const double a = t / ratio, rad = rho * ratio, h = rho * std::sqrt(1 - ratio * ratio);
    return std::optional<Vec3>(Vec3(rad * std::sin(a), -h, rad * std::cos(a)));
  };
  const auto baked = bake_ground_truth(o, cone);
  const std::vector<MaskMap> masks{baked[0].mask};
  const std::vector<PositionMap> maps{baked[0].positions};
  EXPECT_LT(loss_inn(maps, masks).value, 1e-3 * kPixelPitch);
}

TEST(RingExtension, ExactOnAffineFieldAndAdjoint) {
  const GarmentOutline o = one_panel({Vec2(0, 0), Vec2(25, 3), Vec2(10, 20)});
  const MaskMap m = rasterize_outline(o)[0];
  const RingExtension ring(m);
  EXPECT_FALSE(ring.ring().empty());
  PositionMap y(m.rows(), m.cols());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j)
      if (m.inside(i, j)) y.at(i, j) << 0.5 * j - 2, 3.0 * i, 1.0 * i - 1.0 * j;
  ring.apply(y);
  for (const Eigen::Index p : ring.ring()) {
    const int i = int(p / m.cols()), j = int(p % m.cols());
    const Vec3 expected(0.5 * j - 2, 3.0 * i, 1.0 * i - 1.0 * j);
    EXPECT_LT((y.point(p) - expected).norm(), 1e-14 * expected.norm() + 1e-14);
  }

  Rng rng(7);
  PositionMap x(m.rows(), m.cols()), g(m.rows(), m.cols());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j)
      if (m.inside(i, j)) x.at(i, j) << rng.normal(), rng.normal(), rng.normal();
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j)
      if (m.inside(i, j)) g.at(i, j) << rng.normal(), rng.normal(), rng.normal();
  for (const Eigen::Index p : ring.ring()) g.values.row(p) << rng.normal(), rng.normal(), rng.normal();
  PositionMap ex = x;
  ring.apply(ex);
  PositionMap gt = g;
  ring.adjoint(gt);
  const double lhs = (ex.values.array() * g.values.array()).sum();
  const double rhs = (x.values.array() * gt.values.array()).sum();
  EXPECT_NEAR(lhs, rhs, 1e-10 * std::abs(lhs));
}

TEST(MapContainer, Roundtrip) {
  const GarmentOutline o = one_panel(rect(30, 24));
  const auto baked = bake_ground_truth(o, [](const std::string&, const Vec2& p) {
    return std::optional<Vec3>(Vec3(p.x(), 0.25 * p.y(), 1.0 / 3.0));
  });
  MapContainer c;
  c.masks.push_back(baked[0].mask);
  c.positions.push_back(baked[0].positions);
  std::stringstream buf;
  write_map_container(buf, c);
  const MapContainer back = read_map_container(buf);
  ASSERT_EQ(back.masks.size(), 1u);
  EXPECT_TRUE((back.masks[0].occupied == c.masks[0].occupied).all());
  EXPECT_EQ(back.masks[0].frame, c.masks[0].frame);
  EXPECT_EQ(back.masks[0].panel_id, "p");
  // positions are stored as f32
  EXPECT_LT((back.positions[0].values - c.positions[0].values).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(MapContainer, Truncated) {
  std::stringstream buf("SWKM");
  EXPECT_THROW(read_map_container(buf), Error);
}
