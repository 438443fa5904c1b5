#include <gtest/gtest.h>

#include <cmath>

#include "sewkit/losses.hpp"
#include "sewkit/random.hpp"

using namespace sewkit;

namespace {

MaskMap full_mask(int rows, int cols, int margin = 1) {
  MaskMap m;
  m.frame.rows = rows;
  m.frame.cols = cols;
  m.occupied.setZero(rows, cols);
  m.occupied.block(margin, margin, rows - 2 * margin, cols - 2 * margin).setOnes();
  return m;
}

// Flat isometric sheet: pixel (i, j) at (j s, i s, 0).
PositionMap flat_map(int rows, int cols, double s, double scale = 1.0) {
  PositionMap y(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) y.at(i, j) << scale * j * s, scale * i * s, 0.0;
  return y;
}

PositionMap random_map(int rows, int cols, Rng& rng, double amplitude) {
  PositionMap y(rows, cols);
  for (Eigen::Index p = 0; p < y.pixels(); ++p)
    for (int c = 0; c < 3; ++c) y.values(p, c) = amplitude * rng.normal();
  return y;
}

// Smooth bumpy sheet, normals well defined everywhere.
PositionMap smooth_map(int rows, int cols, Rng& rng) {
  const double a = rng.uniform(0.5, 1.5), b = rng.uniform(0.5, 1.5);
  const double fx = rng.uniform(0.1, 0.4), fy = rng.uniform(0.1, 0.4);
  PositionMap y(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      y.at(i, j) << 1.5 * j + 0.2 * std::sin(fy * i), 1.5 * i + 0.2 * std::cos(fx * j),
          a * std::sin(fx * j) + b * std::cos(fy * i);
  return y;
}

}  // namespace

TEST(LossRec, ZeroWhenEqual) {
  Rng rng(1);
  std::vector<PositionMap> y{random_map(8, 8, rng, 3.0)};
  std::vector<MaskMap> m{full_mask(8, 8)};
  EXPECT_EQ(loss_rec(y, y, m).value, 0.0);
}

TEST(LossRec, UniformOffsetGivesOne) {
  Rng rng(2);
  std::vector<PositionMap> target{random_map(8, 8, rng, 3.0)};
  std::vector<PositionMap> y = target;
  y[0].values.col(0).array() += 1.0;
  std::vector<MaskMap> m{full_mask(8, 8)};
  EXPECT_NEAR(loss_rec(y, target, m).value, 1.0, 1e-12);
}

TEST(LossRec, GradientZeroOutsideMask) {
  Rng rng(3);
  std::vector<PositionMap> y{random_map(8, 8, rng, 3.0)}, t{random_map(8, 8, rng, 3.0)};
  std::vector<MaskMap> m{full_mask(8, 8, 2)};
  const LossValue v = loss_rec(y, t, m);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j)
      if (!m[0].inside(i, j)) EXPECT_EQ(v.gradient[0].at(i, j).squaredNorm(), 0.0);
}

TEST(LossRec, EmptyMaskThrows) {
  std::vector<PositionMap> y{PositionMap(4, 4)};
  MaskMap m = full_mask(4, 4);
  m.occupied.setZero();
  std::vector<MaskMap> masks{m};
  EXPECT_THROW(loss_rec(y, y, masks), Error);
}

TEST(LossInn, IsometricSheetIsZero) {
  std::vector<PositionMap> y{flat_map(10, 10, 1.5)};
  std::vector<MaskMap> m{full_mask(10, 10)};
  EXPECT_NEAR(loss_inn(y, m, 1.5).value, 0.0, 1e-12);
}

TEST(LossInn, DoubledSheetGivesS) {
  std::vector<PositionMap> y{flat_map(10, 10, 1.5, 2.0)};
  std::vector<MaskMap> m{full_mask(10, 10)};
  EXPECT_NEAR(loss_inn(y, m, 1.5).value, 1.5, 1e-12);
}

TEST(LossInn, RigidInvariance) {
  Rng rng(4);
  std::vector<PositionMap> y{random_map(10, 10, rng, 2.0)};
  std::vector<MaskMap> m{full_mask(10, 10)};
  const double before = loss_inn(y, m).value;
  const Eigen::Matrix3d r = Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
  std::vector<PositionMap> z = y;
  for (Eigen::Index p = 0; p < z[0].pixels(); ++p)
    z[0].values.row(p) = (r * y[0].point(p) + Vec3(4, -2, 9)).transpose();
  EXPECT_NEAR(loss_inn(z, m).value, before, 1e-12);
}

TEST(LossInn, NoPairsThrows) {
  std::vector<PositionMap> y{PositionMap(5, 5)};
  MaskMap m = full_mask(5, 5);
  m.occupied.setZero();
  m.occupied(2, 2) = 1;
  std::vector<MaskMap> masks{m};
  EXPECT_THROW(loss_inn(y, masks), Error);
}

namespace {

// Two flat 6x6 panels side by side, stitched along the shared edge.
struct TwoPanels {
  GarmentOutline outline;
  std::vector<MaskMap> masks;
  std::vector<PositionMap> maps;
};

TwoPanels two_panels(double gap_z) {
  TwoPanels tp;
  auto square = [](const std::string& id) {
    PanelOutline p;
    p.id = id;
    const double w = 9.0;
    p.edges = {resample_polyline({Vec2(0, 0), Vec2(w, 0)}, 5), resample_polyline({Vec2(w, 0), Vec2(w, w)}, 5),
               resample_polyline({Vec2(w, w), Vec2(0, w)}, 5), resample_polyline({Vec2(0, w), Vec2(0, 0)}, 5)};
    return p;
  };
  tp.outline.panels = {square("a"), square("b")};
  tp.outline.stitches = {{{"a", 1}, {"b", 3}, true}};
  for (const auto& p : tp.outline.panels) {
    const Polyline2 c = p.contour();
    tp.masks.push_back(rasterize_mask(c, centered_frame(c, 1.5, 12, 12), p.id));
  }
  for (int t = 0; t < 2; ++t) {
    PositionMap y(12, 12);
    for (int i = 0; i < 12; ++i)
      for (int j = 0; j < 12; ++j) {
        const Vec2 q = tp.masks[t].frame.pixel_center(i, j);
        y.at(i, j) << q.x() + 9.0 * t, q.y(), t == 1 ? gap_z : 0.0;
      }
    tp.maps.push_back(y);
  }
  return tp;
}

}  // namespace

TEST(LossInt, CoincidentSeamIsZero) {
  TwoPanels tp = two_panels(0.0);
  StitchSampler s(tp.outline, tp.masks);
  EXPECT_EQ(s.pairs().size(), 5u);
  EXPECT_NEAR(loss_int(tp.maps, s).value, 0.0, 1e-12);
}

TEST(LossInt, OffsetSeamGivesD) {
  TwoPanels tp = two_panels(0.37);
  StitchSampler s(tp.outline, tp.masks);
  EXPECT_NEAR(loss_int(tp.maps, s).value, 0.37, 1e-12);
}

TEST(LossInt, EdgeLeavingMapThrows) {
  TwoPanels tp = two_panels(0.0);
  tp.masks[1].frame.offset.x() += 20.0;
  EXPECT_THROW(StitchSampler(tp.outline, tp.masks), Error);
}

// L1 pair distances are only invariant under signed axis permutations, so
// the rotation here is a quarter turn.
TEST(LossInt, TranslationAndQuarterTurnInvariance) {
  TwoPanels tp = two_panels(0.0);
  Rng rng(9);
  for (auto& y : tp.maps) y.values += 0.3 * random_map(12, 12, rng, 1.0).values;
  StitchSampler s(tp.outline, tp.masks);
  const double before = loss_int(tp.maps, s).value;
  Eigen::Matrix3d r;
  r << 0, 0, 1, 0, 1, 0, -1, 0, 0;  // quarter turn about y, exact
  for (auto& y : tp.maps)
    for (Eigen::Index p = 0; p < y.pixels(); ++p) y.values.row(p) = (r * y.point(p) + Vec3(-3, 7, 0.5)).transpose();
  EXPECT_NEAR(loss_int(tp.maps, s).value, before, 1e-12);
}

TEST(LossNor, RigidInvarianceWithRotatedTargets) {
  Rng rng(10);
  std::vector<MaskMap> m{full_mask(12, 12)};
  std::vector<PositionMap> y{smooth_map(12, 12, rng)};
  std::vector<NormalMap> t{compute_normals(smooth_map(12, 12, rng), m[0])};
  const double before = loss_nor(y, t, m).value;
  const Eigen::Matrix3d r = Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
  for (Eigen::Index p = 0; p < y[0].pixels(); ++p) {
    y[0].values.row(p) = (r * y[0].point(p) + Vec3(4, -2, 9)).transpose();
    t[0].values.row(p) = (r * t[0].values.row(p).transpose()).transpose();
  }
  EXPECT_NEAR(loss_nor(y, t, m).value, before, 1e-12);
}

TEST(LossNor, AlignedIsMinusOneAndPerpendicularIsZero) {
  std::vector<PositionMap> y{flat_map(10, 10, 1.5)};
  std::vector<MaskMap> m{full_mask(10, 10)};
  // -(x_u x y_v) for the flat sheet points along -z
  NormalMap n(10, 10);
  for (Eigen::Index p = 0; p < n.pixels(); ++p) n.values.row(p) << 0, 0, -1;
  std::vector<NormalMap> targets{n};
  EXPECT_NEAR(loss_nor(y, targets, m).value, -1.0, 1e-12);
  for (Eigen::Index p = 0; p < n.pixels(); ++p) targets[0].values.row(p) << 1, 0, 0;
  EXPECT_NEAR(loss_nor(y, targets, m).value, 0.0, 1e-12);
}

TEST(LossNor, AllSentinelThrows) {
  std::vector<PositionMap> y{flat_map(6, 6, 1.5)};
  std::vector<MaskMap> m{full_mask(6, 6)};
  std::vector<NormalMap> n{NormalMap(6, 6)};
  EXPECT_THROW(loss_nor(y, n, m), Error);
}

TEST(LossTotal, ZeroWeightsAndRecOnly) {
  Rng rng(5);
  TwoPanels tp = two_panels(0.2);
  StitchSampler s(tp.outline, tp.masks);
  LossTargets targets;
  targets.masks = tp.masks;
  for (int t = 0; t < 2; ++t) {
    targets.positions.push_back(random_map(12, 12, rng, 1.0));
    targets.normals.push_back(compute_normals(tp.maps[t], tp.masks[t]));
  }
  const LossReport zero = loss_total(tp.maps, targets, s, {0, 0, 0, 0});
  EXPECT_EQ(zero.total, 0.0);
  for (const auto& g : zero.gradient) EXPECT_EQ(g.values.squaredNorm(), 0.0);

  const LossReport rec = loss_total(tp.maps, targets, s, {1, 0, 0, 0});
  EXPECT_EQ(rec.total, loss_rec(tp.maps, targets.positions, tp.masks).value);

  const LossWeights w;
  const LossReport all = loss_total(tp.maps, targets, s, w);
  const double expect = w.rec * all.rec + w.inn * all.inn + w.inter * all.inter + w.nor * all.nor;
  EXPECT_NEAR(all.total, expect, 1e-12 * std::abs(expect));
  // linear in the weights
  const LossReport twice = loss_total(tp.maps, targets, s, {2 * w.rec, 2 * w.inn, 2 * w.inter, 2 * w.nor});
  EXPECT_NEAR(twice.total, 2 * all.total, 1e-12 * std::abs(all.total));
}

TEST(FiniteDiff, ExactOnQuadratic) {
  Rng rng(6);
  std::vector<PositionMap> y{random_map(8, 8, rng, 1.0)};
  std::vector<MaskMap> m{full_mask(8, 8)};
  LossFunction quad = [](std::span<const PositionMap> maps) {
    LossValue v{0.0, {maps[0]}};
    v.value = 0.5 * maps[0].values.squaredNorm();
    return v;
  };
  const auto support = masked_pixels(m);
  const FiniteDiffResult r = finite_diff_check(quad, y, support, {1e-3, 200, 1});
  EXPECT_EQ(r.checked, 108);
  EXPECT_LT(r.max_relative_error, 1e-8);
}

TEST(FiniteDiff, LossInnOnRandomMaps) {
  Rng rng(7);
  std::vector<PositionMap> y{random_map(16, 16, rng, 3.0)};
  std::vector<MaskMap> m{full_mask(16, 16)};
  LossFunction f = [&](std::span<const PositionMap> maps) { return loss_inn(maps, m); };
  const auto r = finite_diff_check(f, y, masked_pixels(m), {1e-3, 200, 7}, kink_distance_inn(m));
  EXPECT_GE(r.checked, 150);
  EXPECT_LT(r.max_relative_error, 1e-4);
}

TEST(FiniteDiff, LossNorOnSmoothMaps) {
  Rng rng(8);
  std::vector<PositionMap> y{smooth_map(16, 16, rng)};
  std::vector<MaskMap> m{full_mask(16, 16)};
  PositionMap other = smooth_map(16, 16, rng);
  std::vector<NormalMap> n{compute_normals(other, m[0])};
  LossFunction f = [&](std::span<const PositionMap> maps) { return loss_nor(maps, n, m); };
  const auto r = finite_diff_check(f, y, masked_pixels(m), {1e-3, 200, 8});
  EXPECT_EQ(r.checked, 200);
  EXPECT_LT(r.max_relative_error, 1e-3);
}

TEST(FiniteDiff, LossIntOnRandomMaps) {
  Rng rng(9);
  TwoPanels tp = two_panels(0.0);
  for (auto& y : tp.maps) y = random_map(12, 12, rng, 2.0);
  StitchSampler s(tp.outline, tp.masks);
  LossFunction f = [&](std::span<const PositionMap> maps) { return loss_int(maps, s); };
  const auto r = finite_diff_check(f, tp.maps, s.support(), {1e-3, 200, 9}, kink_distance_int(s));
  EXPECT_GT(r.checked, 0);
  EXPECT_LT(r.max_relative_error, 1e-4);
}
