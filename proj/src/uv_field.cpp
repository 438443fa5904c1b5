#include "sewkit/uv_field.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "sewkit/binary_io.hpp"

namespace sewkit {

MapFrame centered_frame(const Polyline2& contour, double pitch, int rows, int cols) {
  if (contour.empty()) throw Error("degenerate-contour", "empty contour");
  Vec2 lo = contour.front();
  Vec2 hi = contour.front();
  for (const Vec2& p : contour) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec2 center = 0.5 * (lo + hi);
  MapFrame frame;
  frame.rows = rows;
  frame.cols = cols;
  frame.pitch = pitch;
  frame.offset = Vec2(0.5 * (cols - 1) - std::round(center.x() / pitch),
                      0.5 * (rows - 1) - std::round(center.y() / pitch));
  return frame;
}

bool mask_connected(const MaskMap& mask) {
  const int rows = mask.rows();
  const int cols = mask.cols();
  Eigen::Index total = mask.count();
  if (total == 0) return false;
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(rows) * cols, 0);
  std::vector<std::pair<int, int>> stack;
  for (int i = 0; i < rows && stack.empty(); ++i) {
    for (int j = 0; j < cols; ++j) {
      if (mask.inside(i, j)) {
        stack.emplace_back(i, j);
        seen[mask.index(i, j)] = 1;
        break;
      }
    }
  }
  Eigen::Index reached = 0;
  while (!stack.empty()) {
    const auto [i, j] = stack.back();
    stack.pop_back();
    ++reached;
    constexpr int di[4] = {1, -1, 0, 0};
    constexpr int dj[4] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const int ni = i + di[k];
      const int nj = j + dj[k];
      if (mask.inside(ni, nj) && !seen[mask.index(ni, nj)]) {
        seen[mask.index(ni, nj)] = 1;
        stack.emplace_back(ni, nj);
      }
    }
  }
  return reached == total;
}

MaskMap rasterize_mask(const Polyline2& contour, const MapFrame& frame, std::string panel_id) {
  if (contour.size() < 3 || std::abs(polygon_area(contour)) < 1e-12) {
    throw Error("degenerate-contour", "contour of " + panel_id + " has zero area");
  }
  Vec2 lo(std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity());
  Vec2 hi = -lo;
  for (const Vec2& p : contour) {
    const Vec2 g = frame.to_grid(p);
    if (!g.allFinite() || g.x() < 0.0 || g.y() < 0.0 || g.x() > frame.cols - 1 || g.y() > frame.rows - 1) {
      throw Error("panel-exceeds-map", "panel " + panel_id + " does not fit in the map");
    }
    lo = lo.cwiseMin(g);
    hi = hi.cwiseMax(g);
  }
  MaskMap mask;
  mask.panel_id = std::move(panel_id);
  mask.frame = frame;
  mask.occupied.setZero(frame.rows, frame.cols);
  const int i0 = std::max(0, static_cast<int>(std::floor(lo.y())));
  const int i1 = std::min(frame.rows - 1, static_cast<int>(std::ceil(hi.y())));
  const int j0 = std::max(0, static_cast<int>(std::floor(lo.x())));
  const int j1 = std::min(frame.cols - 1, static_cast<int>(std::ceil(hi.x())));
  for (int i = i0; i <= i1; ++i) {
    for (int j = j0; j <= j1; ++j) {
      if (point_in_panel(contour, frame.pixel_center(i, j))) mask.occupied(i, j) = 1;
    }
  }
  if (mask.count() == 0) {
    throw Error("degenerate-contour", "panel " + mask.panel_id + " covers no pixel centre");
  }
  const bool border = mask.occupied.row(0).any() || mask.occupied.row(frame.rows - 1).any() ||
                      mask.occupied.col(0).any() || mask.occupied.col(frame.cols - 1).any();
  if (border) throw Error("panel-exceeds-map", "panel " + mask.panel_id + " touches the map border");
  if (!mask_connected(mask)) {
    throw Error("mask-disconnected", "panel " + mask.panel_id + " rasterises to several components");
  }
  return mask;
}

std::vector<MaskMap> rasterize_masks(std::span<const Polyline2> contours, double pitch, int rows, int cols) {
  std::vector<MaskMap> out;
  out.reserve(contours.size());
  for (std::size_t t = 0; t < contours.size(); ++t) {
    out.push_back(rasterize_mask(contours[t], centered_frame(contours[t], pitch, rows, cols),
                                 "panel-" + std::to_string(t)));
  }
  return out;
}

std::vector<MaskMap> rasterize_outline(const GarmentOutline& outline, double pitch, int rows, int cols) {
  std::vector<MaskMap> out;
  out.reserve(outline.panels.size());
  for (const PanelOutline& p : outline.panels) {
    const Polyline2 contour = p.contour();
    out.push_back(rasterize_mask(contour, centered_frame(contour, pitch, rows, cols), p.id));
  }
  return out;
}

BilinearStencil bilinear_stencil(const Vec2& uv, int rows, int cols) {
  const double u = uv.x();
  const double v = uv.y();
  if (!(u >= 0.0 && v >= 0.0 && u <= cols - 1 && v <= rows - 1)) {
    throw Error("uv-out-of-range", "bilinear sample outside the grid");
  }
  const int j0 = std::min(static_cast<int>(std::floor(u)), cols - 2);
  const int i0 = std::min(static_cast<int>(std::floor(v)), rows - 2);
  const double tu = u - j0;
  const double tv = v - i0;
  const Eigen::Index base = static_cast<Eigen::Index>(i0) * cols + j0;
  BilinearStencil s;
  s.index = {base, base + 1, base + cols, base + cols + 1};
  s.weight = {(1.0 - tu) * (1.0 - tv), tu * (1.0 - tv), (1.0 - tu) * tv, tu * tv};
  return s;
}

namespace {

std::optional<AxisStencil> axis_stencil(const MaskMap& mask, int row, int col, int drow, int dcol) {
  if (!mask.inside(row, col)) return std::nullopt;
  const bool fwd = mask.inside(row + drow, col + dcol);
  const bool back = mask.inside(row - drow, col - dcol);
  const Eigen::Index here = mask.index(row, col);
  if (fwd && back) return AxisStencil{mask.index(row + drow, col + dcol), mask.index(row - drow, col - dcol), 0.5};
  if (fwd) return AxisStencil{mask.index(row + drow, col + dcol), here, 1.0};
  if (back) return AxisStencil{here, mask.index(row - drow, col - dcol), 1.0};
  return std::nullopt;
}

}  // namespace

std::optional<AxisStencil> u_stencil(const MaskMap& mask, int row, int col) {
  return axis_stencil(mask, row, col, 0, 1);
}

std::optional<AxisStencil> v_stencil(const MaskMap& mask, int row, int col) {
  return axis_stencil(mask, row, col, 1, 0);
}

NormalMap compute_normals(const PositionMap& positions, const MaskMap& mask) {
  if (positions.rows != mask.rows() || positions.cols != mask.cols()) {
    throw Error("shape-mismatch", "position map and mask differ in shape");
  }
  NormalMap normals(positions.rows, positions.cols, positions.panel_id);
  for (int i = 0; i < mask.rows(); ++i) {
    for (int j = 0; j < mask.cols(); ++j) {
      const auto su = u_stencil(mask, i, j);
      const auto sv = v_stencil(mask, i, j);
      if (!su || !sv) continue;
      const Vec3 du = su->scale * (positions.point(su->plus) - positions.point(su->minus));
      const Vec3 dv = sv->scale * (positions.point(sv->plus) - positions.point(sv->minus));
      const Vec3 c = -du.cross(dv);
      const double n = c.norm();
      if (n < kNormalDegeneracy) continue;
      normals.at(i, j) = (c / n).transpose();
    }
  }
  return normals;
}

// --- ring extension ---------------------------------------------------------------

RingExtension::RingExtension(const MaskMap& mask, int layers) {
  constexpr int di[8] = {-1, -1, -1, 0, 0, 1, 1, 1};
  constexpr int dj[8] = {-1, 0, 1, -1, 1, -1, 0, 1};
  const int rows = mask.rows();
  const int cols = mask.cols();
  // pixels with a value: the mask first, then each finished layer
  Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> known = mask.occupied;
  auto has = [&](int i, int j) { return i >= 0 && j >= 0 && i < rows && j < cols && known(i, j) != 0; };
  // Least-squares plane through the known pixels of the 5x5 window, read at
  // (i, j). Empty when they are collinear.
  auto affine_fit = [&](int i, int j) {
    std::vector<Term> terms;
    std::vector<Eigen::Vector3d> rows_a;
    for (int a = -2; a <= 2; ++a) {
      for (int b = -2; b <= 2; ++b) {
        if (!has(i + a, j + b)) continue;
        terms.push_back({mask.index(i + a, j + b), 0.0});
        rows_a.emplace_back(1.0, a, b);
      }
    }
    Eigen::MatrixXd A(rows_a.size(), 3);
    for (std::size_t r = 0; r < rows_a.size(); ++r) A.row(r) = rows_a[r].transpose();
    const Eigen::Matrix3d normal = A.transpose() * A;
    const Eigen::FullPivLU<Eigen::Matrix3d> lu(normal);
    if (lu.rank() < 3) return std::vector<Term>{};
    const Eigen::VectorXd w = A * lu.solve(Eigen::Vector3d::UnitX());
    for (std::size_t r = 0; r < terms.size(); ++r) terms[r].coefficient = w(r);
    return terms;
  };
  for (int layer = 0; layer < layers; ++layer) {
    std::vector<Eigen::Index> added;
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) {
        if (has(i, j)) continue;
        std::vector<Term> linear;
        std::vector<Term> constant;
        for (int k = 0; k < 8; ++k) {
          const int ni = i + di[k];
          const int nj = j + dj[k];
          if (!has(ni, nj)) continue;
          constant.push_back({mask.index(ni, nj), 1.0});
          if (has(ni + di[k], nj + dj[k])) {
            linear.push_back({mask.index(ni, nj), 2.0});
            linear.push_back({mask.index(ni + di[k], nj + dj[k]), -1.0});
          }
        }
        if (constant.empty()) continue;
        std::vector<Term> terms;
        if (!linear.empty()) {
          terms = std::move(linear);
          for (Term& t : terms) t.coefficient *= 2.0 / static_cast<double>(terms.size());
        } else if (auto fit = affine_fit(i, j); !fit.empty()) {
          terms = std::move(fit);
        } else {
          terms = std::move(constant);
          for (Term& t : terms) t.coefficient /= static_cast<double>(terms.size());
        }
        targets_.push_back(mask.index(i, j));
        terms_.push_back(std::move(terms));
        added.push_back(mask.index(i, j));
      }
    }
    for (const Eigen::Index p : added) known(p / cols, p % cols) = 1;
  }
}

void RingExtension::apply(PositionMap& map) const {
  for (std::size_t k = 0; k < targets_.size(); ++k) {
    Vec3 value = Vec3::Zero();
    for (const Term& t : terms_[k]) value += t.coefficient * map.point(t.source);
    map.values.row(targets_[k]) = value.transpose();
  }
}

void RingExtension::adjoint(PositionMap& gradient) const {
  // outer layers read inner ones, so fold them back first
  for (std::size_t k = targets_.size(); k-- > 0;) {
    const Vec3 g = gradient.point(targets_[k]);
    for (const Term& t : terms_[k]) gradient.values.row(t.source) += t.coefficient * g.transpose();
    gradient.values.row(targets_[k]).setZero();
  }
}

// --- ground truth ---------------------------------------------------------------------

std::vector<BakedPanel> bake_ground_truth(const GarmentOutline& outline, const DrapeSurface& surface,
                                          double pitch, int rows, int cols) {
  std::vector<MaskMap> masks = rasterize_outline(outline, pitch, rows, cols);
  std::vector<BakedPanel> out;
  out.reserve(masks.size());
  for (std::size_t t = 0; t < masks.size(); ++t) {
    const MaskMap& mask = masks[t];
    const std::string& id = outline.panels[t].id;
    PositionMap positions(rows, cols, id);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) {
        if (!mask.inside(i, j)) continue;
        const auto p = surface(id, mask.frame.pixel_center(i, j));
        if (!p) throw Error("surface-undefined", "drape undefined at a masked pixel of " + id);
        positions.at(i, j) = p->transpose();
      }
    }
    const RingExtension ring(mask);
    ring.apply(positions);
    for (const Eigen::Index idx : ring.ring()) {
      const int i = static_cast<int>(idx / cols);
      const int j = static_cast<int>(idx % cols);
      if (const auto p = surface(id, mask.frame.pixel_center(i, j))) positions.values.row(idx) = p->transpose();
    }
    NormalMap normals = compute_normals(positions, mask);
    out.push_back({std::move(positions), mask, std::move(normals)});
  }
  return out;
}

std::vector<BakedPanel> bake_ground_truth(const SewingPattern& pattern, const DrapeSurface& surface,
                                          int points_per_edge) {
  return bake_ground_truth(outline_of(pattern, points_per_edge), surface);
}

// --- map container -----------------------------------------------------------------------

void write_map_container(std::ostream& out, const MapContainer& maps) {
  if (maps.masks.size() != maps.positions.size()) {
    throw Error("shape-mismatch", "map container needs one position map per mask");
  }
  const int rows = maps.masks.empty() ? kMapSize : maps.masks.front().rows();
  const int cols = maps.masks.empty() ? kMapSize : maps.masks.front().cols();
  const double pitch = maps.masks.empty() ? kPixelPitch : maps.masks.front().frame.pitch;
  binary::write_magic(out, "SWKM");
  binary::write_u32(out, 1);
  binary::write_u32(out, static_cast<std::uint32_t>(maps.masks.size()));
  binary::write_u32(out, static_cast<std::uint32_t>(rows));
  binary::write_u32(out, static_cast<std::uint32_t>(cols));
  binary::write_f64(out, pitch);
  for (std::size_t t = 0; t < maps.masks.size(); ++t) {
    const MaskMap& m = maps.masks[t];
    const PositionMap& y = maps.positions[t];
    if (m.rows() != rows || m.cols() != cols || y.rows != rows || y.cols != cols || m.frame.pitch != pitch) {
      throw Error("shape-mismatch", "all maps in a container must share H, W and pitch");
    }
    binary::write_string(out, m.panel_id);
    binary::write_f64(out, m.frame.offset.x());
    binary::write_f64(out, m.frame.offset.y());
    std::vector<std::uint8_t> bits((static_cast<std::size_t>(rows) * cols + 7) / 8, 0);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) {
        const std::size_t k = static_cast<std::size_t>(i) * cols + j;
        if (m.occupied(i, j)) bits[k / 8] |= static_cast<std::uint8_t>(1u << (k % 8));
      }
    }
    out.write(reinterpret_cast<const char*>(bits.data()), static_cast<std::streamsize>(bits.size()));
    for (Eigen::Index p = 0; p < y.pixels(); ++p) {
      for (int c = 0; c < 3; ++c) binary::write_f32(out, static_cast<float>(y.values(p, c)));
    }
  }
}

MapContainer read_map_container(std::istream& in) {
  binary::expect_magic(in, "SWKM");
  if (binary::read_u32(in) != 1) throw Error("format", "unsupported map container version");
  const std::uint32_t count = binary::read_u32(in);
  const int rows = static_cast<int>(binary::read_u32(in));
  const int cols = static_cast<int>(binary::read_u32(in));
  const double pitch = binary::read_f64(in);
  if (rows < 2 || cols < 2 || rows > 8192 || cols > 8192 || !(pitch > 0.0)) {
    throw Error("format", "implausible map container header");
  }
  MapContainer maps;
  for (std::uint32_t t = 0; t < count; ++t) {
    MaskMap m;
    m.panel_id = binary::read_string(in);
    m.frame.rows = rows;
    m.frame.cols = cols;
    m.frame.pitch = pitch;
    m.frame.offset.x() = binary::read_f64(in);
    m.frame.offset.y() = binary::read_f64(in);
    std::vector<std::uint8_t> bits((static_cast<std::size_t>(rows) * cols + 7) / 8, 0);
    in.read(reinterpret_cast<char*>(bits.data()), static_cast<std::streamsize>(bits.size()));
    if (!in) throw Error("io", "unexpected end of map container");
    m.occupied.setZero(rows, cols);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) {
        const std::size_t k = static_cast<std::size_t>(i) * cols + j;
        m.occupied(i, j) = (bits[k / 8] >> (k % 8)) & 1u;
      }
    }
    PositionMap y(rows, cols, m.panel_id);
    for (Eigen::Index p = 0; p < y.pixels(); ++p) {
      for (int c = 0; c < 3; ++c) y.values(p, c) = binary::read_f32(in);
    }
    maps.masks.push_back(std::move(m));
    maps.positions.push_back(std::move(y));
  }
  return maps;
}

}  // namespace sewkit
