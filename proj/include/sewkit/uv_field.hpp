#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sewkit/pattern.hpp"

namespace sewkit {

inline constexpr int kMapSize = 128;
inline constexpr double kPixelPitch = 1.5;  // cm per pixel, equal to the isometry step s

/// Panel plane -> grid: u = x / pitch + offset.x (column), v = y / pitch +
/// offset.y (row). Grid point (row i, col j) sits at (u, v) = (j, i).
struct MapFrame {
  int rows = kMapSize;
  int cols = kMapSize;
  double pitch = kPixelPitch;
  Vec2 offset = Vec2::Zero();

  Vec2 to_grid(const Vec2& p) const { return p / pitch + offset; }
  Vec2 to_panel(double u, double v) const { return (Vec2(u, v) - offset) * pitch; }
  Vec2 pixel_center(int row, int col) const { return to_panel(col, row); }

  bool operator==(const MapFrame&) const = default;
};

/// Centres `contour` with the offset snapped to whole pixels, so every panel
/// shares the same sub-pixel lattice phase in its own plane.
MapFrame centered_frame(const Polyline2& contour, double pitch = kPixelPitch,
                        int rows = kMapSize, int cols = kMapSize);

/// H x W x 3 field stored one pixel per row (index = row * cols + col).
template <typename Scalar>
struct PositionMapT {
  using Storage = Eigen::Matrix<Scalar, Eigen::Dynamic, 3, Eigen::RowMajor>;

  std::string panel_id;
  int rows = 0;
  int cols = 0;
  Storage values;

  PositionMapT() = default;
  PositionMapT(int r, int c, std::string id = {})
      : panel_id(std::move(id)), rows(r), cols(c), values(Storage::Zero(static_cast<Eigen::Index>(r) * c, 3)) {}

  Eigen::Index index(int row, int col) const { return static_cast<Eigen::Index>(row) * cols + col; }
  auto at(int row, int col) { return values.row(index(row, col)); }
  auto at(int row, int col) const { return values.row(index(row, col)); }
  Eigen::Matrix<Scalar, 3, 1> point(Eigen::Index idx) const { return values.row(idx).transpose(); }
  Eigen::Index pixels() const { return values.rows(); }
};

using PositionMap = PositionMapT<double>;
/// Unit normals, or the zero vector where undefined.
using NormalMap = PositionMapT<double>;

struct MaskMap {
  std::string panel_id;
  MapFrame frame;
  Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> occupied;

  int rows() const { return static_cast<int>(occupied.rows()); }
  int cols() const { return static_cast<int>(occupied.cols()); }
  bool inside(int row, int col) const {
    return row >= 0 && col >= 0 && row < rows() && col < cols() && occupied(row, col) != 0;
  }
  Eigen::Index index(int row, int col) const { return static_cast<Eigen::Index>(row) * cols() + col; }
  Eigen::Index count() const { return (occupied != 0).count(); }
};

// --- rasterisation -------------------------------------------------------------

MaskMap rasterize_mask(const Polyline2& contour, const MapFrame& frame, std::string panel_id = {});
std::vector<MaskMap> rasterize_masks(std::span<const Polyline2> contours, double pitch = kPixelPitch,
                                     int rows = kMapSize, int cols = kMapSize);
std::vector<MaskMap> rasterize_outline(const GarmentOutline& outline, double pitch = kPixelPitch,
                                       int rows = kMapSize, int cols = kMapSize);

/// True when the occupied pixels form one 4-connected component.
bool mask_connected(const MaskMap& mask);

// --- sampling ----------------------------------------------------------------------

struct BilinearStencil {
  std::array<Eigen::Index, 4> index{};
  std::array<double, 4> weight{};
};

BilinearStencil bilinear_stencil(const Vec2& uv, int rows, int cols);

template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> bilinear_sample(const PositionMapT<Scalar>& map, const Vec2& uv) {
  const BilinearStencil s = bilinear_stencil(uv, map.rows, map.cols);
  Eigen::Matrix<Scalar, 3, 1> out = Eigen::Matrix<Scalar, 3, 1>::Zero();
  for (int k = 0; k < 4; ++k) out += static_cast<Scalar>(s.weight[k]) * map.point(s.index[k]);
  return out;
}

// --- normals -----------------------------------------------------------------------

/// Finite-difference stencil for one axis: derivative = scale * (Y[plus] - Y[minus]).
struct AxisStencil {
  Eigen::Index plus = 0;
  Eigen::Index minus = 0;
  double scale = 0.0;
};

/// Central where both neighbours are masked, one-sided at mask borders,
/// nothing if the pixel is unmasked or isolated along the axis.
std::optional<AxisStencil> u_stencil(const MaskMap& mask, int row, int col);
std::optional<AxisStencil> v_stencil(const MaskMap& mask, int row, int col);

inline constexpr double kNormalDegeneracy = 1e-9;

/// N = -(dY/du x dY/dv) / |dY/du x dY/dv| inside the mask, zero elsewhere.
NormalMap compute_normals(const PositionMap& positions, const MaskMap& mask);

// --- ring extension --------------------------------------------------------------

/// Linear extrapolation of a field from the mask onto `layers` successive
/// 8-neighbour rings, so bilinear stencils along the contour (acute corners
/// included) read meaningful values. The operator is linear; `adjoint` folds
/// ring gradients back onto the mask.
class RingExtension {
 public:
  explicit RingExtension(const MaskMap& mask, int layers = 2);

  void apply(PositionMap& map) const;
  void adjoint(PositionMap& gradient) const;
  std::span<const Eigen::Index> ring() const { return targets_; }

 private:
  struct Term {
    Eigen::Index source;
    double coefficient;
  };
  std::vector<Eigen::Index> targets_;
  std::vector<std::vector<Term>> terms_;
};

// --- ground truth --------------------------------------------------------------------

/// Analytic drape: panel-plane point -> 3D point, std::nullopt where undefined.
using DrapeSurface = std::function<std::optional<Vec3>(const std::string& panel_id, const Vec2& p)>;

struct BakedPanel {
  PositionMap positions;
  MaskMap mask;
  NormalMap normals;
};

/// Masks from the outline contours, positions from the surface at masked and
/// ring pixels, normals from the baked positions.
std::vector<BakedPanel> bake_ground_truth(const GarmentOutline& outline, const DrapeSurface& surface,
                                          double pitch = kPixelPitch, int rows = kMapSize,
                                          int cols = kMapSize);
std::vector<BakedPanel> bake_ground_truth(const SewingPattern& pattern, const DrapeSurface& surface,
                                          int points_per_edge = kDefaultEdgePoints);

// --- map container -------------------------------------------------------------------

/// Binary layout (little endian):
///   "SWKM" | u32 version=1 | u32 T | u32 H | u32 W | f64 pitch
///   per panel: u32 id length | id bytes | f64 offset_u | f64 offset_v
///              | ceil(H*W/8) mask bytes (row-major, LSB first)
///              | H*W*3 f32 positions (row-major, xyz)
struct MapContainer {
  std::vector<MaskMap> masks;
  std::vector<PositionMap> positions;
};

void write_map_container(std::ostream& out, const MapContainer& maps);
MapContainer read_map_container(std::istream& in);

}  // namespace sewkit
