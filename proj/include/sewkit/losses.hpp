#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sewkit/uv_field.hpp"

namespace sewkit {

struct LossWeights {
  double rec = 1.0;
  double inn = 1e-3;
  double inter = 1e-4;
  double nor = 1e-2;
};

/// One loss term: value plus dL/dY for every panel (same shapes as the input).
struct LossValue {
  double value = 0.0;
  std::vector<PositionMap> gradient;
};

// Every term is a mean over its contributing elements, pooled across panels
// (pixels, neighbour pairs, stitch points).

LossValue loss_rec(std::span<const PositionMap> maps, std::span<const PositionMap> targets,
                   std::span<const MaskMap> masks);

/// Neighbour pairs with both pixels masked only.
LossValue loss_inn(std::span<const PositionMap> maps, std::span<const MaskMap> masks,
                   double s = kPixelPitch);

/// Stitch point pairs resolved to bilinear stencils on each panel's grid.
class StitchSampler {
 public:
  struct Pair {
    int panel_a = 0;
    BilinearStencil a;
    int panel_b = 0;
    BilinearStencil b;
  };

  StitchSampler() = default;
  /// `masks` must be in the outline's panel order; their frames map the
  /// outline's edge points into the grid.
  StitchSampler(const GarmentOutline& outline, std::span<const MaskMap> masks);

  const std::vector<Pair>& pairs() const noexcept { return pairs_; }
  int stitch_count() const noexcept { return stitches_; }
  /// Distinct (panel, pixel) entries touched by any stencil.
  std::vector<std::pair<int, Eigen::Index>> support() const;

 private:
  std::vector<Pair> pairs_;
  int stitches_ = 0;
};

LossValue loss_int(std::span<const PositionMap> maps, const StitchSampler& stitches);

/// -cos between normals recomputed from Y and the targets. Pixels whose target
/// is the zero sentinel, or whose recomputed normal is undefined, are skipped.
LossValue loss_nor(std::span<const PositionMap> maps, std::span<const NormalMap> targets,
                   std::span<const MaskMap> masks);

struct LossTargets {
  std::vector<MaskMap> masks;
  std::vector<PositionMap> positions;  // may be empty when weights.rec == 0
  std::vector<NormalMap> normals;      // may be empty when weights.nor == 0
};

struct LossReport {
  double rec = 0.0;
  double inn = 0.0;
  double inter = 0.0;
  double nor = 0.0;
  double total = 0.0;
  std::vector<PositionMap> gradient;

  std::string to_text() const;
};

/// Terms with zero weight are skipped entirely (value reported as 0).
LossReport loss_total(std::span<const PositionMap> maps, const LossTargets& targets,
                      const StitchSampler& stitches, const LossWeights& weights,
                      double s = kPixelPitch);

// --- gradient checking --------------------------------------------------------------

using LossFunction = std::function<LossValue(std::span<const PositionMap>)>;

/// How far coordinate `axis` of pixel `pixel` on panel `panel` may move
/// before the loss can cross a non-differentiable point.
using KinkDistance =
    std::function<double(std::span<const PositionMap>, int panel, Eigen::Index pixel, int axis)>;

KinkDistance kink_distance_rec(std::vector<PositionMap> targets);
KinkDistance kink_distance_inn(std::vector<MaskMap> masks, double s = kPixelPitch);
KinkDistance kink_distance_int(StitchSampler stitches);

struct FiniteDiffOptions {
  double step = 1e-3;
  int coordinates = 200;
  std::uint64_t seed = 0;
};

struct FiniteDiffResult {
  double max_relative_error = 0.0;
  int checked = 0;
  int excluded = 0;
};

std::vector<std::pair<int, Eigen::Index>> masked_pixels(std::span<const MaskMap> masks);

/// Central differences on a random subset of `support` coordinates. The
/// relative error is |a - f| / max(|a|, |f|, 1e-6 * max|a|).
FiniteDiffResult finite_diff_check(const LossFunction& loss, std::vector<PositionMap> maps,
                                   std::span<const std::pair<int, Eigen::Index>> support,
                                   const FiniteDiffOptions& options, const KinkDistance& kink = {});

}  // namespace sewkit
