#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "sewkit/decoder.hpp"
#include "sewkit/losses.hpp"
#include "sewkit/synth.hpp"

namespace sewkit {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(Eigen::Index size, AdamConfig cfg = {});

  /// x -= lr * m_hat / (sqrt(v_hat) + eps)
  void step(Eigen::Ref<Eigen::VectorXd> x, const Eigen::VectorXd& gradient, double lr);
  int steps() const noexcept { return t_; }

 private:
  AdamConfig cfg_;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  int t_ = 0;
};

// --- decoder training -----------------------------------------------------------------

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 8;
  int epochs = 40;
  LossWeights weights;
  std::uint64_t seed = 0;
  AdamConfig adam;
  /// Fit the head biases to the dataset's mean coarse maps before training.
  bool mean_init = true;
};

/// One ground-truth garment prepared for the training loss. Panels follow
/// the outline order; `slots` maps them to decoder panel slots.
struct TrainItem {
  std::string id;
  Embedding embedding;
  GarmentOutline outline;
  LossTargets targets;
  StitchSampler stitches;
  std::vector<RingExtension> rings;
  std::vector<int> slots;
};

TrainItem make_train_item(const Sample& sample, const BasisRegistry& bases, const DecoderShape& shape);
/// Same from files on disk: the pattern plus its baked map container.
TrainItem make_train_item(std::string id, const SewingPattern& pattern, const MapContainer& maps,
                          const BasisRegistry& bases, const DecoderShape& shape,
                          int points_per_edge = kDefaultEdgePoints);

/// Per-coordinate input scale, output scale and (optionally) mean head biases
/// from the dataset.
void fit_decoder_scales(DecoderParams& params, std::span<const TrainItem> data, bool mean_init);

struct TrainResult {
  DecoderParams params;
  std::vector<LossReport> history;  // one entry per batch, gradients dropped
};

TrainResult train(std::span<const TrainItem> data, const DecoderShape& shape, const TrainConfig& cfg);

/// Decoder output for the outline's panels, ring-extended over `masks`.
std::vector<PositionMap> decode_panels(const Embedding& e, const DecoderParams& params,
                                       const GarmentOutline& outline, std::span<const MaskMap> masks);

/// Inference path: inverse-PCA outline, its masks, decoded maps, readout mesh.
struct Reconstruction {
  GarmentOutline outline;
  std::vector<MaskMap> masks;
  std::vector<PositionMap> maps;
  TriMesh mesh;
};

Reconstruction reconstruct(const Embedding& e, const BasisRegistry& bases, const DecoderParams& params,
                           int points_per_edge = kDefaultEdgePoints);

/// "step,total,rec,inn,int,nor" rows.
void write_history_csv(std::ostream& out, std::span<const LossReport> history);

// --- direct sewing -------------------------------------------------------------------

enum class SewInit { placement, flat, given };

struct SewConfig {
  int steps = 2000;
  double step_size = 0.2;         // cm
  double final_step_size = 1e-3;  // cosine decay target
  LossWeights weights;
  SewInit init = SewInit::placement;
  AdamConfig adam;
  /// Pin position for the anchor pixel; defaults to the target there, or the
  /// initial value when no position targets are given.
  std::optional<Vec3> anchor;
};

/// Either member may be empty; the matching loss term is then off.
struct SewTargets {
  std::vector<PositionMap> positions;
  std::vector<NormalMap> normals;
};

struct SewResult {
  std::vector<PositionMap> maps;
  std::vector<LossReport> history;  // one entry per step, evaluated before the update
  int anchor_panel = 0;
  Eigen::Index anchor_pixel = 0;
};

/// Masked pixel of panel 0 nearest the midpoint of its top edge (edge 2).
Eigen::Index anchor_pixel(const GarmentOutline& outline, const MaskMap& mask);

/// Flat panels carried by their placements.
std::vector<PositionMap> placement_maps(const GarmentOutline& outline, std::span<const MaskMap> masks);

SewResult sew_direct(const GarmentOutline& outline, std::span<const MaskMap> masks, const SewTargets& targets,
                     const SewConfig& cfg, std::span<const PositionMap> given = {});

/// Mean and max distance over all stitch point pairs.
struct SeamGap {
  double mean = 0.0;
  double max = 0.0;
};
SeamGap seam_gap(std::span<const PositionMap> maps, const StitchSampler& stitches);

}  // namespace sewkit
