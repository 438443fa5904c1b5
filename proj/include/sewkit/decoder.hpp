#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sewkit/groups.hpp"
#include "sewkit/uv_field.hpp"

namespace sewkit {

/// gamma -> dense(h1, tanh) -> dense(h2, tanh) -> per-panel c x c x 3 grid
/// -> bilinear upsampling (corner aligned) to out x out.
struct DecoderShape {
  int input = 0;
  int hidden1 = 256;
  int hidden2 = 512;
  int coarse = 16;
  int out = kMapSize;
  std::vector<std::string> panels;

  int panel_count() const { return static_cast<int>(panels.size()); }
  Eigen::Index head_size() const { return static_cast<Eigen::Index>(coarse) * coarse * 3; }
  Eigen::Index output_size() const { return head_size() * panel_count(); }
  Eigen::Index parameter_count() const;

  bool operator==(const DecoderShape&) const = default;
};

/// Trainable weights live in one flat vector `theta`:
/// W1 (h1 x in), b1, W2 (h2 x h1), b2, W3 (out x h2), b3, column-major.
/// `input_scale` divides the embedding and `output_scale` multiplies the
/// head; both are fixed at initialisation.
struct DecoderParams {
  DecoderShape shape;
  Eigen::VectorXd theta;
  Eigen::VectorXd input_scale;
  double output_scale = 1.0;
  std::uint64_t seed = 0;
  std::uint32_t epoch = 0;

  using MatMap = Eigen::Map<Eigen::MatrixXd>;
  using ConstMatMap = Eigen::Map<const Eigen::MatrixXd>;
  using VecMap = Eigen::Map<Eigen::VectorXd>;
  using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

  ConstMatMap w1() const;
  ConstVecMap b1() const;
  ConstMatMap w2() const;
  ConstVecMap b2() const;
  ConstMatMap w3() const;
  ConstVecMap b3() const;
  VecMap b3();
};

/// Panels in the registry's canonical order; input = groups * h.
DecoderShape decoder_shape_for(const BasisRegistry& bases);

/// Glorot-uniform weights from `seed`, zero biases, unit scales.
DecoderParams init_decoder(const DecoderShape& shape, std::uint64_t seed);

/// Upsampling operator (out x coarse); rows hold at most two weights.
Eigen::MatrixXd upsample_matrix(int coarse, int out);

/// Forward pass kept for the backward sweep.
struct DecoderTrace {
  Eigen::VectorXd x;
  Eigen::VectorXd h1;
  Eigen::VectorXd h2;
  Eigen::VectorXd head;  // scaled coarse grids
};

DecoderTrace decoder_forward(const Eigen::VectorXd& embedding, const DecoderParams& params);

/// Full-resolution map of panel `slot` from a trace.
PositionMap decoder_panel(const DecoderTrace& trace, const DecoderParams& params, int slot);

/// All panel maps, in `params.shape.panels` order.
std::vector<PositionMap> decode(const Embedding& e, const DecoderParams& params);

struct DecoderGradient {
  Eigen::VectorXd theta;
  Eigen::VectorXd embedding;  // dL/dgamma
};

/// Exact reverse-mode gradient. `upstream` holds dL/dY per panel slot; an
/// empty map (rows == 0) stands for a zero gradient.
DecoderGradient decoder_backward(const Embedding& e, const DecoderParams& params,
                                 std::span<const PositionMap> upstream);
DecoderGradient decoder_backward(const DecoderTrace& trace, const DecoderParams& params,
                                 std::span<const PositionMap> upstream);

/// "SWKC" | u32 version | u32 input, h1, h2, coarse, out, panels | panel ids
/// | u64 seed | u32 epoch | f64 output_scale | f64 input_scale[input]
/// | u64 n | f64 theta[n]
void write_checkpoint(std::ostream& out, const DecoderParams& params);
DecoderParams read_checkpoint(std::istream& in);

/// FNV-1a over the checkpoint bytes; identifies a parameter snapshot.
std::uint64_t checkpoint_hash(const DecoderParams& params);

}  // namespace sewkit
