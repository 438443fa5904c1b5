#include "sewkit/solver.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <numbers>
#include <ostream>

#include "sewkit/error.hpp"
#include "sewkit/random.hpp"

namespace sewkit {

Adam::Adam(Eigen::Index size, AdamConfig cfg)
    : cfg_(cfg), m_(Eigen::VectorXd::Zero(size)), v_(Eigen::VectorXd::Zero(size)) {}

void Adam::step(Eigen::Ref<Eigen::VectorXd> x, const Eigen::VectorXd& g, double lr) {
  ++t_;
  m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * g;
  v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * g.cwiseAbs2();
  const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
  x.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + cfg_.eps);
}

namespace {

void require_finite(const LossReport& r, const char* what) {
  if (!std::isfinite(r.total)) throw Error("diverged", std::string(what) + ": loss became non-finite");
}

LossReport strip(LossReport r) {
  r.gradient.clear();
  return r;
}

}  // namespace

// --- decoder training -----------------------------------------------------------------

namespace {

TrainItem build_item(std::string id, const SewingPattern& pattern, GarmentOutline outline,
                     std::span<const MaskMap> masks, std::span<const PositionMap> positions,
                     const BasisRegistry& bases, const DecoderShape& shape) {
  if (masks.size() != outline.panels.size() || positions.size() != masks.size()) {
    throw Error("shape-mismatch", "sample '" + id + "' needs one map per panel");
  }
  TrainItem item;
  item.id = std::move(id);
  item.embedding = encode(pattern, bases);
  item.outline = std::move(outline);
  for (std::size_t p = 0; p < masks.size(); ++p) {
    item.targets.masks.push_back(masks[p]);
    item.targets.positions.push_back(positions[p]);
    item.targets.normals.push_back(compute_normals(positions[p], masks[p]));
    item.rings.emplace_back(masks[p]);
  }
  for (const PanelOutline& p : item.outline.panels) {
    int slot = -1;
    for (int k = 0; k < shape.panel_count(); ++k) {
      if (shape.panels[k] == p.id) slot = k;
    }
    if (slot < 0) throw Error("unknown-panel", "panel '" + p.id + "' has no decoder head");
    item.slots.push_back(slot);
  }
  item.stitches = StitchSampler(item.outline, item.targets.masks);
  return item;
}

}  // namespace

TrainItem make_train_item(const Sample& sample, const BasisRegistry& bases, const DecoderShape& shape) {
  std::vector<MaskMap> masks;
  std::vector<PositionMap> positions;
  for (const BakedPanel& b : sample.maps) {
    masks.push_back(b.mask);
    positions.push_back(b.positions);
  }
  return build_item(sample.id, sample.pattern, sample.outline, masks, positions, bases, shape);
}

TrainItem make_train_item(std::string id, const SewingPattern& pattern, const MapContainer& maps,
                          const BasisRegistry& bases, const DecoderShape& shape, int points_per_edge) {
  return build_item(std::move(id), pattern, outline_of(pattern, points_per_edge), maps.masks, maps.positions,
                    bases, shape);
}

void fit_decoder_scales(DecoderParams& params, std::span<const TrainItem> data, bool mean_init) {
  const DecoderShape& s = params.shape;
  if (data.empty()) throw Error("empty-dataset", "training needs at least one sample");

  // inputs: per-coordinate standard deviation, 1 where constant
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  Eigen::MatrixXd x(s.input, n);
  for (Eigen::Index i = 0; i < n; ++i) x.col(i) = data[i].embedding.flat();
  const Eigen::VectorXd mean = x.rowwise().mean();
  params.input_scale = Eigen::VectorXd::Ones(s.input);
  for (int k = 0; k < s.input; ++k) {
    const double sd = std::sqrt((x.row(k).array() - mean(k)).square().mean());
    if (sd > 1e-9) params.input_scale(k) = sd;
  }

  // outputs: RMS of the masked target coordinates
  double sum = 0.0;
  double count = 0.0;
  for (const TrainItem& item : data) {
    for (std::size_t p = 0; p < item.targets.masks.size(); ++p) {
      const MaskMap& mask = item.targets.masks[p];
      for (Eigen::Index idx = 0; idx < item.targets.positions[p].pixels(); ++idx) {
        if (mask.occupied.data()[idx] == 0) continue;
        sum += item.targets.positions[p].values.row(idx).squaredNorm();
        count += 3.0;
      }
    }
  }
  params.output_scale = count > 0 ? std::max(1.0, std::sqrt(sum / count)) : 1.0;

  if (!mean_init) return;
  // least-squares coarse grid per slot: min sum over masked pixels |U C U^T - Y|^2
  const Eigen::MatrixXd u = upsample_matrix(s.coarse, s.out);
  const int cells = s.coarse * s.coarse;
  for (int slot = 0; slot < s.panel_count(); ++slot) {
    Eigen::MatrixXd ata = Eigen::MatrixXd::Zero(cells, cells);
    Eigen::MatrixXd atb = Eigen::MatrixXd::Zero(cells, 3);
    bool any = false;
    for (const TrainItem& item : data) {
      for (std::size_t p = 0; p < item.slots.size(); ++p) {
        if (item.slots[p] != slot) continue;
        any = true;
        const MaskMap& mask = item.targets.masks[p];
        for (int i = 0; i < s.out; ++i) {
          for (int j = 0; j < s.out; ++j) {
            if (!mask.inside(i, j)) continue;
            int idx[4];
            double w[4];
            int q = 0;
            for (int a = 0; a < s.coarse; ++a) {
              if (u(i, a) == 0.0) continue;
              for (int b = 0; b < s.coarse; ++b) {
                if (u(j, b) == 0.0) continue;
                idx[q] = a * s.coarse + b;
                w[q] = u(i, a) * u(j, b);
                ++q;
              }
            }
            const auto y = item.targets.positions[p].at(i, j);
            for (int r = 0; r < q; ++r) {
              for (int c = 0; c < q; ++c) ata(idx[r], idx[c]) += w[r] * w[c];
              atb.row(idx[r]) += w[r] * y;
            }
          }
        }
      }
    }
    if (!any) continue;
    const double ridge = 1e-6 * ata.diagonal().maxCoeff();
    ata.diagonal().array() += ridge;
    const Eigen::MatrixXd grid = ata.ldlt().solve(atb);
    auto b3 = params.b3();
    const Eigen::Index base = slot * s.head_size();
    for (int c = 0; c < cells; ++c) {
      for (int k = 0; k < 3; ++k) b3(base + c * 3 + k) = grid(c, k) / params.output_scale;
    }
  }
}

namespace {

// Loss and dL/dtheta of one item; `grad` accumulates.
LossReport item_loss(const TrainItem& item, const DecoderParams& params, const LossWeights& w,
                     Eigen::VectorXd& grad, double scale) {
  const DecoderTrace trace = decoder_forward(item.embedding.flat(), params);
  std::vector<PositionMap> maps;
  for (std::size_t p = 0; p < item.slots.size(); ++p) {
    maps.push_back(decoder_panel(trace, params, item.slots[p]));
    item.rings[p].apply(maps.back());
  }
  LossReport r = loss_total(maps, item.targets, item.stitches, w);
  std::vector<PositionMap> upstream(static_cast<std::size_t>(params.shape.panel_count()));
  for (std::size_t p = 0; p < item.slots.size(); ++p) {
    item.rings[p].adjoint(r.gradient[p]);
    upstream[static_cast<std::size_t>(item.slots[p])] = std::move(r.gradient[p]);
  }
  grad += scale * decoder_backward(trace, params, upstream).theta;
  r.gradient.clear();
  return r;
}

}  // namespace

TrainResult train(std::span<const TrainItem> data, const DecoderShape& shape, const TrainConfig& cfg) {
  if (data.empty()) throw Error("empty-dataset", "training needs at least one sample");
  if (cfg.learning_rate <= 0 || cfg.batch_size <= 0 || cfg.epochs <= 0) {
    throw Error("invalid-argument", "learning rate, batch size and epochs must be positive");
  }
  TrainResult out;
  out.params = init_decoder(shape, cfg.seed);
  fit_decoder_scales(out.params, data, cfg.mean_init);

  const int n = static_cast<int>(data.size());
  std::vector<int> order(static_cast<std::size_t>(n));
  Adam adam(out.params.theta.size(), cfg.adam);
  Eigen::VectorXd grad(out.params.theta.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    for (int i = n - 1; i > 0; --i) {
      std::swap(order[static_cast<std::size_t>(i)], order[rng.below(static_cast<std::uint64_t>(i + 1))]);
    }
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int end = std::min(n, start + cfg.batch_size);
      const double scale = 1.0 / (end - start);
      grad.setZero();
      LossReport batch;
      for (int k = start; k < end; ++k) {
        const LossReport r = item_loss(data[order[static_cast<std::size_t>(k)]], out.params, cfg.weights, grad, scale);
        batch.rec += scale * r.rec;
        batch.inn += scale * r.inn;
        batch.inter += scale * r.inter;
        batch.nor += scale * r.nor;
        batch.total += scale * r.total;
      }
      require_finite(batch, "train");
      out.history.push_back(batch);
      adam.step(out.params.theta, grad, cfg.learning_rate);
    }
    out.params.epoch = static_cast<std::uint32_t>(epoch + 1);
  }
  return out;
}

std::vector<PositionMap> decode_panels(const Embedding& e, const DecoderParams& params,
                                       const GarmentOutline& outline, std::span<const MaskMap> masks) {
  if (masks.size() != outline.panels.size()) throw Error("shape-mismatch", "one mask per panel expected");
  const DecoderTrace trace = decoder_forward(e.flat(), params);
  std::vector<PositionMap> maps;
  for (std::size_t p = 0; p < outline.panels.size(); ++p) {
    int slot = -1;
    for (int k = 0; k < params.shape.panel_count(); ++k) {
      if (params.shape.panels[k] == outline.panels[p].id) slot = k;
    }
    if (slot < 0) throw Error("unknown-panel", "panel '" + outline.panels[p].id + "' has no decoder head");
    maps.push_back(decoder_panel(trace, params, slot));
    RingExtension(masks[p]).apply(maps.back());
  }
  return maps;
}

Reconstruction reconstruct(const Embedding& e, const BasisRegistry& bases, const DecoderParams& params,
                           int points_per_edge) {
  Reconstruction r;
  r.outline = decode_outline(e, bases);
  if (r.outline.panels.empty()) throw Error("empty-garment", "embedding has no present group");
  r.masks = rasterize_outline(r.outline);
  r.maps = decode_panels(e, params, r.outline, r.masks);
  r.mesh = readout_mesh(r.maps, r.masks, r.outline, points_per_edge);
  return r;
}

void write_history_csv(std::ostream& out, std::span<const LossReport> history) {
  out << "step,total,rec,inn,int,nor\n";
  char line[256];
  for (std::size_t i = 0; i < history.size(); ++i) {
    const LossReport& r = history[i];
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", i, r.total, r.rec, r.inn, r.inter,
                  r.nor);
    out << line;
  }
}

// --- direct sewing -------------------------------------------------------------------

Eigen::Index anchor_pixel(const GarmentOutline& outline, const MaskMap& mask) {
  const PanelOutline& panel = outline.panels.front();
  Vec2 target = Vec2::Zero();
  if (panel.edges.size() > 2 && !panel.edges[2].empty()) {
    const Polyline2& top = panel.edges[2];
    target = top[top.size() / 2];
    if (top.size() % 2 == 0) target = 0.5 * (top[top.size() / 2 - 1] + top[top.size() / 2]);
  }
  const Vec2 g = mask.frame.to_grid(target);
  Eigen::Index best = -1;
  double best_d = 0.0;
  for (int i = 0; i < mask.rows(); ++i) {
    for (int j = 0; j < mask.cols(); ++j) {
      if (!mask.inside(i, j)) continue;
      const double d = (Vec2(j, i) - g).squaredNorm();
      if (best < 0 || d < best_d) {
        best = mask.index(i, j);
        best_d = d;
      }
    }
  }
  if (best < 0) throw Error("empty-mask", "anchor panel has an empty mask");
  return best;
}

std::vector<PositionMap> placement_maps(const GarmentOutline& outline, std::span<const MaskMap> masks) {
  std::vector<PositionMap> maps;
  for (std::size_t p = 0; p < outline.panels.size(); ++p) {
    const MaskMap& mask = masks[p];
    PositionMap y(mask.rows(), mask.cols(), outline.panels[p].id);
    for (int i = 0; i < mask.rows(); ++i) {
      for (int j = 0; j < mask.cols(); ++j) {
        y.at(i, j) = outline.panels[p].placement.apply(mask.frame.pixel_center(i, j)).transpose();
      }
    }
    maps.push_back(std::move(y));
  }
  return maps;
}

SewResult sew_direct(const GarmentOutline& outline, std::span<const MaskMap> masks, const SewTargets& targets,
                     const SewConfig& cfg, std::span<const PositionMap> given) {
  if (cfg.steps <= 0 || cfg.step_size <= 0) throw Error("invalid-argument", "steps and step size must be positive");
  if (masks.size() != outline.panels.size() || masks.empty()) {
    throw Error("shape-mismatch", "one mask per panel expected");
  }
  SewResult out;
  if (cfg.init == SewInit::given) {
    if (given.size() != masks.size()) throw Error("shape-mismatch", "given init needs one map per panel");
    out.maps.assign(given.begin(), given.end());
  } else {
    out.maps = placement_maps(outline, masks);
  }

  LossTargets lt;
  lt.masks.assign(masks.begin(), masks.end());
  lt.positions = targets.positions;
  lt.normals = targets.normals;
  LossWeights w = cfg.weights;
  if (lt.positions.empty()) w.rec = 0.0;
  if (lt.normals.empty()) w.nor = 0.0;
  const StitchSampler stitches(outline, masks);

  std::vector<RingExtension> rings;
  for (const MaskMap& m : masks) rings.emplace_back(m);

  // free variables: masked pixels, minus the anchor
  out.anchor_panel = 0;
  out.anchor_pixel = anchor_pixel(outline, masks[0]);
  Vec3 anchor = out.maps[0].point(out.anchor_pixel);
  if (!lt.positions.empty()) anchor = lt.positions[0].point(out.anchor_pixel);
  if (cfg.anchor) anchor = *cfg.anchor;
  out.maps[0].values.row(out.anchor_pixel) = anchor.transpose();

  std::vector<std::pair<int, Eigen::Index>> free;
  for (std::size_t p = 0; p < masks.size(); ++p) {
    for (Eigen::Index idx = 0; idx < out.maps[p].pixels(); ++idx) {
      if (masks[p].occupied.data()[idx] == 0) continue;
      if (p == 0 && idx == out.anchor_pixel) continue;
      free.emplace_back(static_cast<int>(p), idx);
    }
  }
  Eigen::VectorXd x(3 * static_cast<Eigen::Index>(free.size()));
  Eigen::VectorXd g(x.size());
  for (std::size_t k = 0; k < free.size(); ++k) {
    x.segment<3>(3 * static_cast<Eigen::Index>(k)) = out.maps[free[k].first].point(free[k].second);
  }

  Adam adam(x.size(), cfg.adam);
  for (std::size_t p = 0; p < masks.size(); ++p) rings[p].apply(out.maps[p]);
  for (int step = 0; step < cfg.steps; ++step) {
    LossReport r = loss_total(out.maps, lt, stitches, w);
    require_finite(r, "sew");
    for (std::size_t p = 0; p < masks.size(); ++p) rings[p].adjoint(r.gradient[p]);
    for (std::size_t k = 0; k < free.size(); ++k) {
      g.segment<3>(3 * static_cast<Eigen::Index>(k)) = r.gradient[free[k].first].point(free[k].second);
    }
    out.history.push_back(strip(std::move(r)));
    const double t = cfg.steps > 1 ? static_cast<double>(step) / (cfg.steps - 1) : 1.0;
    const double lr =
        cfg.final_step_size + 0.5 * (cfg.step_size - cfg.final_step_size) * (1.0 + std::cos(std::numbers::pi * t));
    adam.step(x, g, lr);
    for (std::size_t k = 0; k < free.size(); ++k) {
      out.maps[free[k].first].values.row(free[k].second) = x.segment<3>(3 * static_cast<Eigen::Index>(k)).transpose();
    }
    for (std::size_t p = 0; p < masks.size(); ++p) rings[p].apply(out.maps[p]);
  }
  return out;
}

SeamGap seam_gap(std::span<const PositionMap> maps, const StitchSampler& stitches) {
  SeamGap gap;
  if (stitches.pairs().empty()) return gap;
  for (const StitchSampler::Pair& pair : stitches.pairs()) {
    Vec3 a = Vec3::Zero();
    Vec3 b = Vec3::Zero();
    for (int q = 0; q < 4; ++q) {
      a += pair.a.weight[q] * maps[pair.panel_a].point(pair.a.index[q]);
      b += pair.b.weight[q] * maps[pair.panel_b].point(pair.b.index[q]);
    }
    const double d = (a - b).norm();
    gap.mean += d;
    gap.max = std::max(gap.max, d);
  }
  gap.mean /= static_cast<double>(stitches.pairs().size());
  return gap;
}

}  // namespace sewkit
