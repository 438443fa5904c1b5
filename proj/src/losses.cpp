#include "sewkit/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "sewkit/random.hpp"

namespace sewkit {

namespace {

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

std::vector<PositionMap> zeros_like(std::span<const PositionMap> maps) {
  std::vector<PositionMap> out;
  out.reserve(maps.size());
  for (const PositionMap& m : maps) out.emplace_back(m.rows, m.cols, m.panel_id);
  return out;
}

void require_same_count(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw Error("shape-mismatch", std::string("panel count mismatch: ") + what);
}

void require_shape(const PositionMap& y, const MaskMap& m) {
  if (y.rows != m.rows() || y.cols != m.cols()) throw Error("shape-mismatch", "map and mask differ in shape");
}

constexpr int kPairDr[2] = {0, 1};
constexpr int kPairDc[2] = {1, 0};

}  // namespace

// --- L_rec ----------------------------------------------------------------------------

LossValue loss_rec(std::span<const PositionMap> maps, std::span<const PositionMap> targets,
                   std::span<const MaskMap> masks) {
  require_same_count(maps.size(), targets.size(), "targets");
  require_same_count(maps.size(), masks.size(), "masks");
  LossValue out{0.0, zeros_like(maps)};
  std::int64_t count = 0;
  for (std::size_t t = 0; t < maps.size(); ++t) {
    require_shape(maps[t], masks[t]);
    require_shape(targets[t], masks[t]);
    count += masks[t].count();
  }
  if (count == 0) throw Error("empty-mask", "reconstruction loss over an empty mask");
  const double inv = 1.0 / static_cast<double>(count);
  for (std::size_t t = 0; t < maps.size(); ++t) {
    const MaskMap& m = masks[t];
    for (int i = 0; i < m.rows(); ++i) {
      for (int j = 0; j < m.cols(); ++j) {
        if (!m.inside(i, j)) continue;
        const Eigen::Index p = m.index(i, j);
        for (int c = 0; c < 3; ++c) {
          const double d = maps[t].values(p, c) - targets[t].values(p, c);
          out.value += std::abs(d);
          out.gradient[t].values(p, c) = sign(d) * inv;
        }
      }
    }
  }
  out.value *= inv;
  return out;
}

// --- L_inn ----------------------------------------------------------------------------

LossValue loss_inn(std::span<const PositionMap> maps, std::span<const MaskMap> masks, double s) {
  if (!(s > 0.0)) throw Error("invalid-argument", "pixel step must be positive");
  require_same_count(maps.size(), masks.size(), "masks");
  LossValue out{0.0, zeros_like(maps)};
  std::int64_t count = 0;
  for (std::size_t t = 0; t < maps.size(); ++t) {
    require_shape(maps[t], masks[t]);
    const MaskMap& m = masks[t];
    for (int i = 0; i < m.rows(); ++i) {
      for (int j = 0; j < m.cols(); ++j) {
        if (!m.inside(i, j)) continue;
        for (int k = 0; k < 2; ++k) count += m.inside(i + kPairDr[k], j + kPairDc[k]) ? 1 : 0;
      }
    }
  }
  if (count == 0) throw Error("no-pairs", "no adjacent masked pixel pairs");
  const double inv = 1.0 / static_cast<double>(count);
  for (std::size_t t = 0; t < maps.size(); ++t) {
    const MaskMap& m = masks[t];
    const PositionMap& y = maps[t];
    PositionMap& g = out.gradient[t];
    for (int i = 0; i < m.rows(); ++i) {
      for (int j = 0; j < m.cols(); ++j) {
        if (!m.inside(i, j)) continue;
        const Eigen::Index p = m.index(i, j);
        for (int k = 0; k < 2; ++k) {
          if (!m.inside(i + kPairDr[k], j + kPairDc[k])) continue;
          const Eigen::Index q = m.index(i + kPairDr[k], j + kPairDc[k]);
          const Vec3 d = y.point(p) - y.point(q);
          const double len = d.norm();
          const double r = len - s;
          out.value += std::abs(r);
          if (len > 0.0 && r != 0.0) {
            const Vec3 dg = (sign(r) * inv / len) * d;
            g.values.row(p) += dg.transpose();
            g.values.row(q) -= dg.transpose();
          }
        }
      }
    }
  }
  out.value *= inv;
  return out;
}

// --- L_int ----------------------------------------------------------------------------

StitchSampler::StitchSampler(const GarmentOutline& outline, std::span<const MaskMap> masks) {
  require_same_count(outline.panels.size(), masks.size(), "outline masks");
  for (const Stitch& st : outline.stitches) {
    const auto ia = outline.panel_index(st.a.panel);
    const auto ib = outline.panel_index(st.b.panel);
    if (!ia || !ib) throw Error("unknown-panel", "stitch references a missing panel");
    const PanelOutline& pa = outline.panels[*ia];
    const PanelOutline& pb = outline.panels[*ib];
    if (st.a.edge < 0 || st.a.edge >= static_cast<int>(pa.edges.size()) || st.b.edge < 0 ||
        st.b.edge >= static_cast<int>(pb.edges.size())) {
      throw Error("edge-out-of-range", "stitch edge index out of range");
    }
    const Polyline2& ea = pa.edges[st.a.edge];
    const Polyline2& eb = pb.edges[st.b.edge];
    if (ea.size() != eb.size()) throw Error("stitch-length-mismatch", "stitched edges differ in point count");
    const MaskMap& ma = masks[*ia];
    const MaskMap& mb = masks[*ib];
    const std::size_t n = ea.size();
    for (std::size_t k = 0; k < n; ++k) {
      const Vec2& qa = ea[k];
      const Vec2& qb = eb[st.reversed ? n - 1 - k : k];
      Pair pair;
      pair.panel_a = *ia;
      pair.panel_b = *ib;
      try {
        pair.a = bilinear_stencil(ma.frame.to_grid(qa), ma.rows(), ma.cols());
        pair.b = bilinear_stencil(mb.frame.to_grid(qb), mb.rows(), mb.cols());
      } catch (const Error&) {
        throw Error("stitch-leaves-map", "stitched edge of " + st.a.panel + "/" + st.b.panel + " leaves the map");
      }
      pairs_.push_back(pair);
    }
    ++stitches_;
  }
}

std::vector<std::pair<int, Eigen::Index>> StitchSampler::support() const {
  std::set<std::pair<int, Eigen::Index>> s;
  for (const Pair& p : pairs_) {
    for (int k = 0; k < 4; ++k) {
      if (p.a.weight[k] != 0.0) s.insert({p.panel_a, p.a.index[k]});
      if (p.b.weight[k] != 0.0) s.insert({p.panel_b, p.b.index[k]});
    }
  }
  return {s.begin(), s.end()};
}

namespace {

Vec3 sample(const PositionMap& y, const BilinearStencil& s) {
  Vec3 out = Vec3::Zero();
  for (int k = 0; k < 4; ++k) out += s.weight[k] * y.point(s.index[k]);
  return out;
}

void scatter(PositionMap& g, const BilinearStencil& s, const Vec3& v) {
  for (int k = 0; k < 4; ++k) g.values.row(s.index[k]) += (s.weight[k] * v).transpose();
}

}  // namespace

LossValue loss_int(std::span<const PositionMap> maps, const StitchSampler& stitches) {
  LossValue out{0.0, zeros_like(maps)};
  const auto& pairs = stitches.pairs();
  if (pairs.empty()) return out;
  const double inv = 1.0 / static_cast<double>(pairs.size());
  for (const auto& p : pairs) {
    if (p.panel_a >= static_cast<int>(maps.size()) || p.panel_b >= static_cast<int>(maps.size())) {
      throw Error("shape-mismatch", "stitch sampler built for more panels");
    }
    const Vec3 d = sample(maps[p.panel_a], p.a) - sample(maps[p.panel_b], p.b);
    out.value += d.lpNorm<1>();
    const Vec3 g = inv * d.unaryExpr([](double x) { return sign(x); });
    scatter(out.gradient[p.panel_a], p.a, g);
    scatter(out.gradient[p.panel_b], p.b, -g);
  }
  out.value *= inv;
  return out;
}

// --- L_nor ----------------------------------------------------------------------------

LossValue loss_nor(std::span<const PositionMap> maps, std::span<const NormalMap> targets,
                   std::span<const MaskMap> masks) {
  require_same_count(maps.size(), targets.size(), "normal targets");
  require_same_count(maps.size(), masks.size(), "masks");
  LossValue out{0.0, zeros_like(maps)};

  struct Term {
    int panel;
    AxisStencil u, v;
    Vec3 du, dv, c, target;
  };
  std::vector<Term> terms;
  std::size_t usable = 0;
  for (std::size_t t = 0; t < maps.size(); ++t) {
    const MaskMap& m = masks[t];
    require_shape(maps[t], m);
    require_shape(targets[t], m);
    for (int i = 0; i < m.rows(); ++i) {
      for (int j = 0; j < m.cols(); ++j) {
        if (!m.inside(i, j)) continue;
        const Vec3 target = targets[t].at(i, j).transpose();
        if (target.squaredNorm() == 0.0) continue;
        ++usable;
        const auto su = u_stencil(m, i, j);
        const auto sv = v_stencil(m, i, j);
        if (!su || !sv) continue;
        const PositionMap& y = maps[t];
        const Vec3 du = su->scale * (y.point(su->plus) - y.point(su->minus));
        const Vec3 dv = sv->scale * (y.point(sv->plus) - y.point(sv->minus));
        const Vec3 c = -du.cross(dv);
        if (c.norm() < kNormalDegeneracy) continue;
        terms.push_back({static_cast<int>(t), *su, *sv, du, dv, c, target});
      }
    }
  }
  if (usable == 0) throw Error("no-normals", "every target normal is a sentinel");
  // a fully collapsed prediction has no defined normal anywhere
  if (terms.empty()) return out;
  const double inv = 1.0 / static_cast<double>(terms.size());
  for (const Term& k : terms) {
    const double len = k.c.norm();
    const Vec3 n = k.c / len;
    const double cosine = n.dot(k.target);
    out.value -= cosine;
    // d(-n.target)/dc, then through c = -(du x dv)
    const Vec3 gc = -(inv / len) * (k.target - cosine * n);
    const Vec3 gdu = -k.dv.cross(gc);
    const Vec3 gdv = -gc.cross(k.du);
    PositionMap& g = out.gradient[k.panel];
    g.values.row(k.u.plus) += (k.u.scale * gdu).transpose();
    g.values.row(k.u.minus) -= (k.u.scale * gdu).transpose();
    g.values.row(k.v.plus) += (k.v.scale * gdv).transpose();
    g.values.row(k.v.minus) -= (k.v.scale * gdv).transpose();
  }
  out.value *= inv;
  return out;
}

// --- total ------------------------------------------------------------------------------

LossReport loss_total(std::span<const PositionMap> maps, const LossTargets& targets,
                      const StitchSampler& stitches, const LossWeights& w, double s) {
  LossReport r;
  r.gradient = zeros_like(maps);
  auto accumulate = [&](const LossValue& v, double weight) {
    for (std::size_t t = 0; t < maps.size(); ++t) r.gradient[t].values += weight * v.gradient[t].values;
  };
  if (w.rec != 0.0) {
    const LossValue v = loss_rec(maps, targets.positions, targets.masks);
    r.rec = v.value;
    accumulate(v, w.rec);
  }
  if (w.inn != 0.0) {
    const LossValue v = loss_inn(maps, targets.masks, s);
    r.inn = v.value;
    accumulate(v, w.inn);
  }
  if (w.inter != 0.0) {
    const LossValue v = loss_int(maps, stitches);
    r.inter = v.value;
    accumulate(v, w.inter);
  }
  if (w.nor != 0.0) {
    const LossValue v = loss_nor(maps, targets.normals, targets.masks);
    r.nor = v.value;
    accumulate(v, w.nor);
  }
  r.total = w.rec * r.rec + w.inn * r.inn + w.inter * r.inter + w.nor * r.nor;
  return r;
}

std::string LossReport::to_text() const {
  std::ostringstream out;
  out.precision(17);
  out << "total=" << total << " rec=" << rec << " inn=" << inn << " int=" << inter << " nor=" << nor;
  return out.str();
}

// --- kinks --------------------------------------------------------------------------------

KinkDistance kink_distance_rec(std::vector<PositionMap> targets) {
  return [targets = std::move(targets)](std::span<const PositionMap> maps, int t, Eigen::Index p, int c) {
    return std::abs(maps[t].values(p, c) - targets[t].values(p, c));
  };
}

KinkDistance kink_distance_inn(std::vector<MaskMap> masks, double s) {
  return [masks = std::move(masks), s](std::span<const PositionMap> maps, int t, Eigen::Index p, int) {
    const MaskMap& m = masks[t];
    const int i = static_cast<int>(p / m.cols());
    const int j = static_cast<int>(p % m.cols());
    double best = std::numeric_limits<double>::infinity();
    constexpr int di[4] = {0, 0, 1, -1};
    constexpr int dj[4] = {1, -1, 0, 0};
    if (!m.inside(i, j)) return best;
    for (int k = 0; k < 4; ++k) {
      if (!m.inside(i + di[k], j + dj[k])) continue;
      const double len = (maps[t].point(p) - maps[t].point(m.index(i + di[k], j + dj[k]))).norm();
      best = std::min({best, std::abs(len - s), len});
    }
    return best;
  };
}

KinkDistance kink_distance_int(StitchSampler stitches) {
  return [stitches = std::move(stitches)](std::span<const PositionMap> maps, int t, Eigen::Index p, int c) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& pr : stitches.pairs()) {
      double w = 0.0;
      for (int k = 0; k < 4; ++k) {
        if (pr.panel_a == t && pr.a.index[k] == p) w += pr.a.weight[k];
        if (pr.panel_b == t && pr.b.index[k] == p) w += pr.b.weight[k];
      }
      if (w == 0.0) continue;
      const double d = sample(maps[pr.panel_a], pr.a)(c) - sample(maps[pr.panel_b], pr.b)(c);
      best = std::min(best, std::abs(d) / w);
    }
    return best;
  };
}

// --- finite differences -------------------------------------------------------------------

std::vector<std::pair<int, Eigen::Index>> masked_pixels(std::span<const MaskMap> masks) {
  std::vector<std::pair<int, Eigen::Index>> out;
  for (std::size_t t = 0; t < masks.size(); ++t) {
    for (int i = 0; i < masks[t].rows(); ++i) {
      for (int j = 0; j < masks[t].cols(); ++j) {
        if (masks[t].inside(i, j)) out.emplace_back(static_cast<int>(t), masks[t].index(i, j));
      }
    }
  }
  return out;
}

FiniteDiffResult finite_diff_check(const LossFunction& loss, std::vector<PositionMap> maps,
                                   std::span<const std::pair<int, Eigen::Index>> support,
                                   const FiniteDiffOptions& options, const KinkDistance& kink) {
  if (!(options.step > 0.0)) throw Error("invalid-argument", "finite-difference step must be positive");
  FiniteDiffResult result;
  if (support.empty()) return result;

  struct Coord {
    int panel;
    Eigen::Index pixel;
    int axis;
  };
  std::vector<Coord> coords;
  const std::size_t total = support.size() * 3;
  if (total <= static_cast<std::size_t>(options.coordinates)) {
    for (const auto& [t, p] : support) {
      for (int c = 0; c < 3; ++c) coords.push_back({t, p, c});
    }
  } else {
    // partial Fisher-Yates over the flattened coordinate list
    std::vector<std::size_t> idx(total);
    for (std::size_t k = 0; k < total; ++k) idx[k] = k;
    Rng rng(options.seed);
    for (int k = 0; k < options.coordinates; ++k) {
      const std::size_t r = k + rng.below(total - k);
      std::swap(idx[k], idx[r]);
      const auto& [t, p] = support[idx[k] / 3];
      coords.push_back({t, p, static_cast<int>(idx[k] % 3)});
    }
  }

  const LossValue base = loss(maps);
  std::vector<double> analytic;
  std::vector<double> numeric;
  double gmax = 0.0;
  for (const Coord& k : coords) {
    if (kink && kink(maps, k.panel, k.pixel, k.axis) < 10.0 * options.step) {
      ++result.excluded;
      continue;
    }
    double& x = maps[k.panel].values(k.pixel, k.axis);
    const double x0 = x;
    x = x0 + options.step;
    const double fp = loss(maps).value;
    x = x0 - options.step;
    const double fm = loss(maps).value;
    x = x0;
    analytic.push_back(base.gradient[k.panel].values(k.pixel, k.axis));
    numeric.push_back((fp - fm) / (2.0 * options.step));
    gmax = std::max(gmax, std::abs(analytic.back()));
  }
  const double floor = 1e-6 * gmax;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    const double denom = std::max({std::abs(analytic[k]), std::abs(numeric[k]), floor});
    const double err = denom > 0.0 ? std::abs(analytic[k] - numeric[k]) / denom : 0.0;
    result.max_relative_error = std::max(result.max_relative_error, err);
  }
  result.checked = static_cast<int>(analytic.size());
  return result;
}

}  // namespace sewkit
