#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "sewkit/decoder.hpp"
#include "sewkit/random.hpp"

using namespace sewkit;

namespace {

DecoderShape small_shape() {
  DecoderShape s;
  s.input = 6;
  s.hidden1 = 8;
  s.hidden2 = 12;
  s.coarse = 4;
  s.out = 9;
  s.panels = {"a", "b"};
  return s;
}

Embedding random_embedding(int groups, int h, Rng& rng) {
  Embedding e = zero_embedding(groups, h);
  e.presence.setConstant(true);
  for (int g = 0; g < groups; ++g)
    for (int c = 0; c < h; ++c) e.coefficients(g, c) = rng.normal();
  return e;
}

DecoderParams random_params(const DecoderShape& shape, Rng& rng) {
  DecoderParams p = init_decoder(shape, 11);
  for (Eigen::Index i = 0; i < p.theta.size(); ++i) p.theta(i) = 0.5 * rng.normal();
  for (Eigen::Index i = 0; i < p.input_scale.size(); ++i) p.input_scale(i) = rng.uniform(0.5, 2.0);
  p.output_scale = 1.7;
  return p;
}

double squared_norm(const std::vector<PositionMap>& maps) {
  double s = 0.0;
  for (const auto& m : maps) s += m.values.squaredNorm();
  return s;
}

std::vector<PositionMap> random_upstream(const DecoderShape& shape, Rng& rng) {
  std::vector<PositionMap> g;
  for (int t = 0; t < shape.panel_count(); ++t) {
    PositionMap m(shape.out, shape.out);
    for (Eigen::Index p = 0; p < m.pixels(); ++p)
      for (int c = 0; c < 3; ++c) m.values(p, c) = rng.normal();
    g.push_back(m);
  }
  return g;
}

}  // namespace

TEST(Decoder, ParameterCount) {
  const DecoderShape s = small_shape();
  EXPECT_EQ(s.parameter_count(), 8 * 6 + 8 + 12 * 8 + 12 + 96 * 12 + 96);
  EXPECT_EQ(init_decoder(s, 1).theta.size(), s.parameter_count());
}

TEST(Decoder, UpsampleIsCornerAligned) {
  const Eigen::MatrixXd u = upsample_matrix(16, 128);
  ASSERT_EQ(u.rows(), 128);
  ASSERT_EQ(u.cols(), 16);
  EXPECT_LT((u.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-15);
  EXPECT_EQ(u(0, 0), 1.0);
  EXPECT_EQ(u(127, 15), 1.0);
  for (int r = 0; r < 128; ++r) EXPECT_LE((u.row(r).array() != 0.0).count(), 2);
  // a linear ramp stays a linear ramp
  Eigen::VectorXd ramp = Eigen::VectorXd::LinSpaced(16, 0.0, 15.0);
  const Eigen::VectorXd up = u * ramp;
  for (int r = 0; r < 128; ++r) EXPECT_NEAR(up(r), r * 15.0 / 127.0, 1e-12);
}

TEST(Decoder, ZeroParamsGiveZeroMaps) {
  DecoderShape s;
  s.input = 72;
  s.panels = {"p0", "p1", "p2"};
  DecoderParams p = init_decoder(s, 3);
  p.theta.setZero();
  Rng rng(1);
  const auto maps = decode(random_embedding(6, 12, rng), p);
  ASSERT_EQ(maps.size(), 3u);
  for (const auto& m : maps) {
    EXPECT_EQ(m.rows, kMapSize);
    EXPECT_EQ(m.cols, kMapSize);
    EXPECT_EQ(m.values.cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Decoder, Deterministic) {
  DecoderShape s;
  s.input = 72;
  s.panels = {"p0", "p1"};
  Rng rng(2);
  const Embedding e = random_embedding(6, 12, rng);
  const auto a = decode(e, init_decoder(s, 42));
  const auto b = decode(e, init_decoder(s, 42));
  for (std::size_t t = 0; t < a.size(); ++t) EXPECT_TRUE((a[t].values.array() == b[t].values.array()).all());
  EXPECT_FALSE((decode(e, init_decoder(s, 43))[0].values.array() == a[0].values.array()).all());
}

TEST(Decoder, InputSizeChecked) {
  DecoderShape s = small_shape();
  Rng rng(3);
  EXPECT_THROW(decode(random_embedding(2, 4, rng), init_decoder(s, 1)), Error);
}

TEST(DecoderBackward, ZeroUpstream) {
  const DecoderShape s = small_shape();
  Rng rng(4);
  const DecoderParams p = random_params(s, rng);
  const Embedding e = random_embedding(2, 3, rng);
  std::vector<PositionMap> zeros(2, PositionMap(s.out, s.out));
  std::vector<PositionMap> empty(2);
  for (const auto& up : {zeros, empty}) {
    const DecoderGradient g = decoder_backward(e, p, up);
    EXPECT_EQ(g.theta.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(g.embedding.cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(DecoderBackward, FiniteDifferences) {
  const DecoderShape s = small_shape();
  Rng rng(5);
  DecoderParams p = random_params(s, rng);
  const Embedding e = random_embedding(2, 3, rng);
  // L = sum |Y|^2, dL/dY = 2 Y
  auto upstream = decode(e, p);
  for (auto& m : upstream) m.values *= 2.0;
  const DecoderGradient g = decoder_backward(e, p, upstream);
  const double h = 1e-6;
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const Eigen::Index i = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(p.theta.size())));
    DecoderParams plus = p, minus = p;
    plus.theta(i) += h;
    minus.theta(i) -= h;
    const double fd = (squared_norm(decode(e, plus)) - squared_norm(decode(e, minus))) / (2 * h);
    const double scale = std::max({std::abs(fd), std::abs(g.theta(i)), 1e-6 * g.theta.cwiseAbs().maxCoeff()});
    worst = std::max(worst, std::abs(fd - g.theta(i)) / scale);
  }
  EXPECT_LT(worst, 1e-4);

  const Eigen::VectorXd flat = e.flat();
  for (Eigen::Index i = 0; i < flat.size(); ++i) {
    Embedding ep = e, em = e;
    ep.coefficients(i / 3, i % 3) += h;
    em.coefficients(i / 3, i % 3) -= h;
    const double fd = (squared_norm(decode(ep, p)) - squared_norm(decode(em, p))) / (2 * h);
    EXPECT_NEAR(g.embedding(i), fd, 1e-4 * std::max(1.0, std::abs(fd))) << i;
  }
}

TEST(DecoderBackward, Linear) {
  const DecoderShape s = small_shape();
  Rng rng(6);
  const DecoderParams p = random_params(s, rng);
  const Embedding e = random_embedding(2, 3, rng);
  const auto g1 = random_upstream(s, rng), g2 = random_upstream(s, rng);
  auto sum = g1;
  for (std::size_t t = 0; t < sum.size(); ++t) sum[t].values += g2[t].values;
  const DecoderGradient a = decoder_backward(e, p, sum);
  const DecoderGradient b = decoder_backward(e, p, g1);
  const DecoderGradient c = decoder_backward(e, p, g2);
  const double scale = a.theta.cwiseAbs().maxCoeff();
  EXPECT_LE((a.theta - b.theta - c.theta).cwiseAbs().maxCoeff(), 1e-12 * scale);
  EXPECT_LE((a.embedding - b.embedding - c.embedding).cwiseAbs().maxCoeff(), 1e-12 * scale);
}

TEST(Checkpoint, Roundtrip) {
  const DecoderShape s = small_shape();
  Rng rng(7);
  DecoderParams p = random_params(s, rng);
  p.seed = 123456789;
  p.epoch = 7;
  std::stringstream buf;
  write_checkpoint(buf, p);
  const DecoderParams q = read_checkpoint(buf);
  EXPECT_EQ(q.shape, p.shape);
  EXPECT_EQ(q.theta, p.theta);
  EXPECT_EQ(q.input_scale, p.input_scale);
  EXPECT_EQ(q.output_scale, p.output_scale);
  EXPECT_EQ(q.seed, p.seed);
  EXPECT_EQ(q.epoch, 7u);
  EXPECT_EQ(checkpoint_hash(q), checkpoint_hash(p));
  p.theta(0) += 1e-12;
  EXPECT_NE(checkpoint_hash(q), checkpoint_hash(p));
}

TEST(Checkpoint, BadMagic) {
  std::stringstream buf("XXXX0000");
  EXPECT_THROW(read_checkpoint(buf), Error);
}
