#include "sewkit/decoder.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "sewkit/binary_io.hpp"
#include "sewkit/error.hpp"
#include "sewkit/random.hpp"

namespace sewkit {

namespace {

struct Offsets {
  Eigen::Index w1, b1, w2, b2, w3, b3, end;
};

Offsets offsets(const DecoderShape& s) {
  Offsets o{};
  o.w1 = 0;
  o.b1 = o.w1 + static_cast<Eigen::Index>(s.hidden1) * s.input;
  o.w2 = o.b1 + s.hidden1;
  o.b2 = o.w2 + static_cast<Eigen::Index>(s.hidden2) * s.hidden1;
  o.w3 = o.b2 + s.hidden2;
  o.b3 = o.w3 + s.output_size() * s.hidden2;
  o.end = o.b3 + s.output_size();
  return o;
}

const Eigen::MatrixXd& cached_upsample(int coarse, int out) {
  thread_local int c = -1, o = -1;
  thread_local Eigen::MatrixXd u;
  if (c != coarse || o != out) {
    u = upsample_matrix(coarse, out);
    c = coarse;
    o = out;
  }
  return u;
}

}  // namespace

Eigen::Index DecoderShape::parameter_count() const { return offsets(*this).end; }

DecoderParams::ConstMatMap DecoderParams::w1() const {
  return {theta.data() + offsets(shape).w1, shape.hidden1, shape.input};
}
DecoderParams::ConstVecMap DecoderParams::b1() const { return {theta.data() + offsets(shape).b1, shape.hidden1}; }
DecoderParams::ConstMatMap DecoderParams::w2() const {
  return {theta.data() + offsets(shape).w2, shape.hidden2, shape.hidden1};
}
DecoderParams::ConstVecMap DecoderParams::b2() const { return {theta.data() + offsets(shape).b2, shape.hidden2}; }
DecoderParams::ConstMatMap DecoderParams::w3() const {
  return {theta.data() + offsets(shape).w3, shape.output_size(), shape.hidden2};
}
DecoderParams::ConstVecMap DecoderParams::b3() const {
  return {theta.data() + offsets(shape).b3, shape.output_size()};
}
DecoderParams::VecMap DecoderParams::b3() { return {theta.data() + offsets(shape).b3, shape.output_size()}; }

DecoderShape decoder_shape_for(const BasisRegistry& bases) {
  DecoderShape s;
  s.input = bases.embedding_dim();
  s.panels = bases.groups.panel_ids();
  return s;
}

DecoderParams init_decoder(const DecoderShape& shape, std::uint64_t seed) {
  if (shape.input <= 0 || shape.hidden1 <= 0 || shape.hidden2 <= 0 || shape.coarse < 2 || shape.out < 2 ||
      shape.panels.empty()) {
    throw Error("invalid-argument", "decoder dimensions must be positive");
  }
  DecoderParams p;
  p.shape = shape;
  p.seed = seed;
  p.theta = Eigen::VectorXd::Zero(shape.parameter_count());
  p.input_scale = Eigen::VectorXd::Ones(shape.input);
  Rng rng(seed);
  const Offsets o = offsets(shape);
  auto glorot = [&](Eigen::Index at, Eigen::Index rows, Eigen::Index cols) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    for (Eigen::Index k = 0; k < rows * cols; ++k) p.theta(at + k) = rng.uniform(-limit, limit);
  };
  glorot(o.w1, shape.hidden1, shape.input);
  glorot(o.w2, shape.hidden2, shape.hidden1);
  glorot(o.w3, shape.output_size(), shape.hidden2);
  return p;
}

Eigen::MatrixXd upsample_matrix(int coarse, int out) {
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(out, coarse);
  for (int i = 0; i < out; ++i) {
    const double src = static_cast<double>(i) * (coarse - 1) / (out - 1);
    const int j0 = std::min(static_cast<int>(std::floor(src)), coarse - 2);
    const double t = src - j0;
    u(i, j0) += 1.0 - t;
    u(i, j0 + 1) += t;
  }
  return u;
}

DecoderTrace decoder_forward(const Eigen::VectorXd& embedding, const DecoderParams& params) {
  const DecoderShape& s = params.shape;
  if (embedding.size() != s.input) {
    throw Error("dimension-mismatch", "embedding has " + std::to_string(embedding.size()) +
                                          " entries, decoder expects " + std::to_string(s.input));
  }
  DecoderTrace t;
  t.x = embedding.cwiseQuotient(params.input_scale);
  t.h1 = (params.w1() * t.x + params.b1()).array().tanh().matrix();
  t.h2 = (params.w2() * t.h1 + params.b2()).array().tanh().matrix();
  t.head = params.output_scale * (params.w3() * t.h2 + params.b3());
  return t;
}

PositionMap decoder_panel(const DecoderTrace& trace, const DecoderParams& params, int slot) {
  const DecoderShape& s = params.shape;
  const Eigen::MatrixXd& u = cached_upsample(s.coarse, s.out);
  PositionMap y(s.out, s.out, s.panels[slot]);
  const Eigen::Index base = slot * s.head_size();
  for (int c = 0; c < 3; ++c) {
    Eigen::MatrixXd grid(s.coarse, s.coarse);
    for (int i = 0; i < s.coarse; ++i)
      for (int j = 0; j < s.coarse; ++j) grid(i, j) = trace.head(base + (i * s.coarse + j) * 3 + c);
    const Eigen::MatrixXd full = u * grid * u.transpose();
    for (int i = 0; i < s.out; ++i)
      for (int j = 0; j < s.out; ++j) y.values(static_cast<Eigen::Index>(i) * s.out + j, c) = full(i, j);
  }
  return y;
}

std::vector<PositionMap> decode(const Embedding& e, const DecoderParams& params) {
  const DecoderTrace t = decoder_forward(e.flat(), params);
  std::vector<PositionMap> out;
  for (int slot = 0; slot < params.shape.panel_count(); ++slot) out.push_back(decoder_panel(t, params, slot));
  return out;
}

DecoderGradient decoder_backward(const Embedding& e, const DecoderParams& params,
                                 std::span<const PositionMap> upstream) {
  return decoder_backward(decoder_forward(e.flat(), params), params, upstream);
}

DecoderGradient decoder_backward(const DecoderTrace& trace, const DecoderParams& params,
                                 std::span<const PositionMap> upstream) {
  const DecoderShape& s = params.shape;
  if (static_cast<int>(upstream.size()) != s.panel_count()) {
    throw Error("shape-mismatch", "upstream gradient needs one map per decoder panel");
  }
  const Eigen::MatrixXd& u = cached_upsample(s.coarse, s.out);
  const Offsets o = offsets(s);
  DecoderGradient g;
  g.theta = Eigen::VectorXd::Zero(o.end);

  // d/d(head), restricted to panels with a non-empty upstream
  Eigen::VectorXd ghead = Eigen::VectorXd::Zero(s.output_size());
  std::vector<int> active;
  for (int slot = 0; slot < s.panel_count(); ++slot) {
    const PositionMap& up = upstream[slot];
    if (up.rows == 0) continue;
    if (up.rows != s.out || up.cols != s.out) throw Error("shape-mismatch", "upstream map has the wrong size");
    active.push_back(slot);
    const Eigen::Index base = slot * s.head_size();
    for (int c = 0; c < 3; ++c) {
      Eigen::MatrixXd full(s.out, s.out);
      for (int i = 0; i < s.out; ++i)
        for (int j = 0; j < s.out; ++j) full(i, j) = up.values(static_cast<Eigen::Index>(i) * s.out + j, c);
      const Eigen::MatrixXd grid = u.transpose() * full * u;
      for (int i = 0; i < s.coarse; ++i)
        for (int j = 0; j < s.coarse; ++j) ghead(base + (i * s.coarse + j) * 3 + c) = grid(i, j);
    }
  }
  const Eigen::VectorXd go = params.output_scale * ghead;  // dL/d(W3 h2 + b3)
  Eigen::Map<Eigen::MatrixXd> gw3(g.theta.data() + o.w3, s.output_size(), s.hidden2);
  Eigen::Map<Eigen::VectorXd> gb3(g.theta.data() + o.b3, s.output_size());
  Eigen::VectorXd gh2 = Eigen::VectorXd::Zero(s.hidden2);
  const auto w3 = params.w3();
  for (int slot : active) {
    const Eigen::Index base = slot * s.head_size();
    const Eigen::Index n = s.head_size();
    gw3.middleRows(base, n).noalias() = go.segment(base, n) * trace.h2.transpose();
    gb3.segment(base, n) = go.segment(base, n);
    gh2.noalias() += w3.middleRows(base, n).transpose() * go.segment(base, n);
  }
  const Eigen::VectorXd ga2 = gh2.cwiseProduct((1.0 - trace.h2.array().square()).matrix());
  Eigen::Map<Eigen::MatrixXd>(g.theta.data() + o.w2, s.hidden2, s.hidden1).noalias() = ga2 * trace.h1.transpose();
  Eigen::Map<Eigen::VectorXd>(g.theta.data() + o.b2, s.hidden2) = ga2;
  const Eigen::VectorXd gh1 = params.w2().transpose() * ga2;
  const Eigen::VectorXd ga1 = gh1.cwiseProduct((1.0 - trace.h1.array().square()).matrix());
  Eigen::Map<Eigen::MatrixXd>(g.theta.data() + o.w1, s.hidden1, s.input).noalias() = ga1 * trace.x.transpose();
  Eigen::Map<Eigen::VectorXd>(g.theta.data() + o.b1, s.hidden1) = ga1;
  g.embedding = (params.w1().transpose() * ga1).cwiseQuotient(params.input_scale);
  return g;
}

// --- checkpoint -----------------------------------------------------------------------

void write_checkpoint(std::ostream& out, const DecoderParams& p) {
  const DecoderShape& s = p.shape;
  binary::write_magic(out, "SWKC");
  binary::write_u32(out, 1);
  for (int v : {s.input, s.hidden1, s.hidden2, s.coarse, s.out, s.panel_count()}) {
    binary::write_u32(out, static_cast<std::uint32_t>(v));
  }
  for (const std::string& id : s.panels) binary::write_string(out, id);
  binary::write_u64(out, p.seed);
  binary::write_u32(out, p.epoch);
  binary::write_f64(out, p.output_scale);
  binary::write_f64_array(out, p.input_scale.data(), static_cast<std::size_t>(p.input_scale.size()));
  binary::write_u64(out, static_cast<std::uint64_t>(p.theta.size()));
  binary::write_f64_array(out, p.theta.data(), static_cast<std::size_t>(p.theta.size()));
}

DecoderParams read_checkpoint(std::istream& in) {
  binary::expect_magic(in, "SWKC");
  if (binary::read_u32(in) != 1) throw Error("format", "unsupported checkpoint version");
  DecoderParams p;
  DecoderShape& s = p.shape;
  int* dims[] = {&s.input, &s.hidden1, &s.hidden2, &s.coarse, &s.out};
  for (int* d : dims) {
    const std::uint32_t v = binary::read_u32(in);
    if (v == 0 || v > (1u << 20)) throw Error("format", "implausible checkpoint dimension");
    *d = static_cast<int>(v);
  }
  const std::uint32_t panels = binary::read_u32(in);
  if (panels == 0 || panels > 4096) throw Error("format", "implausible panel count");
  for (std::uint32_t k = 0; k < panels; ++k) s.panels.push_back(binary::read_string(in));
  p.seed = binary::read_u64(in);
  p.epoch = binary::read_u32(in);
  p.output_scale = binary::read_f64(in);
  p.input_scale.resize(s.input);
  binary::read_f64_array(in, p.input_scale.data(), static_cast<std::size_t>(s.input));
  const std::uint64_t n = binary::read_u64(in);
  if (n != static_cast<std::uint64_t>(s.parameter_count())) throw Error("format", "parameter count mismatch");
  p.theta.resize(static_cast<Eigen::Index>(n));
  binary::read_f64_array(in, p.theta.data(), n);
  return p;
}

std::uint64_t checkpoint_hash(const DecoderParams& params) {
  std::ostringstream out;
  write_checkpoint(out, params);
  const std::string bytes = out.str();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace sewkit
