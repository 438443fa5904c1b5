#include "sewkit/groups.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>

#include <Eigen/SVD>

#include "sewkit/binary_io.hpp"

namespace sewkit {

using nlohmann::json;

// --- registry -------------------------------------------------------------------

int GroupDef::total_edges() const {
  int n = 0;
  for (const auto& r : roles) n += r.edge_count;
  return n;
}

GroupRegistry::GroupRegistry(std::vector<GroupDef> groups, std::vector<SeamTemplate> seams)
    : groups_(std::move(groups)), seams_(std::move(seams)) {
  std::vector<Violation> problems;
  std::set<std::string> group_names;
  std::set<std::string> role_names;
  if (groups_.empty()) problems.push_back({"empty-registry", "registry has no groups"});
  for (const GroupDef& g : groups_) {
    if (!group_names.insert(g.name).second) problems.push_back({"duplicate-group", g.name});
    if (g.roles.empty()) problems.push_back({"group-without-roles", g.name});
    for (const PanelRole& r : g.roles) {
      if (!role_names.insert(r.name).second) problems.push_back({"duplicate-role", r.name});
      if (r.edge_count < 3) problems.push_back({"too-few-edges", r.name});
    }
  }
  for (const SeamTemplate& s : seams_) {
    for (const auto& [panel, edge] : {std::pair{s.panel_a, s.edge_a}, std::pair{s.panel_b, s.edge_b}}) {
      const auto loc = locate_panel(panel);
      if (!loc) {
        problems.push_back({"unknown-panel", "seam template references " + panel});
      } else if (edge < 0 || edge >= groups_[loc->group].roles[loc->role].edge_count) {
        problems.push_back({"edge-out-of-range", "seam template on " + panel});
      }
    }
  }
  if (!problems.empty()) throw ValidationError(std::move(problems));
}

std::optional<int> GroupRegistry::group_index(std::string_view name) const {
  for (std::size_t i = 0; i < groups_.size(); ++i) {
    if (groups_[i].name == name) return static_cast<int>(i);
  }
  return std::nullopt;
}

std::optional<RoleLocation> GroupRegistry::locate_panel(std::string_view panel_id) const {
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    const auto& roles = groups_[g].roles;
    for (std::size_t r = 0; r < roles.size(); ++r) {
      if (roles[r].name == panel_id) return RoleLocation{static_cast<int>(g), static_cast<int>(r)};
    }
  }
  return std::nullopt;
}

std::vector<std::string> GroupRegistry::panel_ids() const {
  std::vector<std::string> out;
  for (const auto& g : groups_) {
    for (const auto& r : g.roles) out.push_back(r.name);
  }
  return out;
}

int GroupRegistry::panel_count() const {
  int n = 0;
  for (const auto& g : groups_) n += static_cast<int>(g.roles.size());
  return n;
}

json GroupRegistry::to_json() const {
  json groups = json::array();
  for (const auto& g : groups_) {
    json roles = json::array();
    for (const auto& r : g.roles) roles.push_back({{"name", r.name}, {"edges", r.edge_count}});
    groups.push_back({{"name", g.name}, {"roles", roles}});
  }
  json seams = json::array();
  for (const auto& s : seams_) {
    seams.push_back({{"a", {s.panel_a, s.edge_a}}, {"b", {s.panel_b, s.edge_b}}, {"reversed", s.reversed}});
  }
  return {{"groups", groups}, {"seams", seams}};
}

GroupRegistry GroupRegistry::from_json(const json& doc) {
  try {
    std::vector<GroupDef> groups;
    for (const json& jg : doc.at("groups")) {
      GroupDef g;
      g.name = jg.at("name").get<std::string>();
      for (const json& jr : jg.at("roles")) {
        g.roles.push_back({jr.at("name").get<std::string>(), jr.at("edges").get<int>()});
      }
      groups.push_back(std::move(g));
    }
    std::vector<SeamTemplate> seams;
    if (doc.contains("seams")) {
      for (const json& js : doc.at("seams")) {
        SeamTemplate s;
        s.panel_a = js.at("a").at(0).get<std::string>();
        s.edge_a = js.at("a").at(1).get<int>();
        s.panel_b = js.at("b").at(0).get<std::string>();
        s.edge_b = js.at("b").at(1).get<int>();
        s.reversed = js.value("reversed", false);
        seams.push_back(std::move(s));
      }
    }
    return GroupRegistry(std::move(groups), std::move(seams));
  } catch (const json::exception& e) {
    throw Error("schema", std::string("bad registry document: ") + e.what());
  }
}

const GroupRegistry& default_registry() {
  static const GroupRegistry registry = [] {
    auto two = [](const char* name, const char* a, const char* b) {
      return GroupDef{name, {{a, 4}, {b, 4}}};
    };
    std::vector<GroupDef> groups = {
        two("waistband", "waistband-front", "waistband-back"),
        two("skirt-body", "skirt-front", "skirt-back"),
        two("bodice", "bodice-front", "bodice-back"),
        GroupDef{"leg-left", {{"leg-left", 4}}},
        GroupDef{"leg-right", {{"leg-right", 4}}},
        two("torso", "torso-front", "torso-back"),
    };
    // Edge order on every panel: 0 bottom, 1 right, 2 top, 3 left (CCW).
    auto sides = [](const char* front, const char* back) {
      return std::vector<SeamTemplate>{{front, 1, back, 3, true}, {front, 3, back, 1, true}};
    };
    std::vector<SeamTemplate> seams;
    for (auto [f, b] : {std::pair{"waistband-front", "waistband-back"},
                        std::pair{"skirt-front", "skirt-back"},
                        std::pair{"bodice-front", "bodice-back"},
                        std::pair{"torso-front", "torso-back"}}) {
      auto s = sides(f, b);
      seams.insert(seams.end(), s.begin(), s.end());
    }
    seams.push_back({"waistband-front", 0, "skirt-front", 2, true});
    seams.push_back({"waistband-back", 0, "skirt-back", 2, true});
    seams.push_back({"bodice-front", 0, "skirt-front", 2, true});
    seams.push_back({"bodice-back", 0, "skirt-back", 2, true});
    seams.push_back({"leg-left", 1, "leg-left", 3, true});
    seams.push_back({"leg-right", 1, "leg-right", 3, true});
    return GroupRegistry(std::move(groups), std::move(seams));
  }();
  return registry;
}

// --- tensors & bases ----------------------------------------------------------------

Polyline2 GroupTensor::edge(int e) const {
  Polyline2 out(points);
  for (int k = 0; k < points; ++k) out[k] = point(e, k);
  return out;
}

Eigen::VectorXd GroupBasis::project(const GroupTensor& t) const {
  if (t.size() != mean.size()) {
    throw Error("shape-mismatch", "tensor size does not match basis of group " + group);
  }
  return components.transpose() * (t.values - mean);
}

GroupTensor GroupBasis::reconstruct(const Eigen::VectorXd& coefficients) const {
  if (coefficients.size() != components.cols()) {
    throw Error("shape-mismatch", "coefficient count does not match basis of group " + group);
  }
  GroupTensor t(edges, points);
  t.values = mean + components * coefficients;
  return t;
}

Eigen::VectorXd Embedding::flat() const {
  // Row-major: group 0's block first.
  Eigen::VectorXd out(coefficients.size());
  for (int g = 0; g < groups(); ++g) out.segment(g * h(), h()) = coefficients.row(g).transpose();
  return out;
}

Embedding zero_embedding(int groups, int h) {
  Embedding e;
  e.coefficients = Eigen::MatrixXd::Zero(groups, h);
  e.presence = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(groups, false);
  return e;
}

namespace {

template <typename EdgeSource>
GroupTensor assemble(const GroupDef& group, int points, EdgeSource&& lookup) {
  GroupTensor t(group.total_edges(), points);
  int row = 0;
  for (const PanelRole& role : group.roles) {
    const std::vector<Polyline2> edges = lookup(role);
    if (static_cast<int>(edges.size()) != role.edge_count) {
      throw Error("edge-count-mismatch", "panel " + role.name + " has " +
                                             std::to_string(edges.size()) + " edges, expected " +
                                             std::to_string(role.edge_count));
    }
    for (const Polyline2& e : edges) {
      if (static_cast<int>(e.size()) != points) {
        throw Error("shape-mismatch", "edge of " + role.name + " has wrong point count");
      }
      for (int k = 0; k < points; ++k) t.set_point(row, k, e[k]);
      ++row;
    }
  }
  return t;
}

void check_group_panels(const std::vector<std::pair<std::string, std::string>>& panels,
                        const GroupDef& group) {
  for (const auto& [id, tag] : panels) {
    if (tag != group.name) continue;
    const bool known = std::any_of(group.roles.begin(), group.roles.end(),
                                   [&](const PanelRole& r) { return r.name == id; });
    if (!known) throw Error("unexpected-panel", "panel " + id + " is not a role of group " + group.name);
  }
}

}  // namespace

GroupTensor assemble_group_tensor(const SewingPattern& pattern, const GroupDef& group,
                                  int points_per_edge) {
  std::vector<std::pair<std::string, std::string>> tags;
  for (const Panel& p : pattern.panels) tags.emplace_back(p.id, p.group);
  check_group_panels(tags, group);
  return assemble(group, points_per_edge, [&](const PanelRole& role) {
    const auto idx = pattern.panel_index(role.name);
    if (!idx || pattern.panels[*idx].group != group.name) {
      throw Error("missing-role", "missing role " + role.name + " of group " + group.name);
    }
    std::vector<Polyline2> edges;
    for (const SeamedEdge& e : pattern.panels[*idx].edges) {
      edges.push_back(discretize_edge(e, points_per_edge));
    }
    return edges;
  });
}

GroupTensor assemble_group_tensor(const GarmentOutline& outline, const GroupDef& group) {
  std::vector<std::pair<std::string, std::string>> tags;
  for (const PanelOutline& p : outline.panels) tags.emplace_back(p.id, p.group);
  check_group_panels(tags, group);
  int points = -1;
  for (const PanelOutline& p : outline.panels) {
    if (p.group == group.name && !p.edges.empty()) points = static_cast<int>(p.edges.front().size());
  }
  if (points < 2) throw Error("missing-role", "no panels of group " + group.name);
  return assemble(group, points, [&](const PanelRole& role) {
    const auto idx = outline.panel_index(role.name);
    if (!idx || outline.panels[*idx].group != group.name) {
      throw Error("missing-role", "missing role " + role.name + " of group " + group.name);
    }
    return outline.panels[*idx].edges;
  });
}

GroupBasis fit_group_basis(std::span<const GroupTensor> samples, int h, std::string group_name) {
  if (samples.empty()) throw Error("no-samples", "fit_group_basis needs at least one sample");
  if (h < 1) throw Error("bad-count", "component count must be positive");
  const GroupTensor& first = samples.front();
  const Eigen::Index dim = first.size();
  const Eigen::Index n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd data(n, dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const GroupTensor& s = samples[i];
    if (s.edges != first.edges || s.points != first.points) {
      throw Error("shape-mismatch", "samples of different shapes in fit_group_basis");
    }
    data.row(i) = s.values.transpose();
  }

  GroupBasis basis;
  basis.group = std::move(group_name);
  basis.edges = first.edges;
  basis.points = first.points;
  basis.sample_count = n;
  basis.mean = data.colwise().mean().transpose();
  data.rowwise() -= basis.mean.transpose();
  basis.components = Eigen::MatrixXd::Zero(dim, h);

  Eigen::BDCSVD<Eigen::MatrixXd> svd(data, Eigen::ComputeThinV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  if (sigma.size() == 0 || sigma(0) == 0.0) return basis;
  // Centering leaves rounding noise proportional to the raw coordinates.
  const double noise = 1e-12 * std::sqrt(static_cast<double>(n * dim)) * (basis.mean.cwiseAbs().maxCoeff() + 1.0);
  const double tolerance = std::max(sigma(0) * static_cast<double>(std::max(n, dim)) * 1e-13, noise);
  const Eigen::Index keep = std::min<Eigen::Index>(h, sigma.size());
  for (Eigen::Index c = 0; c < keep; ++c) {
    if (sigma(c) <= tolerance) break;
    Eigen::VectorXd v = svd.matrixV().col(c);
    Eigen::Index largest = 0;
    v.cwiseAbs().maxCoeff(&largest);
    if (v(largest) < 0.0) v = -v;
    basis.components.col(c) = v;
  }
  return basis;
}

BasisRegistry fit_bases(const GroupRegistry& registry,
                        std::span<const std::vector<std::optional<GroupTensor>>> tensors, int h) {
  BasisRegistry out{registry, h, {}};
  out.bases.resize(static_cast<std::size_t>(registry.size()));
  for (int g = 0; g < registry.size(); ++g) {
    std::vector<GroupTensor> samples;
    for (const auto& garment : tensors) {
      if (g < static_cast<int>(garment.size()) && garment[g]) samples.push_back(*garment[g]);
    }
    if (!samples.empty()) out.bases[g] = fit_group_basis(samples, h, registry.groups()[g].name);
  }
  return out;
}

void write_basis_registry(std::ostream& out, const BasisRegistry& bases) {
  binary::write_magic(out, "SWKB");
  binary::write_u32(out, 1);
  binary::write_string(out, bases.groups.to_json().dump());
  binary::write_u32(out, static_cast<std::uint32_t>(bases.h));
  binary::write_u32(out, static_cast<std::uint32_t>(bases.size()));
  for (int g = 0; g < bases.size(); ++g) {
    const bool fitted = g < static_cast<int>(bases.bases.size()) && bases.bases[g];
    binary::write_u8(out, fitted ? 1 : 0);
    if (!fitted) continue;
    const GroupBasis& b = *bases.bases[g];
    binary::write_string(out, b.group);
    binary::write_u32(out, static_cast<std::uint32_t>(b.edges));
    binary::write_u32(out, static_cast<std::uint32_t>(b.points));
    binary::write_u64(out, static_cast<std::uint64_t>(b.sample_count));
    binary::write_u32(out, static_cast<std::uint32_t>(b.mean.size()));
    binary::write_f64_array(out, b.mean.data(), static_cast<std::size_t>(b.mean.size()));
    binary::write_f64_array(out, b.components.data(), static_cast<std::size_t>(b.components.size()));
  }
}

BasisRegistry read_basis_registry(std::istream& in) {
  binary::expect_magic(in, "SWKB");
  if (binary::read_u32(in) != 1) throw Error("format", "unsupported basis registry version");
  json doc;
  try {
    doc = json::parse(binary::read_string(in));
  } catch (const json::exception& e) {
    throw Error("format", std::string("registry header: ") + e.what());
  }
  BasisRegistry out{GroupRegistry::from_json(doc), 0, {}};
  out.h = static_cast<int>(binary::read_u32(in));
  const std::uint32_t groups = binary::read_u32(in);
  if (out.h < 1 || out.h > 4096 || static_cast<int>(groups) != out.groups.size()) {
    throw Error("format", "basis registry header does not match its group list");
  }
  out.bases.resize(groups);
  for (std::uint32_t g = 0; g < groups; ++g) {
    if (binary::read_u8(in) == 0) continue;
    GroupBasis b;
    b.group = binary::read_string(in);
    b.edges = static_cast<int>(binary::read_u32(in));
    b.points = static_cast<int>(binary::read_u32(in));
    b.sample_count = static_cast<std::int64_t>(binary::read_u64(in));
    const std::uint32_t dim = binary::read_u32(in);
    if (dim != static_cast<std::uint32_t>(2 * b.edges * b.points) || dim > (1u << 24)) {
      throw Error("format", "basis dimension does not match edges x points");
    }
    b.mean.resize(dim);
    binary::read_f64_array(in, b.mean.data(), dim);
    b.components.resize(dim, out.h);
    binary::read_f64_array(in, b.components.data(), static_cast<std::size_t>(dim) * out.h);
    out.bases[g] = std::move(b);
  }
  return out;
}

Embedding encode(const SewingPattern& pattern, const BasisRegistry& bases, int points_per_edge) {
  const GroupRegistry& reg = bases.groups;
  Embedding e = zero_embedding(reg.size(), bases.h);
  for (const Panel& p : pattern.panels) {
    const auto g = reg.group_index(p.group);
    if (!g) throw Error("unknown-group", "panel " + p.id + " has unknown group " + p.group);
    e.presence(*g) = true;
  }
  for (int g = 0; g < reg.size(); ++g) {
    if (!e.presence(g)) continue;
    if (g >= static_cast<int>(bases.bases.size()) || !bases.bases[g]) {
      throw Error("unfitted-basis", "group " + reg.groups()[g].name + " has no fitted basis");
    }
    const GroupBasis& basis = *bases.bases[g];
    if (basis.h() != bases.h) throw Error("shape-mismatch", "basis component count differs");
    const GroupTensor t = assemble_group_tensor(pattern, reg.groups()[g], points_per_edge);
    e.coefficients.row(g) = basis.project(t).transpose();
  }
  return e;
}

std::vector<std::optional<GroupTensor>> decode_contours(const Embedding& e, const BasisRegistry& bases) {
  if (e.groups() != bases.size() || e.h() != bases.h || e.presence.size() != e.groups()) {
    throw Error("dimension-mismatch", "embedding shape does not match the basis registry");
  }
  std::vector<std::optional<GroupTensor>> out(e.groups());
  for (int g = 0; g < e.groups(); ++g) {
    if (!e.presence(g)) continue;
    if (g >= static_cast<int>(bases.bases.size()) || !bases.bases[g]) {
      throw Error("unfitted-basis", "group " + bases.groups.groups()[g].name + " has no fitted basis");
    }
    out[g] = bases.bases[g]->reconstruct(e.coefficients.row(g).transpose());
  }
  return out;
}

GarmentOutline decode_outline(const Embedding& e, const BasisRegistry& bases) {
  const auto tensors = decode_contours(e, bases);
  const GroupRegistry& reg = bases.groups;
  GarmentOutline out;
  out.category = "decoded";
  for (int g = 0; g < reg.size(); ++g) {
    if (!tensors[g]) continue;
    const GroupDef& def = reg.groups()[g];
    int row = 0;
    for (const PanelRole& role : def.roles) {
      PanelOutline po;
      po.id = role.name;
      po.group = def.name;
      for (int k = 0; k < role.edge_count; ++k) po.edges.push_back(tensors[g]->edge(row++));
      out.panels.push_back(std::move(po));
    }
  }
  std::set<std::pair<std::string, int>> used;
  for (const SeamTemplate& s : reg.seams()) {
    if (!out.panel_index(s.panel_a) || !out.panel_index(s.panel_b)) continue;
    if (used.count({s.panel_a, s.edge_a}) || used.count({s.panel_b, s.edge_b})) continue;
    used.insert({s.panel_a, s.edge_a});
    used.insert({s.panel_b, s.edge_b});
    out.stitches.push_back({{s.panel_a, s.edge_a}, {s.panel_b, s.edge_b}, s.reversed});
  }
  return out;
}

// --- coefficient-space operations ------------------------------------------------------

Embedding gate_embedding(const Embedding& raw, const Eigen::Array<bool, Eigen::Dynamic, 1>& multihot) {
  if (multihot.size() != raw.groups()) {
    throw Error("dimension-mismatch", "multi-hot length does not match group count");
  }
  Embedding out = raw;
  out.presence = multihot;
  for (int g = 0; g < raw.groups(); ++g) {
    if (!multihot(g)) out.coefficients.row(g).setZero();
  }
  return out;
}

Embedding interpolate(const Embedding& source, const Embedding& target, double alpha) {
  if (source.groups() != target.groups() || source.h() != target.h()) {
    throw Error("dimension-mismatch", "embeddings have different shapes");
  }
  if (!(source.presence == target.presence).all()) {
    throw Error("presence-mismatch", "interpolation requires identical presence vectors");
  }
  Embedding out = source;
  // alpha snapped to a 2^-32 grid so 1 - w is exact and swapping the
  // endpoints with 1 - alpha gives bit-identical weights.
  const double w = std::nearbyint(alpha * 0x1p32) * 0x1p-32;
  out.coefficients = w * source.coefficients + (1.0 - w) * target.coefficients;
  return out;
}

GroupSwap GroupSwap::from(const Embedding& donor, int group) {
  if (group < 0 || group >= donor.groups()) throw Error("index-out-of-range", "swap group out of range");
  return {group, donor.coefficients.row(group).transpose(), static_cast<bool>(donor.presence(group))};
}

Embedding edit_embedding(const Embedding& e, std::span<const EmbeddingEdit> edits) {
  Embedding out = e;
  for (const EmbeddingEdit& edit : edits) {
    if (const auto* c = std::get_if<CoefficientEdit>(&edit)) {
      if (c->group < 0 || c->group >= out.groups() || c->component < 0 || c->component >= out.h()) {
        throw Error("index-out-of-range", "coefficient edit index out of range");
      }
      if (!out.presence(c->group)) {
        throw Error("group-absent", "cannot edit a coefficient of an absent group");
      }
      out.coefficients(c->group, c->component) = c->value;
    } else {
      const auto& s = std::get<GroupSwap>(edit);
      if (s.group < 0 || s.group >= out.groups()) {
        throw Error("index-out-of-range", "swap group out of range");
      }
      if (s.block.size() != out.h()) throw Error("dimension-mismatch", "swap block has wrong length");
      out.presence(s.group) = s.present;
      if (s.present) {
        out.coefficients.row(s.group) = s.block.transpose();
      } else {
        out.coefficients.row(s.group).setZero();
      }
    }
  }
  return out;
}

// --- serialisation ------------------------------------------------------------------------

json embedding_to_json(const Embedding& e, const GroupRegistry& registry) {
  json groups = json::array();
  for (const auto& g : registry.groups()) groups.push_back(g.name);
  json presence = json::array();
  json coefficients = json::array();
  for (int g = 0; g < e.groups(); ++g) {
    presence.push_back(e.presence(g) ? 1 : 0);
    json row = json::array();
    for (int c = 0; c < e.h(); ++c) row.push_back(e.coefficients(g, c));
    coefficients.push_back(std::move(row));
  }
  return {{"format", "sewkit-embedding/1"},
          {"groups", groups},
          {"h", e.h()},
          {"presence", presence},
          {"coefficients", coefficients}};
}

Embedding embedding_from_json(const json& doc, const GroupRegistry& registry) {
  try {
    if (doc.at("format").get<std::string>() != "sewkit-embedding/1") {
      throw Error("schema", "unsupported embedding format tag");
    }
    const json& groups = doc.at("groups");
    if (static_cast<int>(groups.size()) != registry.size()) {
      throw Error("dimension-mismatch", "embedding group count does not match registry");
    }
    for (int g = 0; g < registry.size(); ++g) {
      if (groups[g].get<std::string>() != registry.groups()[g].name) {
        throw Error("dimension-mismatch", "embedding group order does not match registry");
      }
    }
    const int h = doc.at("h").get<int>();
    Embedding e = zero_embedding(registry.size(), h);
    const json& presence = doc.at("presence");
    const json& coefficients = doc.at("coefficients");
    if (static_cast<int>(presence.size()) != registry.size() ||
        static_cast<int>(coefficients.size()) != registry.size()) {
      throw Error("dimension-mismatch", "presence/coefficients length does not match registry");
    }
    for (int g = 0; g < registry.size(); ++g) {
      e.presence(g) = presence[g].get<int>() != 0;
      if (static_cast<int>(coefficients[g].size()) != h) {
        throw Error("dimension-mismatch", "coefficient row has wrong length");
      }
      for (int c = 0; c < h; ++c) e.coefficients(g, c) = coefficients[g][c].get<double>();
      if (!e.presence(g) && !e.coefficients.row(g).isZero(0.0)) {
        throw ValidationError({{"absent-group-nonzero", registry.groups()[g].name}});
      }
    }
    return e;
  } catch (const json::exception& ex) {
    throw Error("schema", std::string("bad embedding document: ") + ex.what());
  }
}

}  // namespace sewkit
