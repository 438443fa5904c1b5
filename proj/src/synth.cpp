#include "sewkit/synth.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <Eigen/Geometry>

#include "sewkit/random.hpp"

namespace sewkit {

namespace {

constexpr double kPi = std::numbers::pi;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// A truncated cone (or cylinder when flare == 0) hanging from a top circle of
// radius r_top at height 0. Panels live in the cone's development: the top
// centre is the panel origin, +y points up the generator, and front panels
// cover azimuth [-pi/2, pi/2] (back panels are the same shape turned by pi).
struct Cone {
  double r_top = 10.0;
  double flare = 0.0;
  double x_offset = 0.0;  // 3D shift of the axis along x
  bool full_turn = false; // one panel wraps the whole circumference

  bool cylinder() const { return flare == 0.0; }
  double sin_beta() const { return flare / std::sqrt(1.0 + flare * flare); }
  double cos_beta() const { return 1.0 / std::sqrt(1.0 + flare * flare); }
  double apex_y() const { return r_top / sin_beta(); }
  double half_turn() const { return full_turn ? kPi : kPi / 2.0; }

  // Development angle covered on either side of the centre ruling.
  double half_phi() const { return half_turn() * sin_beta(); }

  Vec2 develop(double slant, double phi) const {
    const double rho = apex_y() + slant;
    return {rho * std::sin(phi), apex_y() - rho * std::cos(phi)};
  }

  // (azimuth, radius, height) of a panel point, nullopt at or above the apex.
  std::optional<Vec3> cylindrical(const Vec2& p) const {
    if (cylinder()) return Vec3(p.x() / r_top, r_top, p.y());
    const double a = apex_y();
    const double rho = std::hypot(p.x(), a - p.y());
    if (!(rho > 1e-9)) return std::nullopt;
    const double phi = std::atan2(p.x(), a - p.y());
    return Vec3(phi / sin_beta(), rho * sin_beta(), -(rho - a) * cos_beta());
  }

  std::optional<Vec3> position(const Vec2& p, bool back) const {
    const auto c = cylindrical(p);
    if (!c) return std::nullopt;
    const double psi = (*c)(0) + (back ? kPi : 0.0);
    return Vec3(x_offset + (*c)(1) * std::sin(psi), (*c)(2), (*c)(1) * std::cos(psi));
  }

  std::optional<Vec3> normal(const Vec2& p, bool back) const {
    const auto c = cylindrical(p);
    if (!c) return std::nullopt;
    const double psi = (*c)(0) + (back ? kPi : 0.0);
    const double cb = cos_beta();
    const double sb = sin_beta();
    // inward, matching -(Y_u x Y_v) for this orientation of the development
    return Vec3(-cb * std::sin(psi), -sb, -cb * std::cos(psi));
  }

  Placement placement(bool back) const {
    const double beta = std::asin(sin_beta());
    Eigen::Matrix3d rot = Eigen::AngleAxisd(-beta, Vec3::UnitX()).toRotationMatrix();
    Vec3 t(x_offset, 0.0, r_top);
    if (back) {
      const Eigen::Matrix3d turn = Eigen::AngleAxisd(kPi, Vec3::UnitY()).toRotationMatrix();
      rot = turn * rot;
      t = turn * Vec3(0.0, 0.0, r_top) + Vec3(x_offset, 0.0, 0.0);
    }
    const Eigen::AngleAxisd aa(rot);
    Placement pl;
    pl.rotation = aa.angle() * aa.axis();
    pl.translation = t;
    return pl;
  }

  // Four edges of the band between slants s0 < s1 below the top circle.
  std::vector<SeamedEdge> band(double s0, double s1, double hem_dip = 0.0) const {
    if (cylinder()) {
      const double w = half_turn() * r_top;
      const Vec2 bl(-w, -s1), br(w, -s1), tr(w, -s0), tl(-w, -s0);
      SeamedEdge bottom{bl, br, std::nullopt};
      if (hem_dip > 0.0) bottom.control = Vec2(0.0, -s1 - 2.0 * hem_dip);
      return {bottom, {br, tr, std::nullopt}, {tr, tl, std::nullopt}, {tl, bl, std::nullopt}};
    }
    const double phi = half_phi();
    const Vec2 bl = develop(s1, -phi), br = develop(s1, phi), tr = develop(s0, phi), tl = develop(s0, -phi);
    // Control on the centre ruling, placed so the curve has the arc's length.
    // The tangent intersection overshoots and the midpoint fit undershoots.
    auto arc_control = [&](double slant) {
      const double rho = apex_y() + slant;
      const Vec2 a = develop(slant, -phi), b = develop(slant, phi);
      double lo = rho, hi = rho / std::cos(phi);
      for (int i = 0; i < 50; ++i) {
        const double mid = 0.5 * (lo + hi);
        (SeamedEdge{a, b, Vec2(0.0, apex_y() - mid)}.length() > 2.0 * phi * rho ? hi : lo) = mid;
      }
      return Vec2(0.0, apex_y() - 0.5 * (lo + hi));
    };
    return {{bl, br, arc_control(s1)}, {br, tr, std::nullopt}, {tr, tl, arc_control(s0)}, {tl, bl, std::nullopt}};
  }
};

Panel make_panel(std::string id, std::string group, const Cone& cone, bool back, std::vector<SeamedEdge> edges) {
  Panel p;
  p.id = std::move(id);
  p.group = std::move(group);
  p.placement = cone.placement(back);
  p.edges = std::move(edges);
  return p;
}

std::vector<Stitch> side_seams(const std::string& front, const std::string& back) {
  return {{{front, 1}, {back, 3}, true}, {{front, 3}, {back, 1}, true}};
}

void in_range(std::vector<Violation>& out, const char* name, double v, double lo, double hi) {
  if (!(v >= lo && v <= hi)) {
    std::ostringstream s;
    s << name << "=" << v << " outside [" << lo << ", " << hi << "]";
    out.push_back({"out-of-range", s.str()});
  }
}

// Per-panel geometry used by both the drape and the pattern.
struct Layout {
  std::vector<std::pair<std::string, std::pair<Cone, bool>>> panels;  // id -> (cone, back)
};

Layout layout_of(const GarmentSpec& spec) {
  Layout l;
  std::visit(overloaded{
                 [&](const SkirtSpec& s) {
                   const Cone c{s.waist_girth / (2.0 * kPi), s.flare};
                   for (const char* id : {"waistband-front", "skirt-front"}) l.panels.push_back({id, {c, false}});
                   for (const char* id : {"waistband-back", "skirt-back"}) l.panels.push_back({id, {c, true}});
                 },
                 [&](const TubeDressSpec& s) {
                   const Cone c{s.girth / (2.0 * kPi), s.flare};
                   for (const char* id : {"bodice-front", "skirt-front"}) l.panels.push_back({id, {c, false}});
                   for (const char* id : {"bodice-back", "skirt-back"}) l.panels.push_back({id, {c, true}});
                 },
                 [&](const PantsSpec& s) {
                   const double r = s.leg_girth / (2.0 * kPi);
                   l.panels.push_back({"leg-left", {Cone{r, 0.0, -(r + 2.0), true}, false}});
                   l.panels.push_back({"leg-right", {Cone{r, 0.0, r + 2.0, true}, false}});
                 },
                 [&](const TShirtBodySpec& s) {
                   const Cone c{s.girth / (2.0 * kPi), 0.0};
                   l.panels.push_back({"torso-front", {c, false}});
                   l.panels.push_back({"torso-back", {c, true}});
                 },
             },
             spec.params);
  return l;
}

}  // namespace

std::string GarmentSpec::category() const {
  return garment_categories()[params.index()];
}

void check_spec(const GarmentSpec& spec) {
  std::vector<Violation> v;
  std::visit(overloaded{
                 [&](const SkirtSpec& s) {
                   in_range(v, "waist_girth", s.waist_girth, 60, 90);
                   in_range(v, "length", s.length, 40, 70);
                   in_range(v, "flare", s.flare, 0, 0.3);
                   in_range(v, "band_height", s.band_height, 4, 8);
                 },
                 [&](const TubeDressSpec& s) {
                   in_range(v, "girth", s.girth, 70, 100);
                   in_range(v, "bodice_length", s.bodice_length, 25, 40);
                   in_range(v, "skirt_length", s.skirt_length, 40, 60);
                   in_range(v, "flare", s.flare, 0, 0.3);
                 },
                 [&](const PantsSpec& s) {
                   in_range(v, "leg_girth", s.leg_girth, 56, 72);
                   in_range(v, "leg_length", s.leg_length, 60, 100);
                 },
                 [&](const TShirtBodySpec& s) {
                   in_range(v, "girth", s.girth, 80, 110);
                   in_range(v, "length", s.length, 55, 75);
                   in_range(v, "hem_curve", s.hem_curve, 0, 5);
                 },
             },
             spec.params);
  if (!v.empty()) throw ValidationError(std::move(v));
}

GarmentSpec sample_spec(std::string_view category, std::uint64_t seed) {
  Rng rng(seed);
  GarmentSpec spec;
  spec.seed = seed;
  if (category == "skirt") {
    SkirtSpec s;
    s.waist_girth = rng.uniform(60, 90);
    s.length = rng.uniform(40, 70);
    s.flare = rng.uniform(0, 0.3);
    s.band_height = rng.uniform(4, 8);
    spec.params = s;
  } else if (category == "tube-dress") {
    TubeDressSpec s;
    s.girth = rng.uniform(70, 100);
    s.bodice_length = rng.uniform(25, 40);
    s.skirt_length = rng.uniform(40, 60);
    s.flare = rng.uniform(0, 0.3);
    spec.params = s;
  } else if (category == "pants") {
    PantsSpec s;
    s.leg_girth = rng.uniform(56, 72);
    s.leg_length = rng.uniform(60, 100);
    spec.params = s;
  } else if (category == "t-shirt-body") {
    TShirtBodySpec s;
    s.girth = rng.uniform(80, 110);
    s.length = rng.uniform(55, 75);
    s.hem_curve = rng.uniform(0, 5);
    spec.params = s;
  } else {
    throw Error("unsupported-category", "unknown garment category " + std::string(category));
  }
  return spec;
}

SewingPattern gen_pattern(const GarmentSpec& spec) {
  check_spec(spec);
  SewingPattern p;
  p.category = spec.category();
  std::visit(overloaded{
                 [&](const SkirtSpec& s) {
                   const Cone c{s.waist_girth / (2.0 * kPi), s.flare};
                   const double b = s.band_height;
                   const double l = b + s.length;
                   p.panels = {make_panel("waistband-front", "waistband", c, false, c.band(0, b)),
                               make_panel("waistband-back", "waistband", c, true, c.band(0, b)),
                               make_panel("skirt-front", "skirt-body", c, false, c.band(b, l)),
                               make_panel("skirt-back", "skirt-body", c, true, c.band(b, l))};
                   p.stitches = side_seams("waistband-front", "waistband-back");
                   for (auto& st : side_seams("skirt-front", "skirt-back")) p.stitches.push_back(st);
                   p.stitches.push_back({{"waistband-front", 0}, {"skirt-front", 2}, true});
                   p.stitches.push_back({{"waistband-back", 0}, {"skirt-back", 2}, true});
                 },
                 [&](const TubeDressSpec& s) {
                   const Cone c{s.girth / (2.0 * kPi), s.flare};
                   const double b = s.bodice_length;
                   const double l = b + s.skirt_length;
                   p.panels = {make_panel("bodice-front", "bodice", c, false, c.band(0, b)),
                               make_panel("bodice-back", "bodice", c, true, c.band(0, b)),
                               make_panel("skirt-front", "skirt-body", c, false, c.band(b, l)),
                               make_panel("skirt-back", "skirt-body", c, true, c.band(b, l))};
                   p.stitches = side_seams("bodice-front", "bodice-back");
                   for (auto& st : side_seams("skirt-front", "skirt-back")) p.stitches.push_back(st);
                   p.stitches.push_back({{"bodice-front", 0}, {"skirt-front", 2}, true});
                   p.stitches.push_back({{"bodice-back", 0}, {"skirt-back", 2}, true});
                 },
                 [&](const PantsSpec& s) {
                   const double r = s.leg_girth / (2.0 * kPi);
                   const Cone left{r, 0.0, -(r + 2.0), true};
                   const Cone right{r, 0.0, r + 2.0, true};
                   p.panels = {make_panel("leg-left", "leg-left", left, false, left.band(0, s.leg_length)),
                               make_panel("leg-right", "leg-right", right, false, right.band(0, s.leg_length))};
                   p.stitches = {{{"leg-left", 1}, {"leg-left", 3}, true}, {{"leg-right", 1}, {"leg-right", 3}, true}};
                 },
                 [&](const TShirtBodySpec& s) {
                   const Cone c{s.girth / (2.0 * kPi), 0.0};
                   p.panels = {make_panel("torso-front", "torso", c, false, c.band(0, s.length, s.hem_curve)),
                               make_panel("torso-back", "torso", c, true, c.band(0, s.length, s.hem_curve))};
                   p.stitches = side_seams("torso-front", "torso-back");
                 },
             },
             spec.params);
  if (auto v = validate(p, default_registry()); !v.empty()) throw ValidationError(std::move(v));
  return p;
}

AnalyticDrape analytic_drape(const GarmentSpec& spec, const SewingPattern& pattern) {
  const Layout layout = layout_of(spec);
  for (const Panel& p : pattern.panels) {
    bool found = false;
    for (const auto& [id, cb] : layout.panels) found = found || id == p.id;
    if (!found) throw Error("unsupported-category", "no drape for panel " + p.id);
  }
  auto lookup = [layout](const std::string& id) -> const std::pair<Cone, bool>* {
    for (const auto& [pid, cb] : layout.panels) {
      if (pid == id) return &cb;
    }
    return nullptr;
  };
  AnalyticDrape d;
  d.position = [lookup](const std::string& id, const Vec2& q) -> std::optional<Vec3> {
    const auto* cb = lookup(id);
    if (!cb) return std::nullopt;
    return cb->first.position(q, cb->second);
  };
  d.normal = [lookup](const std::string& id, const Vec2& q) -> std::optional<Vec3> {
    const auto* cb = lookup(id);
    if (!cb) return std::nullopt;
    return cb->first.normal(q, cb->second);
  };
  return d;
}

std::vector<std::optional<GroupTensor>> group_tensors(const GarmentOutline& outline, const GroupRegistry& registry) {
  std::vector<std::optional<GroupTensor>> out(registry.size());
  for (int g = 0; g < registry.size(); ++g) {
    const GroupDef& def = registry.groups()[g];
    bool any = false;
    for (const PanelOutline& p : outline.panels) any = any || p.group == def.name;
    if (any) out[g] = assemble_group_tensor(outline, def);
  }
  return out;
}

Sample make_sample(const GarmentSpec& spec, std::string id, int points_per_edge) {
  Sample s;
  s.id = std::move(id);
  s.spec = spec;
  s.pattern = gen_pattern(spec);
  s.outline = outline_of(s.pattern, points_per_edge);
  const AnalyticDrape drape = analytic_drape(spec, s.pattern);
  s.maps = bake_ground_truth(s.outline, drape.position);
  std::vector<PositionMap> positions;
  std::vector<MaskMap> masks;
  for (const BakedPanel& b : s.maps) {
    positions.push_back(b.positions);
    masks.push_back(b.mask);
  }
  s.mesh = readout_mesh(positions, masks, s.outline, points_per_edge);
  s.tensors = group_tensors(s.outline, default_registry());
  return s;
}

std::vector<Sample> gen_dataset(int n, std::span<const std::string> categories, std::uint64_t seed,
                                int points_per_edge) {
  if (n < 1) throw Error("invalid-argument", "dataset size must be at least 1");
  std::vector<std::string> cats(categories.begin(), categories.end());
  if (cats.empty()) cats = garment_categories();
  std::vector<Sample> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const std::string& cat = cats[i % cats.size()];
    char id[32];
    std::snprintf(id, sizeof id, "s%05d", i);
    out.push_back(make_sample(sample_spec(cat, derive_seed(seed, static_cast<std::uint64_t>(i))), id,
                              points_per_edge));
  }
  return out;
}

void write_dataset(const std::filesystem::path& dir, std::span<const Sample> samples) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "sewkit-manifest/1";
  manifest["samples"] = nlohmann::json::array();
  for (const Sample& s : samples) {
    const std::string pat = s.id + ".pattern.json";
    const std::string maps = s.id + ".maps";
    const std::string mesh = s.id + ".obj";
    {
      std::ofstream f(dir / pat);
      f << serialize_pattern(s.pattern);
    }
    {
      std::ofstream f(dir / maps, std::ios::binary);
      MapContainer c;
      for (const BakedPanel& b : s.maps) {
        c.masks.push_back(b.mask);
        c.positions.push_back(b.positions);
      }
      write_map_container(f, c);
    }
    {
      std::ofstream f(dir / mesh);
      f << export_mesh(s.mesh);
    }
    manifest["samples"].push_back(
        {{"id", s.id}, {"category", s.spec.category()}, {"seed", s.spec.seed}, {"pattern", pat}, {"maps", maps}, {"mesh", mesh}});
  }
  std::ofstream f(dir / "manifest.json");
  f << manifest.dump(2) << "\n";
  if (!f) throw Error("io", "cannot write manifest in " + dir.string());
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest) {
  std::ifstream f(manifest);
  if (!f) throw Error("io", "cannot open manifest " + manifest.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw Error("syntax", std::string("manifest: ") + e.what());
  }
  if (!doc.contains("samples") || !doc["samples"].is_array()) throw Error("schema", "manifest without samples");
  const std::filesystem::path base = manifest.parent_path();
  std::vector<ManifestEntry> out;
  for (const auto& s : doc["samples"]) {
    ManifestEntry e;
    e.id = s.at("id").get<std::string>();
    e.category = s.value("category", "");
    e.pattern = base / s.at("pattern").get<std::string>();
    e.maps = base / s.at("maps").get<std::string>();
    e.mesh = base / s.at("mesh").get<std::string>();
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace sewkit
