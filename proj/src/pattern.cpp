#include "sewkit/pattern.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <sstream>

namespace sewkit {

namespace {

using nlohmann::json;

// 8-point Gauss-Legendre nodes and weights on [-1, 1].
constexpr std::array<double, 8> kGaussNodes = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kGaussWeights = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};
constexpr int kArcTableIntervals = 32;

double speed(const SeamedEdge& e, double t) { return e.derivative(t).norm(); }

double arc_length_between(const SeamedEdge& e, double t0, double t1) {
  const double half = 0.5 * (t1 - t0);
  const double mid = 0.5 * (t1 + t0);
  double sum = 0.0;
  for (std::size_t i = 0; i < kGaussNodes.size(); ++i) {
    sum += kGaussWeights[i] * speed(e, mid + half * kGaussNodes[i]);
  }
  return sum * half;
}

// Arc-length inversion for quadratic curves: cumulative table + safeguarded Newton.
class ArcLengthTable {
 public:
  explicit ArcLengthTable(const SeamedEdge& edge) : edge_(edge) {
    cumulative_[0] = 0.0;
    for (int i = 0; i < kArcTableIntervals; ++i) {
      const double t0 = static_cast<double>(i) / kArcTableIntervals;
      const double t1 = static_cast<double>(i + 1) / kArcTableIntervals;
      cumulative_[i + 1] = cumulative_[i] + arc_length_between(edge_, t0, t1);
    }
  }

  double total() const { return cumulative_.back(); }

  double parameter_at(double s) const {
    if (s <= 0.0) return 0.0;
    if (s >= total()) return 1.0;
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
    const int interval = std::clamp(static_cast<int>(it - cumulative_.begin()) - 1, 0,
                                    kArcTableIntervals - 1);
    double lo = static_cast<double>(interval) / kArcTableIntervals;
    double hi = static_cast<double>(interval + 1) / kArcTableIntervals;
    const double base = cumulative_[interval];
    double t = 0.5 * (lo + hi);
    for (int iter = 0; iter < 60; ++iter) {
      const double f = base + arc_length_between(edge_, lo_bound(interval), t) - s;
      if (f > 0.0) {
        hi = t;
      } else {
        lo = t;
      }
      const double v = speed(edge_, t);
      double next = v > 1e-14 ? t - f / v : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - t) < 1e-16) {
        t = next;
        break;
      }
      t = next;
    }
    return t;
  }

 private:
  static double lo_bound(int interval) { return static_cast<double>(interval) / kArcTableIntervals; }

  const SeamedEdge& edge_;
  std::array<double, kArcTableIntervals + 1> cumulative_{};
};

// Point k of count, computed walking from the edge's start.
Vec2 forward_point(const SeamedEdge& edge, const ArcLengthTable* table, int k, int count) {
  const double fraction = static_cast<double>(k) / (count - 1);
  if (!edge.curved()) {
    return edge.start + fraction * (edge.end - edge.start);
  }
  return edge.evaluate(table->parameter_at(fraction * table->total()));
}

bool finite(const Vec2& v) { return std::isfinite(v.x()) && std::isfinite(v.y()); }
bool finite(const Vec3& v) { return v.allFinite(); }

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p) {
  const Vec2 d = b - a;
  const double len2 = d.squaredNorm();
  if (len2 == 0.0) return (p - a).norm() <= 1e-12;
  const double c = cross2(d, p - a);
  if (std::abs(c) > 1e-12 * std::sqrt(len2)) return false;
  const double dot = d.dot(p - a);
  return dot >= -1e-12 && dot <= len2 + 1e-12;
}

// Rounding noise on collinear points counts as collinear.
int orientation(const Vec2& a, const Vec2& b, const Vec2& c) {
  const double v = cross2(b - a, c - a);
  if (std::abs(v) <= 1e-12 * (b - a).norm() * (c - a).norm()) return 0;
  return (v > 0.0) - (v < 0.0);
}

bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
  const int o1 = orientation(p1, p2, q1);
  const int o2 = orientation(p1, p2, q2);
  const int o3 = orientation(q1, q2, p1);
  const int o4 = orientation(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(p1, p2, q1)) return true;
  if (o2 == 0 && on_segment(p1, p2, q2)) return true;
  if (o3 == 0 && on_segment(q1, q2, p1)) return true;
  if (o4 == 0 && on_segment(q1, q2, p2)) return true;
  return false;
}

Vec2 read_vec2(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw Error("schema", std::string(what) + " must be a 2-element number array");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

Vec3 read_vec3(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) {
    throw Error("schema", std::string(what) + " must be a 3-element number array");
  }
  for (const auto& x : j) {
    if (!x.is_number()) throw Error("schema", std::string(what) + " must contain numbers");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

const json& require(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw Error("schema", std::string("missing field \"") + key + "\"");
  }
  return obj.at(key);
}

EdgeRef read_edge_ref(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_string() || !j[1].is_number_integer()) {
    throw Error("schema", std::string(what) + " must be [panel_id, edge_index]");
  }
  return {j[0].get<std::string>(), j[1].get<int>()};
}

std::vector<Violation> structural_violations(const SewingPattern& pattern, bool check_orientation) {
  std::vector<Violation> out;
  auto add = [&out](std::string code, std::string detail) {
    out.push_back({std::move(code), std::move(detail)});
  };

  if (pattern.panels.empty()) add("no-panels", "pattern has no panels");

  std::set<std::string> ids;
  for (const Panel& panel : pattern.panels) {
    if (!ids.insert(panel.id).second) add("duplicate-panel-id", panel.id);
    if (panel.edges.size() < 2) {
      add("too-few-edges", panel.id);
      continue;
    }
    bool geometry_ok = finite(panel.placement.translation) && finite(panel.placement.rotation);
    if (!geometry_ok) add("non-finite", panel.id + " placement");
    bool edges_ok = true;
    for (std::size_t i = 0; i < panel.edges.size(); ++i) {
      const SeamedEdge& e = panel.edges[i];
      const std::string where = panel.id + " edge " + std::to_string(i);
      if (!finite(e.start) || !finite(e.end) || (e.control && !finite(*e.control))) {
        add("non-finite", where);
        edges_ok = false;
        continue;
      }
      if ((e.end - e.start).norm() < 1e-9) {
        add("degenerate-edge", where);
        edges_ok = false;
      }
      const SeamedEdge& next = panel.edges[(i + 1) % panel.edges.size()];
      if (finite(next.start) && (e.end - next.start).norm() > kLoopClosureTolerance) {
        add("loop-not-closed", where);
        edges_ok = false;
      }
    }
    if (!edges_ok) continue;

    // Simplicity: dense polyline, all non-adjacent segment pairs.
    const Polyline2 loop = panel_contour(panel, 9);
    const std::size_t n = loop.size();
    bool simple = true;
    for (std::size_t i = 0; i < n && simple; ++i) {
      for (std::size_t j = i + 2; j < n; ++j) {
        if (i == 0 && j == n - 1) continue;
        if (segments_intersect(loop[i], loop[(i + 1) % n], loop[j], loop[(j + 1) % n])) {
          simple = false;
          break;
        }
      }
    }
    if (!simple) {
      add("self-intersecting", panel.id);
      continue;
    }
    if (check_orientation) {
      const double area = signed_area(panel);
      if (std::abs(area) < 1e-12) {
        add("zero-area", panel.id);
      } else if (area < 0.0) {
        add("orientation-not-ccw", panel.id);
      }
    }
  }

  std::set<std::pair<std::string, int>> used;
  for (std::size_t s = 0; s < pattern.stitches.size(); ++s) {
    const Stitch& st = pattern.stitches[s];
    const std::string where = "stitch " + std::to_string(s);
    bool refs_ok = true;
    for (const EdgeRef* ref : {&st.a, &st.b}) {
      const auto idx = pattern.panel_index(ref->panel);
      if (!idx) {
        add("unknown-panel", where + " references \"" + ref->panel + "\"");
        refs_ok = false;
      } else if (ref->edge < 0 ||
                 ref->edge >= static_cast<int>(pattern.panels[*idx].edges.size())) {
        add("edge-out-of-range", where);
        refs_ok = false;
      }
    }
    if (!refs_ok) continue;
    if (st.a == st.b) {
      add("self-stitch", where);
      continue;
    }
    for (const EdgeRef* ref : {&st.a, &st.b}) {
      if (!used.insert({ref->panel, ref->edge}).second) {
        add("edge-doubly-stitched", where + " " + ref->panel + ":" + std::to_string(ref->edge));
      }
    }
  }
  return out;
}

}  // namespace

// --- SeamedEdge / Placement ---------------------------------------------------

Vec2 SeamedEdge::evaluate(double t) const {
  if (!control) return start + t * (end - start);
  const double s = 1.0 - t;
  return s * s * start + 2.0 * s * t * (*control) + t * t * end;
}

Vec2 SeamedEdge::derivative(double t) const {
  if (!control) return end - start;
  return 2.0 * (1.0 - t) * (*control - start) + 2.0 * t * (end - *control);
}

double SeamedEdge::length() const {
  if (!control) return (end - start).norm();
  double total = 0.0;
  for (int i = 0; i < kArcTableIntervals; ++i) {
    total += arc_length_between(*this, static_cast<double>(i) / kArcTableIntervals,
                                static_cast<double>(i + 1) / kArcTableIntervals);
  }
  return total;
}

Eigen::Matrix3d Placement::rotation_matrix() const {
  const double angle = rotation.norm();
  if (angle == 0.0) return Eigen::Matrix3d::Identity();
  return Eigen::AngleAxisd(angle, rotation / angle).toRotationMatrix();
}

Vec3 Placement::apply(const Vec2& p) const {
  return rotation_matrix() * Vec3(p.x(), p.y(), 0.0) + translation;
}

// --- SewingPattern ------------------------------------------------------------

std::optional<int> SewingPattern::panel_index(std::string_view id) const {
  for (std::size_t i = 0; i < panels.size(); ++i) {
    if (panels[i].id == id) return static_cast<int>(i);
  }
  return std::nullopt;
}

const Panel& SewingPattern::panel(std::string_view id) const {
  const auto idx = panel_index(id);
  if (!idx) throw Error("unknown-panel", "unknown panel \"" + std::string(id) + "\"");
  return panels[*idx];
}

// --- validation ---------------------------------------------------------------

std::vector<Violation> validate(const SewingPattern& pattern) {
  return structural_violations(pattern, true);
}

std::vector<Violation> validate(const SewingPattern& pattern, const GroupRegistry& registry) {
  auto out = validate(pattern);
  for (const Panel& panel : pattern.panels) {
    if (!registry.group_index(panel.group)) {
      out.push_back({"unknown-group", panel.id + " has group \"" + panel.group + "\""});
    }
  }
  return out;
}

double signed_area(const Panel& panel) {
  double twice = 0.0;
  for (const SeamedEdge& e : panel.edges) {
    if (e.control) {
      const Vec2& c = *e.control;
      twice += (2.0 * cross2(e.start, c) + 2.0 * cross2(c, e.end) + cross2(e.start, e.end)) / 3.0;
    } else {
      twice += cross2(e.start, e.end);
    }
  }
  return 0.5 * twice;
}

void reverse_orientation(SewingPattern& pattern, int panel_index) {
  Panel& panel = pattern.panels.at(panel_index);
  const int n = static_cast<int>(panel.edges.size());
  std::vector<SeamedEdge> flipped;
  flipped.reserve(n);
  for (int i = n - 1; i >= 0; --i) flipped.push_back(panel.edges[i].reversed());
  panel.edges = std::move(flipped);
  for (Stitch& st : pattern.stitches) {
    int touched = 0;
    for (EdgeRef* ref : {&st.a, &st.b}) {
      if (ref->panel == panel.id) {
        ref->edge = n - 1 - ref->edge;
        ++touched;
      }
    }
    if (touched == 1) st.reversed = !st.reversed;
  }
}

void normalize_orientation(SewingPattern& pattern) {
  for (std::size_t i = 0; i < pattern.panels.size(); ++i) {
    if (signed_area(pattern.panels[i]) < 0.0) reverse_orientation(pattern, static_cast<int>(i));
  }
}

// --- file format --------------------------------------------------------------

SewingPattern pattern_from_json(const json& doc, const GroupRegistry& registry) {
  if (!doc.is_object()) throw Error("schema", "pattern document must be an object");
  const json& format = require(doc, "format");
  if (!format.is_string() || format.get<std::string>() != kPatternFormat) {
    throw Error("schema", "unsupported format tag (expected \"sewkit/1\")");
  }
  SewingPattern p;
  const json& category = require(doc, "category");
  if (!category.is_string()) throw Error("schema", "category must be a string");
  p.category = category.get<std::string>();

  const json& panels = require(doc, "panels");
  if (!panels.is_array()) throw Error("schema", "panels must be an array");
  for (const json& jp : panels) {
    Panel panel;
    const json& id = require(jp, "id");
    const json& group = require(jp, "group");
    if (!id.is_string() || !group.is_string()) throw Error("schema", "panel id/group must be strings");
    panel.id = id.get<std::string>();
    panel.group = group.get<std::string>();
    if (jp.contains("placement") && !jp.at("placement").is_null()) {
      const json& pl = jp.at("placement");
      panel.placement.translation = read_vec3(require(pl, "t"), "placement.t");
      panel.placement.rotation = read_vec3(require(pl, "r"), "placement.r");
    }
    const json& edges = require(jp, "edges");
    if (!edges.is_array()) throw Error("schema", "edges must be an array");
    for (const json& je : edges) {
      if (!je.is_object()) throw Error("schema", "edge must be an object");
      for (const auto& [key, value] : je.items()) {
        if (key != "start" && key != "end" && key != "control") {
          throw Error("schema", "unsupported edge field \"" + key + "\"");
        }
      }
      SeamedEdge edge;
      edge.start = read_vec2(require(je, "start"), "edge.start");
      edge.end = read_vec2(require(je, "end"), "edge.end");
      if (je.contains("control") && !je.at("control").is_null()) {
        const json& c = je.at("control");
        if (c.is_array() && !c.empty() && c[0].is_array()) {
          throw Error("schema", "higher-order curves are not supported (one control point max)");
        }
        edge.control = read_vec2(c, "edge.control");
      }
      panel.edges.push_back(std::move(edge));
    }
    p.panels.push_back(std::move(panel));
  }

  if (doc.contains("stitches")) {
    const json& stitches = doc.at("stitches");
    if (!stitches.is_array()) throw Error("schema", "stitches must be an array");
    for (const json& js : stitches) {
      Stitch st;
      st.a = read_edge_ref(require(js, "a"), "stitch.a");
      st.b = read_edge_ref(require(js, "b"), "stitch.b");
      if (js.contains("reversed")) {
        if (!js.at("reversed").is_boolean()) throw Error("schema", "reversed must be a boolean");
        st.reversed = js.at("reversed").get<bool>();
      }
      p.stitches.push_back(std::move(st));
    }
  }

  // Orientation can only be fixed on structurally sound loops.
  if (auto pre = structural_violations(p, false); !pre.empty()) {
    throw ValidationError(std::move(pre));
  }
  normalize_orientation(p);
  if (auto v = validate(p, registry); !v.empty()) throw ValidationError(std::move(v));
  return p;
}

SewingPattern parse_pattern(std::string_view text, const GroupRegistry& registry) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    std::ostringstream msg;
    msg << "syntax error at byte " << e.byte << ": " << e.what();
    throw Error("syntax", msg.str());
  }
  return pattern_from_json(doc, registry);
}

json pattern_to_json(const SewingPattern& pattern) {
  json doc;
  doc["format"] = kPatternFormat;
  doc["category"] = pattern.category;
  json panels = json::array();
  for (const Panel& panel : pattern.panels) {
    json jp;
    jp["id"] = panel.id;
    jp["group"] = panel.group;
    const auto& t = panel.placement.translation;
    const auto& r = panel.placement.rotation;
    jp["placement"] = {{"t", {t.x(), t.y(), t.z()}}, {"r", {r.x(), r.y(), r.z()}}};
    json edges = json::array();
    for (const SeamedEdge& e : panel.edges) {
      json je;
      je["start"] = {e.start.x(), e.start.y()};
      je["end"] = {e.end.x(), e.end.y()};
      je["control"] = e.control ? json{e.control->x(), e.control->y()} : json(nullptr);
      edges.push_back(std::move(je));
    }
    jp["edges"] = std::move(edges);
    panels.push_back(std::move(jp));
  }
  doc["panels"] = std::move(panels);
  json stitches = json::array();
  for (const Stitch& st : pattern.stitches) {
    stitches.push_back({{"a", {st.a.panel, st.a.edge}},
                        {"b", {st.b.panel, st.b.edge}},
                        {"reversed", st.reversed}});
  }
  doc["stitches"] = std::move(stitches);
  return doc;
}

std::string serialize_pattern(const SewingPattern& pattern) {
  return pattern_to_json(pattern).dump(2);
}

// --- discretisation -----------------------------------------------------------

Polyline2 discretize_edge(const SeamedEdge& edge, int count) {
  if (count < 2) throw Error("bad-count", "discretize_edge needs at least 2 points");
  if ((edge.end - edge.start).norm() < 1e-9) {
    throw Error("degenerate-edge", "edge has zero length");
  }
  const SeamedEdge back = edge.reversed();
  std::optional<ArcLengthTable> fwd_table;
  std::optional<ArcLengthTable> back_table;
  if (edge.curved()) {
    fwd_table.emplace(edge);
    back_table.emplace(back);
  }
  const ArcLengthTable* ft = fwd_table ? &*fwd_table : nullptr;
  const ArcLengthTable* bt = back_table ? &*back_table : nullptr;

  // The first half is walked from the start, the second half from the end, and
  // a middle point averages both walks, so reversal symmetry is exact.
  Polyline2 out(count);
  for (int k = 0; k < count; ++k) {
    const int twice = 2 * k;
    if (twice < count - 1) {
      out[k] = forward_point(edge, ft, k, count);
    } else if (twice > count - 1) {
      out[k] = forward_point(back, bt, count - 1 - k, count);
    } else {
      out[k] = 0.5 * (forward_point(edge, ft, k, count) + forward_point(back, bt, k, count));
    }
  }
  out.front() = edge.start;
  out.back() = edge.end;
  return out;
}

Polyline2 panel_contour(const Panel& panel, int count) {
  Polyline2 out;
  out.reserve(panel.edges.size() * (count - 1));
  for (const SeamedEdge& e : panel.edges) {
    const Polyline2 run = discretize_edge(e, count);
    out.insert(out.end(), run.begin(), run.end() - 1);
  }
  return out;
}

bool point_in_panel(const Polyline2& contour, const Vec2& p) {
  const std::size_t n = contour.size();
  if (n < 3) return false;
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = contour[j];
    const Vec2& b = contour[i];
    if (on_segment(a, b, p)) return false;
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (p.x() < x) inside = !inside;
    }
  }
  return inside;
}

double polygon_area(const Polyline2& contour) {
  double twice = 0.0;
  const std::size_t n = contour.size();
  for (std::size_t i = 0; i < n; ++i) {
    twice += cross2(contour[i], contour[(i + 1) % n]);
  }
  return 0.5 * twice;
}

Polyline2 resample_polyline(const Polyline2& line, int count) {
  if (count < 2) throw Error("bad-count", "resample_polyline needs at least 2 points");
  if (line.size() < 2) throw Error("degenerate-edge", "polyline needs at least 2 points");
  if (static_cast<int>(line.size()) == count) return line;
  std::vector<double> cumulative(line.size(), 0.0);
  for (std::size_t i = 1; i < line.size(); ++i) {
    cumulative[i] = cumulative[i - 1] + (line[i] - line[i - 1]).norm();
  }
  const double total = cumulative.back();
  if (total < 1e-9) throw Error("degenerate-edge", "polyline has zero length");
  Polyline2 out(count);
  std::size_t seg = 0;
  for (int k = 0; k < count; ++k) {
    const double s = total * k / (count - 1);
    while (seg + 2 < line.size() && cumulative[seg + 1] < s) ++seg;
    const double span = cumulative[seg + 1] - cumulative[seg];
    const double t = span > 0.0 ? std::clamp((s - cumulative[seg]) / span, 0.0, 1.0) : 0.0;
    out[k] = line[seg] + t * (line[seg + 1] - line[seg]);
  }
  out.front() = line.front();
  out.back() = line.back();
  return out;
}

// --- outlines -------------------------------------------------------------------

Polyline2 PanelOutline::contour() const {
  Polyline2 out;
  for (const Polyline2& e : edges) out.insert(out.end(), e.begin(), e.end() - 1);
  return out;
}

std::optional<int> GarmentOutline::panel_index(std::string_view id) const {
  for (std::size_t i = 0; i < panels.size(); ++i) {
    if (panels[i].id == id) return static_cast<int>(i);
  }
  return std::nullopt;
}

GarmentOutline outline_of(const SewingPattern& pattern, int points_per_edge) {
  GarmentOutline out;
  out.category = pattern.category;
  out.stitches = pattern.stitches;
  for (const Panel& panel : pattern.panels) {
    PanelOutline po;
    po.id = panel.id;
    po.group = panel.group;
    po.placement = panel.placement;
    for (const SeamedEdge& e : panel.edges) po.edges.push_back(discretize_edge(e, points_per_edge));
    out.panels.push_back(std::move(po));
  }
  return out;
}

}  // namespace sewkit
