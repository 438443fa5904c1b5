#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "sewkit/error.hpp"
#include "sewkit/registry.hpp"

namespace sewkit {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Polyline2 = std::vector<Vec2>;

inline constexpr int kDefaultEdgePoints = 20;
inline constexpr double kLoopClosureTolerance = 1e-6;  // cm
inline constexpr std::string_view kPatternFormat = "sewkit/1";

/// Straight segment, or quadratic Bezier curve when `control` is set.
struct SeamedEdge {
  Vec2 start = Vec2::Zero();
  Vec2 end = Vec2::Zero();
  std::optional<Vec2> control;

  bool curved() const noexcept { return control.has_value(); }
  SeamedEdge reversed() const { return {end, start, control}; }
  Vec2 evaluate(double t) const;
  Vec2 derivative(double t) const;
  double length() const;

  bool operator==(const SeamedEdge&) const = default;
};

/// Rigid placement hint: rotation vector (axis * angle, radians) then
/// translation. Only used to initialise solvers.
struct Placement {
  Vec3 translation = Vec3::Zero();
  Vec3 rotation = Vec3::Zero();

  Eigen::Matrix3d rotation_matrix() const;
  Vec3 apply(const Vec2& p) const;

  bool operator==(const Placement&) const = default;
};

struct Panel {
  std::string id;
  std::string group;
  Placement placement;
  std::vector<SeamedEdge> edges;

  bool operator==(const Panel&) const = default;
};

struct EdgeRef {
  std::string panel;
  int edge = 0;

  bool operator==(const EdgeRef&) const = default;
};

/// Point k of edge `a` is paired with point k of edge `b`, or with point
/// m-1-k when `reversed` is set.
struct Stitch {
  EdgeRef a;
  EdgeRef b;
  bool reversed = false;

  bool operator==(const Stitch&) const = default;
};

struct SewingPattern {
  std::string category;
  std::vector<Panel> panels;
  std::vector<Stitch> stitches;

  std::optional<int> panel_index(std::string_view id) const;
  const Panel& panel(std::string_view id) const;

  bool operator==(const SewingPattern&) const = default;
};

// --- file format -----------------------------------------------------------

/// Parses and validates a pattern document. Panels are normalised to
/// counter-clockwise orientation; stitches are remapped accordingly.
SewingPattern parse_pattern(std::string_view text,
                            const GroupRegistry& registry = default_registry());
SewingPattern pattern_from_json(const nlohmann::json& doc,
                                const GroupRegistry& registry = default_registry());
nlohmann::json pattern_to_json(const SewingPattern& pattern);
std::string serialize_pattern(const SewingPattern& pattern);

// --- validation ------------------------------------------------------------

/// Structural checks only (no group registry lookup).
std::vector<Violation> validate(const SewingPattern& pattern);
/// Structural checks plus group-tag registration.
std::vector<Violation> validate(const SewingPattern& pattern, const GroupRegistry& registry);

double signed_area(const Panel& panel);
/// Reverses loop orientation in place and returns the edge index remap.
void reverse_orientation(SewingPattern& pattern, int panel_index);
void normalize_orientation(SewingPattern& pattern);

// --- discretisation --------------------------------------------------------

/// `count` points at uniform arc length from start to end inclusive.
/// Reversing the edge reverses the output exactly.
Polyline2 discretize_edge(const SeamedEdge& edge, int count);

/// Closed polyline (last point not repeated) made of the per-edge runs with
/// shared corners stored once: edges.size() * (count - 1) points.
Polyline2 panel_contour(const Panel& panel, int count);

/// Even-odd rule; points on the boundary are outside.
bool point_in_panel(const Polyline2& contour, const Vec2& p);

double polygon_area(const Polyline2& contour);

/// Resamples an open polyline to `count` points at uniform arc length.
Polyline2 resample_polyline(const Polyline2& line, int count);

// --- outlines --------------------------------------------------------------

/// A panel as per-edge polylines. Produced from a pattern by discretising its
/// edges, or from an embedding by inverse PCA.
struct PanelOutline {
  std::string id;
  std::string group;
  Placement placement;
  std::vector<Polyline2> edges;

  Polyline2 contour() const;
};

struct GarmentOutline {
  std::string category;
  std::vector<PanelOutline> panels;
  std::vector<Stitch> stitches;

  std::optional<int> panel_index(std::string_view id) const;
};

GarmentOutline outline_of(const SewingPattern& pattern, int points_per_edge = kDefaultEdgePoints);

}  // namespace sewkit
