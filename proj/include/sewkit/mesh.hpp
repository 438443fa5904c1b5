#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sewkit/uv_field.hpp"

namespace sewkit {

/// Triangle strip bridging the two vertex runs of one stitch.
struct SeamBand {
  std::string name;
  std::vector<std::pair<int, int>> pairs;
  int first_face = 0;
  int face_count = 0;
};

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
  std::vector<int> face_panel;  // -1 on seam-band faces
  std::vector<SeamBand> seam_bands;
  std::vector<int> panel_of_vertex;
  std::vector<std::string> panel_names;

  int vertex_count() const { return static_cast<int>(vertices.size()); }
  int face_count() const { return static_cast<int>(faces.size()); }
  double face_area(int f) const;
};

// --- 2D constrained triangulation ------------------------------------------------

/// Triangulates the simple polygon `boundary` (counter-clockwise) together
/// with `inner` points strictly inside it. Output indices refer to
/// boundary vertices first, then inner points. Boundary edges are kept;
/// all other edges are flipped towards Delaunay.
std::vector<std::array<int, 3>> triangulate_polygon(const Polyline2& boundary, const Polyline2& inner);

// --- readout ---------------------------------------------------------------------

/// Readout of `outline` (k points per edge) lifted by bilinear sampling of the
/// maps. Inner vertices are masked pixel centres strictly inside each
/// contour. Corners are shared between neighbouring edges, so each panel
/// contributes inner + edges * (k - 1) vertices.
TriMesh readout_mesh(std::span<const PositionMap> maps, std::span<const MaskMap> masks,
                     const GarmentOutline& outline, int k = kDefaultEdgePoints);

/// Invariant violations: index range, degenerate panel faces, seam-band
/// shape, non-manifold edges and the Euler characteristic (panels - bands).
std::vector<std::string> mesh_violations(const TriMesh& mesh);

/// V - E + F over unique undirected edges.
int euler_characteristic(const TriMesh& mesh);

// --- text export -------------------------------------------------------------------

/// Wavefront-style text: `v` lines (fixed 6 decimals), then one `g` record
/// per panel and per seam band followed by its 1-based `f` lines.
std::string export_mesh(const TriMesh& mesh);

/// Reads `v`, `f` (any v/vt/vn form, polygons fanned) and `g` records.
TriMesh parse_mesh(std::string_view text);

}  // namespace sewkit
