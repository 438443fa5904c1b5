#include "sewkit/mesh.hpp"

#include <charconv>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace sewkit {

double TriMesh::face_area(int f) const {
  const auto& t = faces[f];
  return 0.5 * (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
}

TriMesh readout_mesh(std::span<const PositionMap> maps, std::span<const MaskMap> masks,
                     const GarmentOutline& outline, int k) {
  if (k < 2) throw Error("invalid-argument", "need at least two vertices per edge");
  const std::size_t panels = outline.panels.size();
  if (maps.size() != panels || masks.size() != panels) {
    throw Error("shape-mismatch", "readout needs one map and one mask per panel");
  }
  TriMesh mesh;
  std::vector<int> base(panels);
  for (std::size_t t = 0; t < panels; ++t) {
    const PanelOutline& po = outline.panels[t];
    const MaskMap& mask = masks[t];
    const PositionMap& y = maps[t];
    if (mask.count() == 0) throw Error("empty-mask", "readout of empty mask " + po.id);
    if (y.rows != mask.rows() || y.cols != mask.cols()) throw Error("shape-mismatch", "map/mask shape");
    mesh.panel_names.push_back(po.id);
    base[t] = mesh.vertex_count();

    Polyline2 contour;
    for (const Polyline2& e : po.edges) {
      const Polyline2 run = static_cast<int>(e.size()) == k ? e : resample_polyline(e, k);
      contour.insert(contour.end(), run.begin(), run.end() - 1);
    }
    Polyline2 inner;
    std::vector<Eigen::Index> inner_pixels;
    for (int i = 0; i < mask.rows(); ++i) {
      for (int j = 0; j < mask.cols(); ++j) {
        if (!mask.inside(i, j)) continue;
        const Vec2 q = mask.frame.pixel_center(i, j);
        if (!point_in_panel(contour, q)) continue;
        inner.push_back(q);
        inner_pixels.push_back(mask.index(i, j));
      }
    }
    for (const Vec2& q : contour) {
      mesh.vertices.push_back(bilinear_sample(y, mask.frame.to_grid(q)));
      mesh.panel_of_vertex.push_back(static_cast<int>(t));
    }
    for (const Eigen::Index p : inner_pixels) {
      mesh.vertices.push_back(y.point(p));
      mesh.panel_of_vertex.push_back(static_cast<int>(t));
    }
    for (const auto& f : triangulate_polygon(contour, inner)) {
      mesh.faces.push_back({f[0] + base[t], f[1] + base[t], f[2] + base[t]});
      mesh.face_panel.push_back(static_cast<int>(t));
    }
  }

  // vertex index of point i on edge e of panel t
  auto edge_vertex = [&](int t, int e, int i) {
    const int edges = static_cast<int>(outline.panels[t].edges.size());
    if (i == k - 1) return base[t] + ((e + 1) % edges) * (k - 1);
    return base[t] + e * (k - 1) + i;
  };
  for (const Stitch& st : outline.stitches) {
    const auto ia = outline.panel_index(st.a.panel);
    const auto ib = outline.panel_index(st.b.panel);
    if (!ia || !ib) throw Error("unknown-panel", "stitch references a missing panel");
    if (st.a.edge >= static_cast<int>(outline.panels[*ia].edges.size()) ||
        st.b.edge >= static_cast<int>(outline.panels[*ib].edges.size())) {
      throw Error("edge-out-of-range", "stitch edge index out of range");
    }
    if (outline.panels[*ia].edges[st.a.edge].size() != outline.panels[*ib].edges[st.b.edge].size()) {
      throw Error("stitch-length-mismatch", "stitched edges differ in point count");
    }
    SeamBand band;
    band.name = st.a.panel + ".e" + std::to_string(st.a.edge) + "-" + st.b.panel + ".e" + std::to_string(st.b.edge);
    band.first_face = mesh.face_count();
    for (int i = 0; i < k; ++i) {
      band.pairs.emplace_back(edge_vertex(*ia, st.a.edge, i),
                              edge_vertex(*ib, st.b.edge, st.reversed ? k - 1 - i : i));
    }
    for (int i = 0; i + 1 < k; ++i) {
      const auto [a0, b0] = band.pairs[i];
      const auto [a1, b1] = band.pairs[i + 1];
      mesh.faces.push_back({a1, a0, b0});
      mesh.faces.push_back({a1, b0, b1});
      mesh.face_panel.push_back(-1);
      mesh.face_panel.push_back(-1);
    }
    band.face_count = mesh.face_count() - band.first_face;
    mesh.seam_bands.push_back(std::move(band));
  }
  return mesh;
}

int euler_characteristic(const TriMesh& mesh) {
  std::set<std::pair<int, int>> edges;
  for (const auto& f : mesh.faces) {
    for (int i = 0; i < 3; ++i) {
      const int a = f[i], b = f[(i + 1) % 3];
      edges.insert({std::min(a, b), std::max(a, b)});
    }
  }
  return mesh.vertex_count() - static_cast<int>(edges.size()) + mesh.face_count();
}

std::vector<std::string> mesh_violations(const TriMesh& mesh) {
  std::vector<std::string> out;
  const int n = mesh.vertex_count();
  if (mesh.face_panel.size() != mesh.faces.size()) out.push_back("face-panel-size");
  if (static_cast<int>(mesh.panel_of_vertex.size()) != n) out.push_back("vertex-panel-size");
  for (int f = 0; f < mesh.face_count(); ++f) {
    const auto& t = mesh.faces[f];
    if (t[0] < 0 || t[1] < 0 || t[2] < 0 || t[0] >= n || t[1] >= n || t[2] >= n) {
      out.push_back("index-out-of-range f" + std::to_string(f));
      return out;
    }
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) out.push_back("repeated-index f" + std::to_string(f));
    if (f < static_cast<int>(mesh.face_panel.size()) && mesh.face_panel[f] >= 0 && !(mesh.face_area(f) > 1e-10)) {
      out.push_back("degenerate-face f" + std::to_string(f));
    }
  }
  for (const SeamBand& b : mesh.seam_bands) {
    if (b.pairs.size() < 2) out.push_back("short-band " + b.name);
    if (b.face_count != 2 * (static_cast<int>(b.pairs.size()) - 1)) out.push_back("band-face-count " + b.name);
    std::set<int> sa, sb;
    for (const auto& [a, c] : b.pairs) {
      sa.insert(a);
      sb.insert(c);
    }
    if (sa.size() != b.pairs.size() || sb.size() != b.pairs.size()) out.push_back("band-runs-unequal " + b.name);
  }
  std::map<std::pair<int, int>, int> use;
  for (const auto& f : mesh.faces) {
    for (int i = 0; i < 3; ++i) {
      const int a = f[i], b = f[(i + 1) % 3];
      ++use[{std::min(a, b), std::max(a, b)}];
    }
  }
  for (const auto& [e, c] : use) {
    if (c > 2) {
      out.push_back("non-manifold-edge " + std::to_string(e.first) + "-" + std::to_string(e.second));
      break;
    }
  }
  const int expected = static_cast<int>(mesh.panel_names.size()) - static_cast<int>(mesh.seam_bands.size());
  const int chi = euler_characteristic(mesh);
  if (chi != expected) {
    out.push_back("euler " + std::to_string(chi) + " != " + std::to_string(expected));
  }
  return out;
}

std::string export_mesh(const TriMesh& mesh) {
  std::string out;
  out.reserve(mesh.vertices.size() * 40 + mesh.faces.size() * 24);
  char buf[128];
  for (const Vec3& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "v %.6f %.6f %.6f\n", v.x(), v.y(), v.z());
    out += buf;
  }
  auto faces = [&](int from, int to) {
    for (int f = from; f < to; ++f) {
      const auto& t = mesh.faces[f];
      std::snprintf(buf, sizeof buf, "f %d %d %d\n", t[0] + 1, t[1] + 1, t[2] + 1);
      out += buf;
    }
  };
  // panel faces are contiguous per panel, bands follow
  int f = 0;
  const int total = mesh.face_count();
  while (f < total) {
    const int p = f < static_cast<int>(mesh.face_panel.size()) ? mesh.face_panel[f] : -1;
    if (p < 0) break;
    int g = f;
    while (g < total && mesh.face_panel[g] == p) ++g;
    out += "g " + mesh.panel_names[p] + "\n";
    faces(f, g);
    f = g;
  }
  for (const SeamBand& b : mesh.seam_bands) {
    out += "g seam:" + b.name + "\n";
    faces(b.first_face, b.first_face + b.face_count);
  }
  return out;
}

namespace {

double parse_double(std::string_view s, int line) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw Error("syntax", "bad number on line " + std::to_string(line));
  }
  return v;
}

std::vector<std::string_view> fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

TriMesh parse_mesh(std::string_view text) {
  TriMesh mesh;
  int current = -1;
  SeamBand* band = nullptr;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    const auto f = fields(line);
    if (f.empty() || f[0][0] == '#') {
      if (end == text.size()) break;
      continue;
    }
    if (f[0] == "v") {
      if (f.size() < 4) throw Error("syntax", "vertex needs three coordinates on line " + std::to_string(line_no));
      mesh.vertices.emplace_back(parse_double(f[1], line_no), parse_double(f[2], line_no), parse_double(f[3], line_no));
      mesh.panel_of_vertex.push_back(-1);
    } else if (f[0] == "g") {
      const std::string name = f.size() > 1 ? std::string(f[1]) : std::string("default");
      if (name.rfind("seam:", 0) == 0) {
        mesh.seam_bands.push_back({name.substr(5), {}, mesh.face_count(), 0});
        band = &mesh.seam_bands.back();
        current = -1;
      } else {
        band = nullptr;
        auto it = std::find(mesh.panel_names.begin(), mesh.panel_names.end(), name);
        current = static_cast<int>(it - mesh.panel_names.begin());
        if (it == mesh.panel_names.end()) mesh.panel_names.push_back(name);
      }
    } else if (f[0] == "f") {
      if (f.size() < 4) throw Error("syntax", "face needs three vertices on line " + std::to_string(line_no));
      std::vector<int> idx;
      for (std::size_t i = 1; i < f.size(); ++i) {
        const std::string_view tok = f[i].substr(0, f[i].find('/'));
        int v = 0;
        auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || p != tok.data() + tok.size()) {
          throw Error("syntax", "bad face index on line " + std::to_string(line_no));
        }
        v = v < 0 ? mesh.vertex_count() + v : v - 1;
        if (v < 0 || v >= mesh.vertex_count()) {
          throw Error("syntax", "face index out of range on line " + std::to_string(line_no));
        }
        idx.push_back(v);
      }
      if (!band && current < 0) {
        mesh.panel_names.push_back("default");
        current = static_cast<int>(mesh.panel_names.size()) - 1;
      }
      for (std::size_t i = 1; i + 1 < idx.size(); ++i) {
        mesh.faces.push_back({idx[0], idx[i], idx[i + 1]});
        mesh.face_panel.push_back(band ? -1 : current);
        if (band) {
          ++band->face_count;
        } else {
          for (int v : {idx[0], idx[i], idx[i + 1]}) mesh.panel_of_vertex[v] = current;
        }
      }
    }
    if (end == text.size()) break;
  }
  return mesh;
}

}  // namespace sewkit
