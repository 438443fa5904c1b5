#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sewkit/groups.hpp"
#include "sewkit/mesh.hpp"
#include "sewkit/uv_field.hpp"

namespace sewkit {

// Shape parameters in cm. `flare` is the radius gained per cm of height
// (0 gives a cylinder).
struct SkirtSpec {
  double waist_girth = 72.0;  // [60, 90]
  double length = 55.0;       // [40, 70]
  double flare = 0.15;        // [0, 0.3]
  double band_height = 6.0;   // [4, 8]
};

struct TubeDressSpec {
  double girth = 86.0;          // [70, 100]
  double bodice_length = 32.0;  // [25, 40]
  double skirt_length = 50.0;   // [40, 60]
  double flare = 0.1;           // [0, 0.3]
};

struct PantsSpec {
  double leg_girth = 64.0;   // [56, 72]
  double leg_length = 80.0;  // [60, 100]
};

struct TShirtBodySpec {
  double girth = 96.0;      // [80, 110]
  double length = 64.0;     // [55, 75]
  double hem_curve = 2.0;   // [0, 5], depth of the hem dip at the centre
};

using GarmentParams = std::variant<SkirtSpec, TubeDressSpec, PantsSpec, TShirtBodySpec>;

struct GarmentSpec {
  GarmentParams params;
  std::uint64_t seed = 0;

  std::string category() const;
};

inline const std::vector<std::string>& garment_categories() {
  static const std::vector<std::string> c{"skirt", "tube-dress", "pants", "t-shirt-body"};
  return c;
}

/// Throws ValidationError ("out-of-range") for parameters outside the ranges above.
void check_spec(const GarmentSpec& spec);

/// Uniform draw from the documented ranges.
GarmentSpec sample_spec(std::string_view category, std::uint64_t seed);

SewingPattern gen_pattern(const GarmentSpec& spec);

struct AnalyticDrape {
  DrapeSurface position;
  DrapeSurface normal;  // same convention as compute_normals
};

/// Developable wrap: cones (cylinders at zero flare) for skirts, dresses and
/// t-shirt bodies, one cylinder per pant leg.
AnalyticDrape analytic_drape(const GarmentSpec& spec, const SewingPattern& pattern);

struct Sample {
  std::string id;
  GarmentSpec spec;
  SewingPattern pattern;
  GarmentOutline outline;
  std::vector<BakedPanel> maps;
  TriMesh mesh;
  std::vector<std::optional<GroupTensor>> tensors;  // registry order
};

Sample make_sample(const GarmentSpec& spec, std::string id, int points_per_edge = kDefaultEdgePoints);

/// Item i takes category categories[i % C] and seed derive_seed(seed, i).
std::vector<Sample> gen_dataset(int n, std::span<const std::string> categories, std::uint64_t seed,
                                int points_per_edge = kDefaultEdgePoints);

std::vector<std::optional<GroupTensor>> group_tensors(const GarmentOutline& outline,
                                                      const GroupRegistry& registry);

/// Writes <id>.pattern.json, <id>.maps, <id>.obj per sample plus manifest.json.
void write_dataset(const std::filesystem::path& dir, std::span<const Sample> samples);

struct ManifestEntry {
  std::string id;
  std::string category;
  std::filesystem::path pattern;
  std::filesystem::path maps;
  std::filesystem::path mesh;
};

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest);

}  // namespace sewkit
