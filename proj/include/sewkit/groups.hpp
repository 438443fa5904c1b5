#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "sewkit/pattern.hpp"
#include "sewkit/registry.hpp"

namespace sewkit {

inline constexpr int kDefaultComponents = 12;

/// All seamed edges of one basic panel group, discretised: l x m x 2 values
/// stored flat as [edge][point][x, y].
struct GroupTensor {
  int edges = 0;
  int points = 0;
  Eigen::VectorXd values;

  GroupTensor() = default;
  GroupTensor(int edge_count, int point_count)
      : edges(edge_count), points(point_count), values(Eigen::VectorXd::Zero(2 * edge_count * point_count)) {}

  Eigen::Index size() const { return values.size(); }
  Vec2 point(int edge, int k) const { return values.segment<2>(2 * (edge * points + k)); }
  void set_point(int edge, int k, const Vec2& p) { values.segment<2>(2 * (edge * points + k)) = p; }
  Polyline2 edge(int e) const;

  bool operator==(const GroupTensor& o) const {
    return edges == o.edges && points == o.points && values == o.values;
  }
};

/// PCA shape space of one group. `components` is D x h with orthonormal
/// columns; columns past the data rank are exactly zero.
struct GroupBasis {
  std::string group;
  int edges = 0;
  int points = 0;
  std::int64_t sample_count = 0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;

  int h() const { return static_cast<int>(components.cols()); }
  Eigen::VectorXd project(const GroupTensor& t) const;
  GroupTensor reconstruct(const Eigen::VectorXd& coefficients) const;
};

/// Group registry together with one fitted basis per group (or none).
struct BasisRegistry {
  GroupRegistry groups = default_registry();
  int h = kDefaultComponents;
  std::vector<std::optional<GroupBasis>> bases;

  int size() const { return groups.size(); }
  int embedding_dim() const { return size() * h; }
};

/// Concatenated per-group PCA coefficients. Rows of `coefficients` are
/// groups; absent groups carry an all-zero row and presence 0.
struct Embedding {
  Eigen::MatrixXd coefficients;
  Eigen::Array<bool, Eigen::Dynamic, 1> presence;

  int groups() const { return static_cast<int>(coefficients.rows()); }
  int h() const { return static_cast<int>(coefficients.cols()); }
  Eigen::VectorXd flat() const;

  bool operator==(const Embedding& o) const {
    return coefficients.rows() == o.coefficients.rows() &&
           coefficients.cols() == o.coefficients.cols() && presence.size() == o.presence.size() &&
           (coefficients.array() == o.coefficients.array()).all() && (presence == o.presence).all();
  }
};

Embedding zero_embedding(int groups, int h);

GroupTensor assemble_group_tensor(const SewingPattern& pattern, const GroupDef& group,
                                  int points_per_edge = kDefaultEdgePoints);
GroupTensor assemble_group_tensor(const GarmentOutline& outline, const GroupDef& group);

GroupBasis fit_group_basis(std::span<const GroupTensor> samples, int h,
                           std::string group_name = {});

/// One basis per group from per-garment tensors (registry order, absent =
/// nullopt). Groups never seen stay unfitted.
BasisRegistry fit_bases(const GroupRegistry& registry,
                        std::span<const std::vector<std::optional<GroupTensor>>> tensors, int h = kDefaultComponents);

/// "SWKB" | u32 version | registry JSON | u32 h | u32 groups | per group:
/// u8 fitted [| name | u32 edges | u32 points | u64 samples | u32 D
/// | f64 mean[D] | f64 components[D * h], column-major]
void write_basis_registry(std::ostream& out, const BasisRegistry& bases);
BasisRegistry read_basis_registry(std::istream& in);

Embedding encode(const SewingPattern& pattern, const BasisRegistry& bases,
                 int points_per_edge = kDefaultEdgePoints);

/// Inverse PCA per present group; absent groups are std::nullopt.
std::vector<std::optional<GroupTensor>> decode_contours(const Embedding& e,
                                                        const BasisRegistry& bases);

/// Rebuilds panel outlines from an embedding. Stitches come from the
/// registry's seam templates whose panels are both present.
GarmentOutline decode_outline(const Embedding& e, const BasisRegistry& bases);

Embedding gate_embedding(const Embedding& raw, const Eigen::Array<bool, Eigen::Dynamic, 1>& multihot);

/// Per-coefficient alpha * source + (1 - alpha) * target.
Embedding interpolate(const Embedding& source, const Embedding& target, double alpha);

struct CoefficientEdit {
  int group = 0;
  int component = 0;
  double value = 0.0;
};

/// Replace one group's block (and presence) with a donor garment's block.
struct GroupSwap {
  int group = 0;
  Eigen::VectorXd block;
  bool present = false;

  static GroupSwap from(const Embedding& donor, int group);
};

using EmbeddingEdit = std::variant<CoefficientEdit, GroupSwap>;

Embedding edit_embedding(const Embedding& e, std::span<const EmbeddingEdit> edits);

// --- serialisation ----------------------------------------------------------

nlohmann::json embedding_to_json(const Embedding& e, const GroupRegistry& registry);
Embedding embedding_from_json(const nlohmann::json& doc, const GroupRegistry& registry);

}  // namespace sewkit
