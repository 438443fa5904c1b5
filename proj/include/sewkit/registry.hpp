#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace sewkit {

// A role is a canonical panel slot inside a basic panel group. Pattern panels
// fill a role by carrying the role name as their id.
struct PanelRole {
  std::string name;
  int edge_count = 0;
};

struct GroupDef {
  std::string name;
  std::vector<PanelRole> roles;

  int total_edges() const;
};

// Stitch between two canonical panels, used when a garment is rebuilt from an
// embedding alone (there is no source pattern to take stitches from).
struct SeamTemplate {
  std::string panel_a;
  int edge_a = 0;
  std::string panel_b;
  int edge_b = 0;
  bool reversed = false;
};

struct RoleLocation {
  int group = 0;
  int role = 0;
};

class GroupRegistry {
 public:
  GroupRegistry(std::vector<GroupDef> groups, std::vector<SeamTemplate> seams);

  const std::vector<GroupDef>& groups() const noexcept { return groups_; }
  const std::vector<SeamTemplate>& seams() const noexcept { return seams_; }
  int size() const noexcept { return static_cast<int>(groups_.size()); }

  std::optional<int> group_index(std::string_view name) const;
  std::optional<RoleLocation> locate_panel(std::string_view panel_id) const;

  // Canonical panel order: groups in registry order, roles in group order.
  std::vector<std::string> panel_ids() const;
  int panel_count() const;

  nlohmann::json to_json() const;
  static GroupRegistry from_json(const nlohmann::json& doc);

 private:
  std::vector<GroupDef> groups_;
  std::vector<SeamTemplate> seams_;
};

// Desk-scale taxonomy: 6 groups, 10 panels, covering the synthetic skirt,
// tube-dress, pants and t-shirt-body categories.
const GroupRegistry& default_registry();

}  // namespace sewkit
