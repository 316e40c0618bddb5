#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "unispace/core/model.hpp"

namespace uni {

struct ToolSpec {
  std::string_view key;
  std::string_view name;
  std::string_view group;
  std::string_view purpose;
};

/// The fourteen task-management tools, in toolbar order.
std::span<const ToolSpec> task_tools();
/// Tools that act on the selected sign.
std::span<const ToolSpec> selection_tools();
/// Gesture verbs of the task desktop (portal click, tab click, subtasks).
std::span<const ToolSpec> desk_tools();
std::span<const ToolSpec> search_tools();
std::span<const ToolSpec> data_tools();
std::span<const ToolSpec> install_tools();
std::span<const ToolSpec> device_tools();
std::span<const ToolSpec> settings_tools();
/// Verbs only a federated peer server sends.
std::span<const ToolSpec> peer_tools();

/// Lookup across every system toolbar.
const ToolSpec* find_system_tool(std::string_view key);
bool is_system_tool(std::string_view key);

struct ToolTemplate {
  std::string key;
  std::string name;
  std::string group;
  std::string purpose;
  std::string agent;
};

struct ToolbarTemplate {
  std::string name;
  std::vector<ToolTemplate> tools;
};

struct WorkplaceTemplate {
  std::string name;
  Scheme scheme = Scheme::Technological;
  std::vector<ToolbarTemplate> toolbars;
};

/// Declarative description of a site: everything install_site needs
/// besides the mandatory TaskMgmt/DataMgmt workplaces.
struct SiteTemplate {
  std::string name;
  SiteKind kind = SiteKind::ApplicationSite;
  std::string purpose;
  std::vector<WorkplaceTemplate> workplaces;
  std::vector<std::string> sections;
};

/// Throws Error(InvalidTemplate) with the offending path in the detail.
SiteTemplate parse_template(const Json& doc);
Json template_to_json(const SiteTemplate& t);

/// Built-in templates: "empty", "document-editor", "data-site".
std::vector<std::string> builtin_template_names();
SiteTemplate builtin_template(std::string_view name);  // throws InvalidTemplate

}  // namespace uni
