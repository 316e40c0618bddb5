#pragma once

#include <optional>
#include <string>
#include <vector>

#include "unispace/core/model.hpp"

namespace uni {

inline constexpr int kCanvas = 1000;

enum class NodeKind { Space, Desktop, Toolbar, ToolNode, PortalNode, Object, Container, Label, TaskTab };

std::string_view to_string(NodeKind k) noexcept;
std::optional<NodeKind> node_kind_from(std::string_view text) noexcept;

struct RenderNode {
  std::string node_id;
  std::optional<SignId> sign;
  NodeKind kind = NodeKind::Label;
  Bounds bounds;
  std::string label;
  std::string key;       // command key of tool and task_tab nodes
  bool active = false;
  std::vector<RenderNode> children;
};

/// Tree emitted for one space. `depth` is the session stack depth; any tree
/// with depth > 1 must contain an exit tool.
struct RenderTree {
  RenderNode root;
  std::size_t depth = 1;
  std::string endpoint = "local";
};

Json to_json(const RenderNode& n);
Json to_json(const RenderTree& t);

/// Structural check of a tree as it travels on the wire. Returns the first
/// problem found, or nullopt when the tree is valid.
std::optional<std::string> validate_tree(const Json& tree);

/// Counts nodes matching kind (and key, when given).
std::size_t count_nodes(const Json& tree, std::string_view kind, std::string_view key = {});

}  // namespace uni
