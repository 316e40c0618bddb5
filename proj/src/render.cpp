#include "unispace/wire/render.hpp"

#include <functional>
#include <set>

namespace uni {

namespace {
constexpr std::pair<NodeKind, std::string_view> kKinds[] = {
    {NodeKind::Space, "space"},         {NodeKind::Desktop, "desktop"},
    {NodeKind::Toolbar, "toolbar"},     {NodeKind::ToolNode, "tool"},
    {NodeKind::PortalNode, "portal"},   {NodeKind::Object, "object"},
    {NodeKind::Container, "container"}, {NodeKind::Label, "label"},
    {NodeKind::TaskTab, "task_tab"},
};
}

std::string_view to_string(NodeKind k) noexcept {
  for (const auto& [kind, name] : kKinds)
    if (kind == k) return name;
  return "label";
}

std::optional<NodeKind> node_kind_from(std::string_view text) noexcept {
  for (const auto& [kind, name] : kKinds)
    if (name == text) return kind;
  return std::nullopt;
}

Json to_json(const RenderNode& n) {
  Json j{{"id", n.node_id},
         {"kind", to_string(n.kind)},
         {"bounds", {n.bounds.x, n.bounds.y, n.bounds.w, n.bounds.h}},
         {"label", n.label}};
  if (n.sign) j["sign"] = *n.sign;
  if (!n.key.empty()) j["key"] = n.key;
  if (n.active) j["active"] = true;
  Json children = Json::array();
  for (const auto& c : n.children) children.push_back(to_json(c));
  j["children"] = std::move(children);
  return j;
}

Json to_json(const RenderTree& t) {
  return Json{{"root", to_json(t.root)}, {"depth", t.depth}, {"endpoint", t.endpoint}};
}

std::optional<std::string> validate_tree(const Json& tree) {
  if (!tree.is_object() || !tree.contains("root") || !tree.contains("depth"))
    return "tree needs root and depth";
  if (!tree["depth"].is_number_integer() || tree["depth"].get<std::int64_t>() < 1) return "bad depth";
  std::set<std::string> ids;
  bool has_exit = false;
  std::optional<std::string> problem;
  std::function<void(const Json&, const Bounds*, int)> walk = [&](const Json& n, const Bounds* parent,
                                                                   int level) {
    if (problem) return;
    if (level > 64) {
      problem = "tree too deep";
      return;
    }
    if (!n.is_object() || !n.contains("id") || !n["id"].is_string() || !n.contains("kind") ||
        !n["kind"].is_string() || !n.contains("bounds") || !n["bounds"].is_array() ||
        n["bounds"].size() != 4 || !n.contains("children") || !n["children"].is_array()) {
      problem = "node fields";
      return;
    }
    auto kind = node_kind_from(n["kind"].get<std::string>());
    if (!kind) {
      problem = "unknown node kind " + n["kind"].get<std::string>();
      return;
    }
    if (level == 0 && *kind != NodeKind::Space) {
      problem = "root must be a space";
      return;
    }
    if (!ids.insert(n["id"].get<std::string>()).second) {
      problem = "duplicate node id " + n["id"].get<std::string>();
      return;
    }
    Bounds b;
    for (const auto& v : n["bounds"])
      if (!v.is_number_integer()) {
        problem = "bounds";
        return;
      }
    b = {n["bounds"][0].get<int>(), n["bounds"][1].get<int>(), n["bounds"][2].get<int>(),
         n["bounds"][3].get<int>()};
    if (b.w < 0 || b.h < 0 || !Bounds{0, 0, kCanvas, kCanvas}.contains(b)) {
      problem = "bounds outside canvas at " + n["id"].get<std::string>();
      return;
    }
    if (parent && !parent->contains(b)) {
      problem = "child outside parent at " + n["id"].get<std::string>();
      return;
    }
    if (n.contains("key") && n["key"] == "exit") has_exit = true;
    for (const auto& c : n["children"]) walk(c, &b, level + 1);
  };
  walk(tree["root"], nullptr, 0);
  if (problem) return problem;
  if (tree["depth"].get<std::int64_t>() > 1 && !has_exit) return "non-root space without exit";
  return std::nullopt;
}

std::size_t count_nodes(const Json& tree, std::string_view kind, std::string_view key) {
  std::size_t n = 0;
  std::function<void(const Json&)> walk = [&](const Json& node) {
    if (node.value("kind", "") == kind && (key.empty() || node.value("key", "") == key)) ++n;
    if (node.contains("children"))
      for (const auto& c : node["children"]) walk(c);
  };
  walk(tree.contains("root") ? tree["root"] : tree);
  return n;
}

}  // namespace uni
