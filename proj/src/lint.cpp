#include "unispace/core/lint.hpp"

#include <functional>
#include <map>

#include "unispace/error.hpp"

namespace uni {

std::size_t LintGraph::add(std::string name, LintKind kind, Scheme scheme) {
  nodes.push_back(LintNode{std::move(name), kind, scheme, {}});
  return nodes.size() - 1;
}

std::string_view to_string(LintRule r) noexcept {
  switch (r) {
    case LintRule::MentalElements: return "mental_elements";
    case LintRule::PerceptualElements: return "perceptual_elements";
    case LintRule::MentalDepth: return "mental_depth";
    case LintRule::PerceptualDepth: return "perceptual_depth";
  }
  return "mental_elements";
}

ValidationReport validate_complexity(const LintGraph& graph, const ComplexityLimits& limits) {
  ValidationReport report;
  if (graph.nodes.empty()) return report;
  if (graph.root >= graph.nodes.size()) fail(Errc::InvalidArgument, "lint root");

  enum class Mark { White, Grey };
  std::vector<Mark> marks(graph.nodes.size(), Mark::White);

  std::function<void(std::size_t, const std::string&, std::uint32_t, std::uint32_t)> walk =
      [&](std::size_t idx, const std::string& parent_path, std::uint32_t level,
          std::uint32_t group_depth) {
        if (marks[idx] == Mark::Grey) fail(Errc::CycleDetected, graph.nodes[idx].name);
        marks[idx] = Mark::Grey;
        const auto& node = graph.nodes[idx];
        auto path = parent_path.empty() ? node.name : parent_path + "/" + node.name;
        auto count = static_cast<std::uint32_t>(node.children.size());

        if (node.kind == LintKind::Group) ++group_depth;
        if (level == limits.perceptual_depth + 1)
          report.violations.push_back({path, LintRule::PerceptualDepth, level, limits.perceptual_depth});
        if (node.kind == LintKind::Group && group_depth == limits.mental_depth + 1)
          report.violations.push_back({path, LintRule::MentalDepth, group_depth, limits.mental_depth});

        if (node.kind == LintKind::Group && count > limits.mental_elements)
          report.violations.push_back({path, LintRule::MentalElements, count, limits.mental_elements});
        if (node.kind == LintKind::Flat && count > limits.perceptual_elements)
          report.violations.push_back(
              {path, LintRule::PerceptualElements, count, limits.perceptual_elements});

        for (auto child : node.children) {
          if (child >= graph.nodes.size()) fail(Errc::InvalidArgument, "lint child index");
          walk(child, path, level + 1, group_depth);
        }
        // Shared subtrees are re-walked from every parent so each path is
        // reported.
        marks[idx] = Mark::White;
      };
  walk(graph.root, "", 1, 0);
  return report;
}

namespace {

LintKind kind_from(const Json& node) {
  bool has_children = node.contains("children") && !node["children"].empty();
  if (!node.contains("kind")) return has_children ? LintKind::Group : LintKind::Leaf;
  auto k = node["kind"].get<std::string>();
  if (k == "group" || k == "menu" || k == "tabs") return LintKind::Group;
  if (k == "flat" || k == "toolbar" || k == "desktop") return LintKind::Flat;
  if (k == "leaf") return LintKind::Leaf;
  fail(Errc::Malformed, "lint kind " + k);
}

Scheme scheme_of(const Json& node) {
  return node.contains("scheme") ? scheme_from(node["scheme"].get<std::string>())
                                 : Scheme::Technological;
}

std::size_t add_inline(LintGraph& g, const Json& node) {
  if (node.is_string()) return g.add(node.get<std::string>(), LintKind::Leaf);
  if (!node.is_object()) fail(Errc::Malformed, "lint node");
  auto idx = g.add(node.value("name", std::string{}), kind_from(node), scheme_of(node));
  if (node.contains("children")) {
    if (!node["children"].is_array()) fail(Errc::Malformed, "lint children");
    for (const auto& c : node["children"]) {
      auto child = add_inline(g, c);
      g.link(idx, child);
    }
  }
  return idx;
}

}  // namespace

LintGraph parse_lint_document(const Json& doc) {
  LintGraph g;
  try {
    if (doc.contains("nodes")) {
      std::map<std::string, std::size_t> index;
      for (const auto& [key, node] : doc["nodes"].items())
        index[key] = g.add(node.value("name", key), kind_from(node), scheme_of(node));
      for (const auto& [key, node] : doc["nodes"].items()) {
        for (const auto& c : node.value("children", Json::array())) {
          auto it = index.find(c.get<std::string>());
          if (it == index.end()) fail(Errc::Malformed, "unknown lint node " + c.get<std::string>());
          g.link(index[key], it->second);
        }
      }
      auto root = doc.at("root").get<std::string>();
      if (!index.count(root)) fail(Errc::Malformed, "unknown lint root");
      g.root = index[root];
    } else {
      g.root = add_inline(g, doc);
    }
  } catch (const Json::exception& e) {
    fail(Errc::Malformed, e.what());
  }
  return g;
}

Json to_json(const ValidationReport& report) {
  Json v = Json::array();
  for (const auto& x : report.violations)
    v.push_back({{"path", x.path},
                 {"rule", to_string(x.rule)},
                 {"observed", x.observed},
                 {"limit", x.limit}});
  return Json{{"passed", report.passed()}, {"violations", v}};
}

}  // namespace uni
