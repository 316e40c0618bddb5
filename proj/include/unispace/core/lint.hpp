#pragma once

#include <string>
#include <vector>

#include "unispace/core/model.hpp"

namespace uni {

/// How a node's children are presented. Groups are classifications the user
/// must hold in mind (menus, tabs, partitions, workplace sets); flat nodes
/// are collections shown at once (toolbars, desktops).
enum class LintKind { Group, Flat, Leaf };

struct LintNode {
  std::string name;
  LintKind kind = LintKind::Leaf;
  Scheme scheme = Scheme::Technological;
  std::vector<std::size_t> children;  // indices into LintGraph::nodes
};

/// A rooted graph of lint nodes. Built in code (acyclic by construction) or
/// parsed from a fixture document, where shared references can form cycles.
struct LintGraph {
  std::vector<LintNode> nodes;
  std::size_t root = 0;

  std::size_t add(std::string name, LintKind kind, Scheme scheme = Scheme::Technological);
  void link(std::size_t parent, std::size_t child) { nodes[parent].children.push_back(child); }
};

enum class LintRule { MentalElements, PerceptualElements, MentalDepth, PerceptualDepth };
std::string_view to_string(LintRule r) noexcept;

struct Violation {
  std::string path;
  LintRule rule;
  std::uint32_t observed;
  std::uint32_t limit;
  bool operator==(const Violation&) const = default;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool passed() const noexcept { return violations.empty(); }
};

/// Checks every group against the mental element limit, every flat node
/// against the perceptual limit, nested-group depth against mental_depth and
/// overall level count against perceptual_depth. Throws CycleDetected.
ValidationReport validate_complexity(const LintGraph& graph, const ComplexityLimits& limits);

/// Fixture documents: either an inline tree
///   {"name": .., "kind": "group"|"flat"|"leaf", "scheme": .., "children": [..]}
/// or a graph {"root": "<id>", "nodes": {"<id>": {"name", "kind", "children": ["<id>"]}}}.
/// Nodes with children and no kind default to "group".
LintGraph parse_lint_document(const Json& doc);

Json to_json(const ValidationReport& report);

}  // namespace uni
