#include <algorithm>

#include "unispace/core/catalog.hpp"
#include "unispace/error.hpp"
#include "unispace/server/executive.hpp"

namespace uni {

namespace {

constexpr int kTabBarH = 40;
constexpr int kHeaderH = 30;
constexpr int kToolbarH = 30;
constexpr int kRowH = 40;
constexpr int kPerRow = 4;

struct Builder {
  int next = 0;
  RenderNode node(NodeKind kind, Bounds b, std::string label, std::optional<SignId> sign = {},
                  std::string key = {}) {
    RenderNode n;
    n.node_id = "n" + std::to_string(next++);
    n.kind = kind;
    n.bounds = b;
    n.label = std::move(label);
    n.sign = std::move(sign);
    n.key = std::move(key);
    return n;
  }
};

struct Item {
  NodeKind kind;
  std::string label;
  std::optional<SignId> sign;
  std::string key;
};

// Lays items on a grid inside `area`, truncating what does not fit.
void fill_grid(Builder& b, RenderNode& desktop, const std::vector<Item>& items) {
  const auto& area = desktop.bounds;
  int rows = std::max(0, area.h / kRowH);
  int cell_w = area.w / kPerRow;
  std::size_t cap = static_cast<std::size_t>(rows * kPerRow);
  for (std::size_t i = 0; i < items.size() && i < cap; ++i) {
    int col = static_cast<int>(i % kPerRow);
    int row = static_cast<int>(i / kPerRow);
    Bounds cell{area.x + col * cell_w + 4, area.y + row * kRowH + 4, cell_w - 8, kRowH - 8};
    desktop.children.push_back(b.node(items[i].kind, cell, items[i].label, items[i].sign, items[i].key));
  }
  if (items.size() > cap && cap > 0) {
    desktop.children.back().label = "+" + std::to_string(items.size() - cap + 1) + " more";
    desktop.children.back().kind = NodeKind::Label;
    desktop.children.back().key.clear();
    desktop.children.back().sign.reset();
  }
}

RenderNode toolbar_node(Builder& b, const std::string& name, const std::vector<std::pair<std::string, std::optional<SignId>>>& tools,
                        int y) {
  auto bar = b.node(NodeKind::Toolbar, Bounds{0, y, kCanvas, kToolbarH}, name);
  if (tools.empty()) return bar;
  int w = kCanvas / static_cast<int>(tools.size());
  for (std::size_t i = 0; i < tools.size(); ++i) {
    const auto* spec = find_system_tool(tools[i].first);
    std::string label = spec ? std::string(spec->name) : tools[i].first;
    bar.children.push_back(b.node(NodeKind::ToolNode, Bounds{static_cast<int>(i) * w, y, w, kToolbarH}, label,
                                  tools[i].second, tools[i].first));
  }
  return bar;
}

}  // namespace

RenderTree Executive::render(const std::string& token) const {
  const SessionState* s = token.empty() ? nullptr : session(token);
  if (!token.empty() && !s) fail(Errc::AuthFailed, "unknown session");
  Builder b;
  RenderTree tree;
  tree.root = b.node(NodeKind::Space, Bounds{0, 0, kCanvas, kCanvas}, "");

  if (s && !s->principal.is_owner()) {
    // Agents of other domains see a bare space: everything they need comes in results.
    tree.root.label = domain_.owner.sign.name;
    tree.root.children.push_back(
        b.node(NodeKind::Desktop, Bounds{0, kTabBarH, kCanvas, kCanvas - kTabBarH}, "shared storages"));
    return tree;
  }

  SessionLocation fallback(root_target());
  const SessionLocation& loc = s ? s->location : fallback;
  const Frame& cur = loc.current();
  tree.depth = loc.depth();
  tree.endpoint = cur.space.endpoint.remote ? cur.space.endpoint.str() : "local";
  tree.root.sign = cur.space.target;

  // One tab per open task.
  int y = 0;
  auto open = tasks_.open_tasks();
  int slots = static_cast<int>(open.size());
  int tab_w = std::min(160, kCanvas / std::max(slots, 1));
  auto focus = tasks_.focus();
  int x = 0;
  for (const auto* t : open) {
    auto tab = b.node(NodeKind::TaskTab, Bounds{x, y, tab_w, kTabBarH}, t->name, t->id, "switch_task");
    tab.active = focus == t->id;
    tree.root.children.push_back(std::move(tab));
    x += tab_w;
  }
  y += kTabBarH;

  // Header: where we are, plus the way back.
  std::string title;
  const Workplace* wp = nullptr;
  std::optional<SignId> site_id = site_of(cur.space);
  if (!cur.space.endpoint.remote) {
    if (site_id) {
      const auto& site = domain_.sites.at(*site_id);
      title = site.name;
      if (cur.space.kind == TargetKind::Workplace) wp = site.workplace(cur.space.target);
      WorkplaceRole role = WorkplaceRole::TaskMgmt;
      if (cur.space.kind == TargetKind::StorageSection || cur.space.kind == TargetKind::Container ||
          cur.space.kind == TargetKind::ObjectPart)
        role = WorkplaceRole::DataMgmt;
      if (!wp)
        for (const auto& w : site.workplaces)
          if (w.role == role) wp = &w;
      if (wp) title += " / " + wp->name;
    }
    if (auto st = storage_holding(cur.space.target); st && *st != cur.space.target) {
      const auto& store = storages_.at(*st);
      if (const auto* z = store.zone(cur.space.target)) title += " / " + z->name;
      if (const auto* o = store.object(cur.space.target)) title += " / " + o->sign.name;
    }
  } else {
    title = "remote " + std::string(to_string(cur.space.kind));
  }
  if (const auto* part = domain_.partition(cur.space.target)) title = part->name;
  tree.root.label = title;
  tree.root.children.push_back(b.node(NodeKind::Label, Bounds{0, y, kCanvas, kHeaderH}, title));
  y += kHeaderH;

  // Toolbars: task tools always (exit only below the root), then the workplace's own.
  std::vector<std::pair<std::string, std::optional<SignId>>> task_bar;
  for (const auto& spec : task_tools())
    if (spec.key != "exit" || tree.depth > 1) task_bar.emplace_back(std::string(spec.key), std::nullopt);
  tree.root.children.push_back(toolbar_node(b, "Tasks", task_bar, y));
  y += kToolbarH;
  if (wp) {
    for (const auto& bar : wp->toolbars) {
      if (bar.name == "Tasks") continue;
      if (y + kToolbarH > kCanvas - kRowH) break;
      std::vector<std::pair<std::string, std::optional<SignId>>> tools;
      for (const auto& t : bar.tools) tools.emplace_back(t.command_key, t.sign.id);
      tree.root.children.push_back(toolbar_node(b, bar.name, tools, y));
      y += kToolbarH;
    }
  }

  auto desktop = b.node(NodeKind::Desktop, Bounds{0, y, kCanvas, kCanvas - y}, wp ? wp->name : title,
                        wp ? std::optional<SignId>(wp->desktop.id) : std::nullopt);
  std::vector<Item> items;
  auto portal_item = [&](const Portal& p) {
    items.push_back(Item{NodeKind::PortalNode, p.sign.name, p.sign.id, "activate"});
  };
  const auto& sys = domain_.sites.at(domain_.system_site);
  bool search_wp = wp && wp->role == WorkplaceRole::Search;
  if (cur.space.endpoint.remote) {
    items.push_back(Item{NodeKind::Label, "served by " + cur.space.endpoint.str(), std::nullopt, ""});
  } else if (search_wp && s) {
    for (const auto& hit : s->results) {
      auto kind = hit.value("kind", "");
      if (kind == "object")
        items.push_back(Item{NodeKind::Object, hit.value("name", ""), hit.at("id").get<SignId>(), "enter"});
      else
        items.push_back(Item{NodeKind::PortalNode, hit.value("name", ""), hit.at("portal").get<SignId>(), "activate"});
    }
  } else if (const auto* part = domain_.partition(cur.space.target)) {
    for (const auto& pid : part->site_portals)
      if (const auto* p = portals_.find(pid)) portal_item(*p);
  } else if (auto st = storage_holding(cur.space.target); st && *st != cur.space.target) {
    const auto& store = storages_.at(*st);
    if (const auto* z = store.zone(cur.space.target)) {
      for (const auto& c : z->children) {
        if (const auto* o = store.object(c))
          items.push_back(Item{NodeKind::Object, o->sign.name, c, "enter"});
        else if (const auto* cz = store.zone(c))
          items.push_back(Item{NodeKind::Container, cz->name, c, "enter"});
      }
    } else if (const auto* o = store.object(cur.space.target)) {
      for (const auto& part : o->current_version().snapshot)
        items.push_back(Item{NodeKind::Label, part.name + " (" + std::to_string(part.bytes.size()) + " B)",
                             std::nullopt, ""});
    }
  } else if (site_id && *site_id == sys.id && wp && wp->role == WorkplaceRole::TaskMgmt) {
    // The domain root: every mounted partition and its sites.
    for (const auto& part : domain_.partitions) {
      if (!part.mounted) continue;
      for (const auto& pid : part.site_portals)
        if (const auto* p = portals_.find(pid)) portal_item(*p);
    }
  } else if (site_id && wp) {
    const auto& site = domain_.sites.at(*site_id);
    if (wp->role == WorkplaceRole::DataMgmt) {
      for (const auto* z : storages_.at(site.storage_ref).sections())
        items.push_back(Item{NodeKind::Container, z->name, z->id, "enter"});
    } else {
      for (const auto& w : site.workplaces)
        if (&w != wp) items.push_back(Item{NodeKind::PortalNode, w.name, w.id, "enter"});
      for (const auto& lease : wp->desktop.open_handles)
        items.push_back(Item{NodeKind::Label, lease, std::nullopt, ""});
    }
  }
  fill_grid(b, desktop, items);
  tree.root.children.push_back(std::move(desktop));
  return tree;
}

}  // namespace uni
