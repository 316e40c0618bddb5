#include "unispace/portal/portal.hpp"

#include <array>

#include "unispace/error.hpp"

namespace uni {
namespace {

constexpr std::array<std::pair<TargetKind, std::string_view>, 8> kKinds{{
    {TargetKind::Domain, "Domain"},
    {TargetKind::Partition, "Partition"},
    {TargetKind::Site, "Site"},
    {TargetKind::Workplace, "Workplace"},
    {TargetKind::StorageSection, "StorageSection"},
    {TargetKind::Container, "Container"},
    {TargetKind::ObjectPart, "ObjectPart"},
    {TargetKind::Task, "Task"},
}};

}  // namespace

std::string_view to_string(TargetKind k) noexcept {
  for (const auto& [kind, text] : kKinds)
    if (kind == k) return text;
  return "Site";
}

TargetKind target_kind_from(std::string_view text) {
  for (const auto& [kind, t] : kKinds)
    if (t == text) return kind;
  fail(Errc::Malformed, "target kind " + std::string(text));
}

const Portal& PortalCatalog::create(const Request& req, const TargetLookup& lookup,
                                    IdGenerator& ids) {
  Portal p;
  p.sign.ctype = ConceptualType::Portal;
  p.sign.tags = req.tags;
  p.context_id = req.context;
  p.spawn_task = req.spawn_task;

  if (const auto* original = find(req.target)) {
    // A reference to a portal is a reference to the original place.
    p.target = original->target;
    p.software_agent_ref = original->software_agent_ref;
    p.data_site_refs = original->data_site_refs;
    p.comm_agent = original->comm_agent;
    p.parameters = original->parameters;
    p.interface_agent_hint = original->interface_agent_hint;
    p.sign.name = req.name.empty() ? original->sign.name : req.name;
  } else {
    auto info = lookup ? lookup(req.target) : std::nullopt;
    if (!info) fail(Errc::NotFound, "portal target " + req.target.str());
    p.target = PortalTarget{info->kind, req.target, Endpoint::local(), req.part};
    p.software_agent_ref = info->software_agent;
    p.data_site_refs = info->data_sites;
    p.comm_agent = CommAgent{"loopback", ""};
    p.sign.name = req.name.empty() ? info->name : req.name;
  }
  for (const auto& [k, v] : req.parameters) p.parameters[k] = v;
  p.sign.id = ids.next();
  p.sign.properties["kind"] = "portal";
  auto id = p.sign.id;
  return portals_.emplace(id, std::move(p)).first->second;
}

const Portal& PortalCatalog::adopt(Portal portal) {
  auto id = portal.sign.id;
  return portals_.insert_or_assign(id, std::move(portal)).first->second;
}

const Portal* PortalCatalog::find(const SignId& id) const {
  auto it = portals_.find(id);
  return it == portals_.end() ? nullptr : &it->second;
}

const Portal& PortalCatalog::get(const SignId& id) const {
  const auto* p = find(id);
  if (!p) fail(Errc::NotFound, "portal " + id.str());
  return *p;
}

std::vector<const Portal*> PortalCatalog::find_by_name(std::string_view name) const {
  std::vector<const Portal*> out;
  for (const auto& [id, p] : portals_)
    if (p.sign.name == name) out.push_back(&p);
  return out;
}

PortalTarget resolve(const Portal& portal, const TargetExists& exists) {
  if (exists && !exists(portal.target)) fail(Errc::PortalDangling, portal.sign.name);
  return portal.target;
}

void SessionLocation::pop() {
  if (frames_.size() <= 1) fail(Errc::AtRoot);
  frames_.pop_back();
}

SessionLocation activate(SessionLocation session, const Portal& portal, const TargetExists& exists) {
  session.push(Frame{resolve(portal, exists), portal.sign.id});
  return session;
}

SessionLocation exit(SessionLocation session) {
  session.pop();
  return session;
}

std::size_t EnvironmentMap::count(std::string_view kind) const {
  std::size_t n = 0;
  for (const auto& node : nodes)
    if (node.kind == kind) ++n;
  return n;
}

namespace {

void add_site_lint(LintGraph& g, std::size_t parent, const Site& site) {
  auto s = g.add(site.name, LintKind::Group, Scheme::Technological);
  g.link(parent, s);
  std::optional<std::size_t> mandatory;
  for (const auto& w : site.workplaces) {
    auto wnode = g.add(w.name, LintKind::Flat, w.scheme);
    for (const auto& bar : w.toolbars) {
      auto b = g.add(bar.name, LintKind::Flat);
      for (const auto& t : bar.tools) g.link(b, g.add(t.command_key, LintKind::Leaf));
      g.link(wnode, b);
    }
    bool is_mandatory = w.role == WorkplaceRole::TaskMgmt || w.role == WorkplaceRole::DataMgmt;
    if (is_mandatory) {
      if (!mandatory) {
        mandatory = g.add("mandatory", LintKind::Group);
        g.link(s, *mandatory);
      }
      g.link(*mandatory, wnode);
    } else {
      g.link(s, wnode);
    }
  }
}

const Site* site_of_portal(const PersonalDomain& domain, const PortalCatalog& portals,
                           const SignId& portal_id) {
  const auto* p = portals.find(portal_id);
  if (!p || p->target.kind != TargetKind::Site || p->target.endpoint.remote) return nullptr;
  return domain.site(p->target.target);
}

}  // namespace

LintGraph lint_graph(const Site& site) {
  LintGraph g;
  g.root = g.add("site", LintKind::Group);
  add_site_lint(g, g.root, site);
  // The wrapper is only a handle; lint the site node itself.
  g.root = g.nodes[g.root].children.front();
  return g;
}

LintGraph lint_graph(const PersonalDomain& domain, const PortalCatalog& portals) {
  LintGraph g;
  g.root = g.add("partitions", LintKind::Group);
  for (const auto* part : domain.visible_partitions()) {
    auto pn = g.add(part->name, LintKind::Flat);
    g.link(g.root, pn);
    for (const auto& portal_id : part->site_portals) {
      if (const auto* site = site_of_portal(domain, portals, portal_id)) {
        add_site_lint(g, pn, *site);
      } else if (const auto* p = portals.find(portal_id)) {
        g.link(pn, g.add(p->sign.name, LintKind::Leaf));
      }
    }
  }
  return g;
}

EnvironmentMap build_map(const PersonalDomain& domain, const PortalCatalog& portals,
                         const ComplexityLimits& limits) {
  EnvironmentMap map;
  auto add = [&map](MapNode node, std::optional<std::size_t> parent) {
    node.parent = parent;
    node.depth = parent ? map.nodes[*parent].depth + 1 : 0;
    map.nodes.push_back(std::move(node));
    auto idx = map.nodes.size() - 1;
    if (parent) map.nodes[*parent].children.push_back(idx);
    return idx;
  };
  auto root = add(MapNode{domain.id, "domain", domain.owner.sign.name, 0, {}, {}, {}}, std::nullopt);
  std::map<SignId, std::size_t> site_nodes;
  for (const auto* part : domain.visible_partitions()) {
    auto pn = add(MapNode{part->id, "partition", part->name, 0, {}, {}, {}}, root);
    for (const auto& portal_id : part->site_portals) {
      const auto* p = portals.find(portal_id);
      if (!p) continue;
      if (p->target.endpoint.remote) {
        add(MapNode{p->target.target, "site", p->sign.name, 0, {}, {}, p->target.endpoint}, pn);
        continue;
      }
      const auto* site = domain.site(p->target.target);
      if (!site) continue;
      if (auto seen = site_nodes.find(site->id); seen != site_nodes.end()) {
        map.links.emplace_back(pn, seen->second);
        continue;
      }
      auto sn = add(MapNode{site->id, "site", site->name, 0, {}, {}, {}}, pn);
      site_nodes[site->id] = sn;
      for (const auto& w : site->workplaces)
        add(MapNode{w.id, "workplace", w.name, 0, {}, {}, {}}, sn);
    }
  }
  map.annotations = validate_complexity(lint_graph(domain, portals), limits).violations;
  return map;
}

void to_json(Json& j, const PortalTarget& t) {
  j = Json{{"kind", to_string(t.kind)}, {"target", t.target}, {"endpoint", t.endpoint.str()}};
  if (!t.part.empty()) j["part"] = t.part;
}

void from_json(const Json& j, PortalTarget& t) {
  t.kind = target_kind_from(j.at("kind").get<std::string>());
  t.target = j.at("target").get<SignId>();
  auto ep = j.at("endpoint").get<std::string>();
  if (ep == "local") {
    t.endpoint = Endpoint::local();
  } else if (ep.rfind("remote:", 0) == 0) {
    t.endpoint = Endpoint{true, ep.substr(7)};
  } else {
    fail(Errc::Malformed, "endpoint " + ep);
  }
  t.part = j.value("part", std::string{});
}

void to_json(Json& j, const Frame& f) {
  j = Json{{"space", f.space}};
  if (!f.entry_portal.is_nil()) j["entry"] = f.entry_portal;
}

void from_json(const Json& j, Frame& f) {
  f.space = j.at("space").get<PortalTarget>();
  f.entry_portal = j.contains("entry") ? j["entry"].get<SignId>() : SignId{};
}

void to_json(Json& j, const Portal& p) {
  j = Json{{"sign", p.sign},
           {"target", p.target},
           {"interface_agent", p.interface_agent_hint},
           {"data_sites", p.data_site_refs},
           {"parameters", p.parameters},
           {"comm_agent", {{"protocol", p.comm_agent.protocol}, {"address", p.comm_agent.address}}},
           {"context", p.context_id},
           {"spawn_task", p.spawn_task}};
  if (p.software_agent_ref) j["software_agent"] = *p.software_agent_ref;
}

Json to_json(const EnvironmentMap& map) {
  Json nodes = Json::array();
  for (std::size_t i = 0; i < map.nodes.size(); ++i) {
    const auto& n = map.nodes[i];
    Json jn{{"index", i}, {"sign", n.sign}, {"kind", n.kind}, {"name", n.name},
            {"depth", n.depth}, {"children", n.children}};
    if (n.parent) jn["parent"] = *n.parent;
    if (n.endpoint.remote) jn["endpoint"] = n.endpoint.str();
    nodes.push_back(std::move(jn));
  }
  Json links = Json::array();
  for (const auto& [a, b] : map.links) links.push_back({a, b});
  ValidationReport r{map.annotations};
  return Json{{"nodes", nodes}, {"links", links}, {"annotations", to_json(r)["violations"]}};
}

}  // namespace uni
