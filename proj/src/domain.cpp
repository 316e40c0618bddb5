#include "unispace/core/domain.hpp"

#include <random>

#include "unispace/error.hpp"

namespace uni {
namespace {

Tool make_tool(const ToolSpec& spec, IdGenerator& ids) {
  Tool t;
  t.sign.id = ids.next();
  t.sign.name = std::string(spec.name);
  t.sign.ctype = ConceptualType::Tool;
  t.sign.properties["purpose"] = std::string(spec.purpose);
  t.sign.agent_ref = "system";
  t.command_key = std::string(spec.key);
  t.group = std::string(spec.group);
  return t;
}

Toolbar make_toolbar(std::string name, std::span<const ToolSpec> specs, IdGenerator& ids) {
  Toolbar bar{ids.next(), std::move(name), {}};
  for (const auto& s : specs) bar.tools.push_back(make_tool(s, ids));
  return bar;
}

Workplace make_workplace(std::string name, WorkplaceRole role, IdGenerator& ids) {
  Workplace w;
  w.id = ids.next();
  w.name = std::move(name);
  w.desktop.id = ids.next();
  w.role = role;
  return w;
}

Workplace make_system_workplace(std::string name,
                                std::vector<std::pair<std::string, std::span<const ToolSpec>>> bars,
                                IdGenerator& ids) {
  auto w = make_workplace(std::move(name), WorkplaceRole::Custom, ids);
  for (auto& [bname, specs] : bars) w.toolbars.push_back(make_toolbar(bname, specs, ids));
  return w;
}

}  // namespace

IdGenerator fresh_domain_ids() {
  std::array<std::uint8_t, 32> seed{};
  std::random_device rd;
  for (std::size_t i = 0; i < seed.size(); i += 4) {
    auto v = rd();
    for (std::size_t k = 0; k < 4; ++k) seed[i + k] = static_cast<std::uint8_t>(v >> (8 * k));
  }
  return IdGenerator(DomainId{Uuid::random()}, seed);
}

Workplace make_mandatory_workplace(WorkplaceRole role, IdGenerator& ids) {
  switch (role) {
    case WorkplaceRole::TaskMgmt: {
      auto w = make_workplace("TaskMgmt", role, ids);
      w.toolbars.push_back(make_toolbar("Tasks", task_tools(), ids));
      w.toolbars.push_back(make_toolbar("Object", selection_tools(), ids));
      w.toolbars.push_back(make_toolbar("Desk", desk_tools(), ids));
      return w;
    }
    case WorkplaceRole::DataMgmt: {
      auto w = make_workplace("DataMgmt", role, ids);
      w.toolbars.push_back(make_toolbar("Data", data_tools(), ids));
      w.toolbars.push_back(make_toolbar("Object", selection_tools(), ids));
      return w;
    }
    case WorkplaceRole::Search: {
      auto w = make_workplace("Search", role, ids);
      w.toolbars.push_back(make_toolbar("Search", search_tools(), ids));
      return w;
    }
    case WorkplaceRole::Custom: break;
  }
  fail(Errc::InvalidArgument, "not a mandatory workplace role");
}

PersonalDomain create_domain(const PersonCard& owner, IdGenerator& ids) {
  PersonalDomain d;
  d.id = ids.next();
  d.owner = owner;
  if (d.owner.sign.id.is_nil()) d.owner.sign.id = ids.next();

  Partition home;
  home.id = ids.next();
  home.name = "Home";
  home.mount = {MountKind::Resident, "local"};
  d.partitions.push_back(home);

  Site sys;
  sys.id = ids.next();
  sys.name = "System";
  sys.kind = SiteKind::System;
  sys.partition = home.id;
  sys.template_name = "system";
  sys.purpose = "manage the personal domain";
  sys.storage_ref = ids.next();
  sys.workplaces.push_back(make_mandatory_workplace(WorkplaceRole::TaskMgmt, ids));
  sys.workplaces.push_back(make_mandatory_workplace(WorkplaceRole::DataMgmt, ids));
  sys.workplaces.push_back(make_mandatory_workplace(WorkplaceRole::Search, ids));
  sys.workplaces.push_back(make_system_workplace("Install", {{"Sites", install_tools()}}, ids));
  sys.workplaces.push_back(make_system_workplace("Devices", {{"Devices", device_tools()}}, ids));
  sys.workplaces.push_back(make_system_workplace("Settings", {{"Settings", settings_tools()}}, ids));
  d.system_site = sys.id;
  d.sites.emplace(sys.id, std::move(sys));
  return d;
}

Partition& mount_partition(PersonalDomain& domain, const MountDescriptor& source, IdGenerator& ids) {
  if (source.kind == MountKind::Resident || source.source.empty())
    fail(Errc::InvalidArgument, "mount needs a device label or cloud endpoint");
  for (auto& p : domain.partitions) {
    if (p.mount == source) {
      if (p.mounted) fail(Errc::AlreadyMounted, source.source);
      p.mounted = true;
      return p;
    }
  }
  Partition p;
  p.id = ids.next();
  p.name = source.source;
  p.mount = source;
  domain.partitions.push_back(std::move(p));
  return domain.partitions.back();
}

void unmount_partition(PersonalDomain& domain, const SignId& partition) {
  auto* p = domain.partition(partition);
  if (!p) fail(Errc::NotFound, "partition");
  if (p->mount.kind == MountKind::Resident || !p->mounted) fail(Errc::NotMounted, p->name);
  p->mounted = false;
}

Site& install_site(PersonalDomain& domain, const SignId& partition, const SiteTemplate& tmpl,
                   std::string name, IdGenerator& ids) {
  auto* p = domain.partition(partition);
  if (!p || !p->mounted) fail(Errc::NotFound, "partition");
  if (p->mount.kind == MountKind::CloudRemote)
    fail(Errc::AccessDenied, "cloud partitions are managed by their own server");
  Site s;
  s.id = ids.next();
  s.name = name.empty() ? tmpl.name : std::move(name);
  s.kind = tmpl.kind;
  s.partition = partition;
  s.template_name = tmpl.name;
  s.purpose = tmpl.purpose;
  s.storage_ref = ids.next();
  s.workplaces.push_back(make_mandatory_workplace(WorkplaceRole::TaskMgmt, ids));
  s.workplaces.push_back(make_mandatory_workplace(WorkplaceRole::DataMgmt, ids));
  for (const auto& wt : tmpl.workplaces) {
    auto w = make_workplace(wt.name, WorkplaceRole::Custom, ids);
    w.scheme = wt.scheme;
    for (const auto& bt : wt.toolbars) {
      Toolbar bar{ids.next(), bt.name, {}};
      for (const auto& tt : bt.tools) {
        Tool t;
        t.sign.id = ids.next();
        t.sign.name = tt.name;
        t.sign.ctype = ConceptualType::Tool;
        if (!tt.purpose.empty()) t.sign.properties["purpose"] = tt.purpose;
        if (!tt.agent.empty()) t.sign.agent_ref = tt.agent;
        t.command_key = tt.key;
        t.group = tt.group;
        bar.tools.push_back(std::move(t));
      }
      w.toolbars.push_back(std::move(bar));
    }
    s.workplaces.push_back(std::move(w));
  }
  auto id = s.id;
  return domain.sites.emplace(id, std::move(s)).first->second;
}

std::optional<Sign> find_model_sign(const PersonalDomain& domain, const SignId& id) {
  auto place = [](const SignId& sid, const std::string& name, const std::string& kind,
                  const std::string& purpose) {
    Sign s;
    s.id = sid;
    s.name = name;
    s.ctype = ConceptualType::Portal;
    s.properties["kind"] = kind;
    if (!purpose.empty()) s.properties["purpose"] = purpose;
    return s;
  };
  if (id == domain.id) return place(id, domain.owner.sign.name, "domain", "personal domain");
  if (id == domain.owner.sign.id) return domain.owner.sign;
  for (const auto& p : domain.partitions)
    if (p.id == id) return place(id, p.name, "partition", "group of sites");
  for (const auto& [sid, site] : domain.sites) {
    if (sid == id) return place(id, site.name, "site", site.purpose);
    for (const auto& w : site.workplaces) {
      if (w.id == id) return place(id, w.name, "workplace", "");
      for (const auto& bar : w.toolbars)
        for (const auto& t : bar.tools)
          if (t.sign.id == id) return t.sign;
    }
  }
  return std::nullopt;
}

Description describe(const Sign& sign) {
  Description d;
  auto kind = sign.properties.find("kind");
  d.type = kind != sign.properties.end() ? kind->second : std::string(to_string(sign.ctype));
  d.name = sign.name;
  if (auto it = sign.properties.find("purpose"); it != sign.properties.end()) d.purpose = it->second;
  return d;
}

std::optional<Description> describe_model_sign(const PersonalDomain& domain, const SignId& id) {
  auto sign = find_model_sign(domain, id);
  if (!sign) return std::nullopt;
  return describe(*sign);
}

}  // namespace uni
