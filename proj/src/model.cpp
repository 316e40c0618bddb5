#include "unispace/core/model.hpp"

#include <algorithm>

#include "unispace/error.hpp"

namespace uni {

std::string_view to_string(ConceptualType t) noexcept {
  switch (t) {
    case ConceptualType::Person: return "Person";
    case ConceptualType::Tool: return "Tool";
    case ConceptualType::DataObject: return "DataObject";
    case ConceptualType::Portal: return "Portal";
  }
  return "DataObject";
}

ConceptualType conceptual_type_from(std::string_view text) {
  if (text == "Person") return ConceptualType::Person;
  if (text == "Tool") return ConceptualType::Tool;
  if (text == "DataObject") return ConceptualType::DataObject;
  if (text == "Portal") return ConceptualType::Portal;
  fail(Errc::Malformed, "conceptual type " + std::string(text));
}

std::string_view to_string(SiteKind k) noexcept {
  switch (k) {
    case SiteKind::System: return "System";
    case SiteKind::DataSite: return "DataSite";
    case SiteKind::ApplicationSite: return "ApplicationSite";
  }
  return "ApplicationSite";
}

SiteKind site_kind_from(std::string_view text) {
  if (text == "System") return SiteKind::System;
  if (text == "DataSite") return SiteKind::DataSite;
  if (text == "ApplicationSite") return SiteKind::ApplicationSite;
  fail(Errc::Malformed, "site kind " + std::string(text));
}

std::string_view to_string(Scheme s) noexcept {
  switch (s) {
    case Scheme::Technological: return "Technological";
    case Scheme::GenusSpecies: return "GenusSpecies";
    case Scheme::Mixed: return "Mixed";
  }
  return "Technological";
}

Scheme scheme_from(std::string_view text) {
  if (text == "Technological") return Scheme::Technological;
  if (text == "GenusSpecies") return Scheme::GenusSpecies;
  if (text == "Mixed") return Scheme::Mixed;
  fail(Errc::Malformed, "scheme " + std::string(text));
}

std::string_view to_string(MountKind k) noexcept {
  switch (k) {
    case MountKind::Resident: return "Resident";
    case MountKind::MountedDevice: return "MountedDevice";
    case MountKind::CloudRemote: return "CloudRemote";
  }
  return "Resident";
}

bool PersonCard::well_formed() const {
  if (sign.ctype != ConceptualType::Person || sign.name.empty()) return false;
  return std::all_of(contact_endpoints.begin(), contact_endpoints.end(),
                     [](const ContactEndpoint& e) { return !e.protocol.empty(); });
}

PersonCard PersonCard::revised(std::vector<ContactEndpoint> endpoints) const {
  PersonCard next = *this;
  next.contact_endpoints = std::move(endpoints);
  ++next.version;
  return next;
}

PersonCard make_person_card(std::string name, std::vector<ContactEndpoint> endpoints) {
  PersonCard card;
  card.sign.name = std::move(name);
  card.sign.ctype = ConceptualType::Person;
  card.contact_endpoints = std::move(endpoints);
  return card;
}

const Tool* Workplace::find_tool(std::string_view key) const {
  for (const auto& bar : toolbars)
    for (const auto& t : bar.tools)
      if (t.command_key == key) return &t;
  return nullptr;
}

const Workplace* Site::workplace(std::string_view wname) const {
  for (const auto& w : workplaces)
    if (w.name == wname) return &w;
  return nullptr;
}

const Workplace* Site::workplace(const SignId& wid) const {
  for (const auto& w : workplaces)
    if (w.id == wid) return &w;
  return nullptr;
}

Workplace* Site::workplace(const SignId& wid) {
  for (auto& w : workplaces)
    if (w.id == wid) return &w;
  return nullptr;
}

const Partition* PersonalDomain::partition(const SignId& pid) const {
  for (const auto& p : partitions)
    if (p.id == pid) return &p;
  return nullptr;
}

Partition* PersonalDomain::partition(const SignId& pid) {
  for (auto& p : partitions)
    if (p.id == pid) return &p;
  return nullptr;
}

const Site* PersonalDomain::site(const SignId& sid) const {
  auto it = sites.find(sid);
  return it == sites.end() ? nullptr : &it->second;
}

Site* PersonalDomain::site(const SignId& sid) {
  auto it = sites.find(sid);
  return it == sites.end() ? nullptr : &it->second;
}

std::vector<const Partition*> PersonalDomain::visible_partitions() const {
  std::vector<const Partition*> out;
  for (const auto& p : partitions)
    if (p.mounted) out.push_back(&p);
  return out;
}

void to_json(Json& j, const Sign& s) {
  j = Json{{"id", s.id},
           {"name", s.name},
           {"ctype", to_string(s.ctype)},
           {"properties", s.properties},
           {"tags", s.tags}};
  if (s.structure_ref) j["structure_ref"] = *s.structure_ref;
  if (s.agent_ref) j["agent_ref"] = *s.agent_ref;
}

void from_json(const Json& j, Sign& s) {
  s.id = j.at("id").get<SignId>();
  s.name = j.at("name").get<std::string>();
  s.ctype = conceptual_type_from(j.at("ctype").get<std::string>());
  s.properties = j.value("properties", PropertyMap{});
  s.tags = j.value("tags", std::set<std::string>{});
  s.structure_ref.reset();
  s.agent_ref.reset();
  if (j.contains("structure_ref")) s.structure_ref = j["structure_ref"].get<SignId>();
  if (j.contains("agent_ref")) s.agent_ref = j["agent_ref"].get<std::string>();
}

void to_json(Json& j, const PersonCard& c) {
  Json eps = Json::array();
  for (const auto& e : c.contact_endpoints)
    eps.push_back({{"protocol", e.protocol}, {"address", e.address}});
  j = Json{{"sign", c.sign}, {"endpoints", eps}, {"version", c.version},
           {"public_key", c.public_key}};
}

void from_json(const Json& j, PersonCard& c) {
  c.sign = j.at("sign").get<Sign>();
  c.contact_endpoints.clear();
  for (const auto& e : j.value("endpoints", Json::array()))
    c.contact_endpoints.push_back({e.at("protocol").get<std::string>(),
                                   e.at("address").get<std::string>()});
  c.version = j.value("version", 1u);
  c.public_key = j.value("public_key", std::string{});
}

void to_json(Json& j, const ComplexityLimits& l) {
  j = Json{{"mental_elements", l.mental_elements},
           {"perceptual_elements", l.perceptual_elements},
           {"mental_depth", l.mental_depth},
           {"perceptual_depth", l.perceptual_depth}};
}

void from_json(const Json& j, ComplexityLimits& l) {
  l.mental_elements = j.value("mental_elements", 7u);
  l.perceptual_elements = j.value("perceptual_elements", 20u);
  l.mental_depth = j.value("mental_depth", 3u);
  l.perceptual_depth = j.value("perceptual_depth", 7u);
  if (!l.valid()) fail(Errc::InvalidArgument, "complexity limits must be >= 1");
}

void to_json(Json& j, const MountDescriptor& m) {
  j = Json{{"kind", to_string(m.kind)}, {"source", m.source}};
}

void to_json(Json& j, const Partition& p) {
  j = Json{{"id", p.id},
           {"name", p.name},
           {"mount", p.mount},
           {"site_portals", p.site_portals},
           {"mounted", p.mounted}};
}

void to_json(Json& j, const Tool& t) {
  j = Json{{"sign", t.sign}, {"command_key", t.command_key}, {"group", t.group}};
}

void to_json(Json& j, const Toolbar& t) {
  j = Json{{"id", t.id}, {"name", t.name}, {"tools", t.tools}};
}

void to_json(Json& j, const Bounds& b) { j = Json::array({b.x, b.y, b.w, b.h}); }

void to_json(Json& j, const Workplace& w) {
  Json layout = Json::array();
  for (const auto& [id, b] : w.desktop.layout) layout.push_back({{"sign", id}, {"bounds", b}});
  j = Json{{"id", w.id},
           {"name", w.name},
           {"scheme", to_string(w.scheme)},
           {"desktop", {{"id", w.desktop.id},
                        {"open_handles", w.desktop.open_handles},
                        {"layout", layout}}},
           {"toolbars", w.toolbars}};
}

void to_json(Json& j, const Site& s) {
  j = Json{{"id", s.id},
           {"name", s.name},
           {"kind", to_string(s.kind)},
           {"storage", s.storage_ref},
           {"partition", s.partition},
           {"template", s.template_name},
           {"purpose", s.purpose},
           {"workplaces", s.workplaces}};
}

void to_json(Json& j, const PersonalDomain& d) {
  Json sites = Json::array();
  for (const auto& [id, s] : d.sites) sites.push_back(s);
  j = Json{{"id", d.id},
           {"owner", d.owner},
           {"partitions", d.partitions},
           {"system_site", d.system_site},
           {"journal_ref", d.journal_ref},
           {"policy_ref", d.policy_ref},
           {"sites", sites}};
}

}  // namespace uni
