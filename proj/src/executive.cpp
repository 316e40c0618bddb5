#include "unispace/server/executive.hpp"

#include <algorithm>
#include <cctype>

#include "unispace/core/domain.hpp"
#include "unispace/error.hpp"

namespace uni {

namespace {

constexpr std::size_t kMaxSessions = 256;
constexpr std::size_t kHistoryCap = 50;

}  // namespace

void to_json(Json& j, const FederationLink& l) {
  j = Json{{"address", l.address},
           {"peer", l.peer.str()},
           {"local_card", l.local_card},
           {"remote_card", l.remote_card},
           {"connected", l.connected}};
}

void from_json(const Json& j, FederationLink& l) {
  l.address = j.at("address").get<std::string>();
  l.peer = DomainId{Uuid::parse(j.at("peer").get<std::string>())};
  l.local_card = j.at("local_card").get<PersonCard>();
  l.remote_card = j.at("remote_card").get<PersonCard>();
  l.connected = j.value("connected", true);
}

Executive Executive::create(const PersonCard& owner, IdGenerator ids, ExecutiveConfig config) {
  Executive e;
  e.config_ = config;
  e.ids_ = ids;
  auto card = owner;
  if (card.public_key.empty()) card.public_key = SigningKey::from_seed(ids.seed()).public_hex();
  e.domain_ = create_domain(card, e.ids_);
  const auto& sys = e.domain_.sites.at(e.domain_.system_site);
  Storage st(sys.storage_ref, sys.id, StorageConfig{config.max_container_depth});
  e.storages_.emplace(sys.storage_ref, std::move(st));
  auto& home = e.domain_.partitions.front();
  PortalCatalog::Request req;
  req.target = sys.id;
  req.name = sys.name;
  const auto& portal = e.portals_.create(
      req, [&e](const SignId& id) { return e.lookup(id); }, e.ids_);
  home.site_portals.push_back(portal.sign.id);
  return e;
}

SigningKey Executive::signing_key() const { return SigningKey::from_seed(ids_.seed()); }

std::set<std::string> Executive::trusted_keys() const {
  std::set<std::string> keys{signing_key().public_hex()};
  for (const auto& [k, l] : links_)
    if (!l.remote_card.public_key.empty()) keys.insert(l.remote_card.public_key);
  return keys;
}

const FederationLink* Executive::link_for(const DomainId& peer) const {
  auto it = links_.find(peer.str());
  return it == links_.end() ? nullptr : &it->second;
}

bool Executive::has_edit_leases() const {
  return std::any_of(storages_.begin(), storages_.end(),
                     [](const auto& kv) { return kv.second.has_edit_leases(); });
}

PortalTarget Executive::root_target() const {
  const auto& sys = domain_.sites.at(domain_.system_site);
  for (const auto& w : sys.workplaces)
    if (w.role == WorkplaceRole::TaskMgmt) return PortalTarget{TargetKind::Workplace, w.id, {}, {}};
  return PortalTarget{TargetKind::Site, sys.id, {}, {}};
}

std::string Executive::open_session(const Principal& principal, const std::string& agent, std::int64_t) {
  SessionState s;
  s.token = ids_.next_token();
  s.principal = principal;
  s.agent = agent;
  s.location = SessionLocation(root_target());
  if (principal.is_owner()) {
    if (auto f = tasks_.focus()) {
      const auto& t = tasks_.get(*f);
      bool ok = !t.space.empty() && t.space.front().space == root_target() &&
                std::all_of(t.space.begin(), t.space.end(), [&](const Frame& fr) { return exists(fr.space); });
      if (ok) {
        s.location = SessionLocation(root_target());
        for (std::size_t i = 1; i < t.space.size(); ++i) s.location.push(t.space[i]);
      }
    }
  }
  auto token = s.token;
  sessions_[token] = std::move(s);
  session_order_.push_back(token);
  evict_sessions();
  return token;
}

void Executive::evict_sessions() {
  while (session_order_.size() > kMaxSessions) {
    sessions_.erase(session_order_.front());
    session_order_.pop_front();
  }
}

void Executive::close_session(const std::string& token) {
  sessions_.erase(token);
  session_order_.erase(std::remove(session_order_.begin(), session_order_.end(), token),
                       session_order_.end());
}

const SessionState* Executive::session(const std::string& token) const {
  auto it = sessions_.find(token);
  return it == sessions_.end() ? nullptr : &it->second;
}

SessionState& Executive::session_mut(const std::string& token) {
  auto it = sessions_.find(token);
  if (it == sessions_.end()) fail(Errc::AuthFailed, "unknown session");
  return it->second;
}

std::optional<SignId> Executive::storage_holding(const SignId& item) const {
  for (const auto& [id, st] : storages_)
    if (id == item || st.contains(item)) return id;
  return std::nullopt;
}

std::optional<SignId> Executive::site_of(const PortalTarget& t) const {
  if (t.endpoint.remote) return std::nullopt;
  switch (t.kind) {
    case TargetKind::Domain:
    case TargetKind::Partition:
    case TargetKind::Task:
      return domain_.system_site;
    case TargetKind::Site:
      if (domain_.sites.count(t.target)) return t.target;
      return std::nullopt;
    case TargetKind::Workplace:
      for (const auto& [sid, s] : domain_.sites)
        if (s.workplace(t.target)) return sid;
      return std::nullopt;
    case TargetKind::StorageSection:
    case TargetKind::Container:
    case TargetKind::ObjectPart:
      if (auto st = storage_holding(t.target)) return storages_.at(*st).owner_site();
      return std::nullopt;
  }
  return std::nullopt;
}

bool Executive::exists(const PortalTarget& t) const {
  if (t.endpoint.remote) return true;
  switch (t.kind) {
    case TargetKind::Domain: return t.target == domain_.id;
    case TargetKind::Partition: return domain_.partition(t.target) != nullptr;
    case TargetKind::Site: return domain_.sites.count(t.target) > 0;
    case TargetKind::Workplace: return site_of(t).has_value();
    case TargetKind::Task: return tasks_.find(t.target) != nullptr;
    case TargetKind::StorageSection:
    case TargetKind::Container: {
      auto st = storage_holding(t.target);
      if (!st) return false;
      const auto& s = storages_.at(*st);
      return s.zone(t.target) && !s.zone_path(t.target).empty();
    }
    case TargetKind::ObjectPart: {
      auto st = storage_holding(t.target);
      if (!st) return false;
      const auto& s = storages_.at(*st);
      const auto* o = s.object(t.target);
      if (!o || s.zone_path(t.target).empty()) return false;
      return t.part.empty() || o->part(t.part) != nullptr;
    }
  }
  return false;
}

std::optional<TargetInfo> Executive::lookup(const SignId& id) const {
  if (id == domain_.id) return TargetInfo{TargetKind::Domain, domain_.owner.sign.name, {}, {}};
  if (const auto* p = domain_.partition(id)) return TargetInfo{TargetKind::Partition, p->name, {}, {}};
  for (const auto& [sid, s] : domain_.sites) {
    if (sid == id) return TargetInfo{TargetKind::Site, s.name, s.template_name, {s.storage_ref}};
    if (const auto* w = s.workplace(id)) return TargetInfo{TargetKind::Workplace, w->name, s.template_name, {s.storage_ref}};
  }
  if (const auto* t = tasks_.find(id)) return TargetInfo{TargetKind::Task, t->name, {}, {}};
  if (auto st = storage_holding(id)) {
    const auto& s = storages_.at(*st);
    if (const auto* z = s.zone(id)) {
      if (s.zone_path(id).empty()) return std::nullopt;
      return TargetInfo{z->kind == ZoneKind::Section ? TargetKind::StorageSection : TargetKind::Container,
                        z->name, {}, {*st}};
    }
    if (const auto* o = s.object(id)) {
      if (s.zone_path(id).empty()) return std::nullopt;
      return TargetInfo{TargetKind::ObjectPart, o->sign.name, {}, {*st}};
    }
  }
  return std::nullopt;
}

Storage& Executive::storage_mut(const SignId& id, const Decision& decision) {
  if (!decision.allow) fail(Errc::AccessDenied, "storage mutation without an allow decision");
  auto it = storages_.find(id);
  if (it == storages_.end()) fail(Errc::NotFound, "storage " + id.str());
  return it->second;
}

void Executive::push_history(const SignId& portal) {
  auto& sys = storages_.at(domain_.sites.at(domain_.system_site).storage_ref);
  Json hist = Json::array();
  if (auto it = sys.settings().find("history"); it != sys.settings().end()) hist = Json::parse(it->second);
  Json next = Json::array({portal.str()});
  for (const auto& h : hist)
    if (h.get<std::string>() != portal.str() && next.size() < kHistoryCap) next.push_back(h);
  sys.set_meta("history", next.dump());
}

Json Executive::peer_sites(const Principal& principal, std::int64_t now) const {
  Json out = Json::array();
  auto key = signing_key();
  for (const auto& part : domain_.partitions) {
    if (part.mount.kind == MountKind::CloudRemote) continue;
    for (const auto& pid : part.site_portals) {
      const auto* portal = portals_.find(pid);
      if (!portal) continue;
      const auto* site = domain_.site(portal->target.target);
      if (!site || site->kind == SiteKind::System) continue;
      if (!policy_.check(principal, "read", AccessTarget{site->storage_ref, {}}, now).allow) {
        bool any = std::any_of(policy_.grants().begin(), policy_.grants().end(), [&](const auto& kv) {
          return kv.second.subject == principal && kv.second.scope.storage == site->storage_ref &&
                 policy_.live(kv.second, now);
        });
        if (!any && !principal.is_owner()) continue;
      }
      out.push_back(Json{{"site", site->id},
                         {"name", site->name},
                         {"storage", site->storage_ref},
                         {"record", export_portal(*portal, config_.host_address, key)}});
    }
  }
  return out;
}

Json Executive::portal_status() const {
  Json out = Json::array();
  for (const auto& [id, p] : portals_.all()) {
    if (p.target.endpoint.remote) continue;
    out.push_back(Json{{"portal", id}, {"name", p.sign.name}, {"kind", to_string(p.target.kind)},
                       {"resolves", exists(p.target)}});
  }
  return out;
}

Json Executive::state_json() const {
  Json storages = Json::object();
  for (const auto& [id, s] : storages_) storages[id.str()] = s.state_json();
  Json portals = Json::array();
  for (const auto& [id, p] : portals_.all()) portals.push_back(p);
  Json tasks = Json::array();
  for (const auto& [id, t] : tasks_.tasks()) tasks.push_back(t);
  Json journal = Json::array();
  for (const auto& e : tasks_.journal().entries()) journal.push_back(e);
  Json sessions = Json::object();
  for (const auto& [tok, s] : sessions_)
    sessions[tok] = Json{{"principal", s.principal}, {"frames", s.location.frames()},
                         {"selection", s.selection}, {"results", s.results}};
  Json links = Json::object();
  for (const auto& [k, l] : links_) links[k] = l;
  return Json{{"domain", domain_},
              {"portals", portals},
              {"tasks", tasks},
              {"focus", tasks_.focus() ? Json(*tasks_.focus()) : Json(nullptr)},
              {"journal", journal},
              {"storages", storages},
              {"policy", to_json(policy_)},
              {"sessions", sessions},
              {"links", links},
              {"ids", ids_.counter()}};
}

}  // namespace uni
