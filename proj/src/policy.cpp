#include "unispace/access/policy.hpp"

#include <algorithm>
#include <cctype>

#include "unispace/error.hpp"

namespace uni {

std::string_view to_string(PrincipalKind k) noexcept {
  switch (k) {
    case PrincipalKind::Owner: return "Owner";
    case PrincipalKind::LocalAgent: return "LocalAgent";
    case PrincipalKind::ExternalAgent: return "ExternalAgent";
    case PrincipalKind::RemoteUser: return "RemoteUser";
  }
  return "Owner";
}

PrincipalKind principal_kind_from(std::string_view text) {
  if (text == "Owner") return PrincipalKind::Owner;
  if (text == "LocalAgent") return PrincipalKind::LocalAgent;
  if (text == "ExternalAgent") return PrincipalKind::ExternalAgent;
  if (text == "RemoteUser") return PrincipalKind::RemoteUser;
  fail(Errc::InvalidArgument, "principal kind " + std::string(text));
}

std::string Principal::id() const {
  switch (kind) {
    case PrincipalKind::Owner: return "owner";
    case PrincipalKind::LocalAgent: return "local:" + site.str();
    case PrincipalKind::ExternalAgent: return "external:" + domain.str() + "/" + agent;
    case PrincipalKind::RemoteUser: return "user:" + domain.str() + "/" + agent;
  }
  return "owner";
}

namespace {
constexpr std::pair<Right, std::string_view> kRightNames[] = {
    {kRead, "Read"}, {kWrite, "Write"}, {kMove, "Move"}, {kDelete, "Delete"}, {kShare, "Share"}};
}

Rights rights_from(const std::vector<std::string>& names) {
  Rights r = 0;
  for (const auto& n : names) {
    auto it = std::find_if(std::begin(kRightNames), std::end(kRightNames), [&](const auto& p) {
      if (p.second.size() != n.size()) return false;
      return std::equal(n.begin(), n.end(), p.second.begin(),
                        [](char a, char b) { return std::tolower(a) == std::tolower(b); });
    });
    if (it == std::end(kRightNames)) fail(Errc::InvalidArgument, "right " + n);
    r |= it->first;
  }
  return r;
}

std::vector<std::string> rights_names(Rights r) {
  std::vector<std::string> out;
  for (const auto& [bit, name] : kRightNames)
    if (r & bit) out.emplace_back(name);
  return out;
}

std::optional<Right> right_for_op(std::string_view op) {
  if (op == "read") return kRead;
  if (op == "write") return kWrite;
  if (op == "move") return kMove;
  if (op == "delete") return kDelete;
  if (op == "share") return kShare;
  return std::nullopt;
}

bool Policy::covers(const Scope& scope, const AccessTarget& target) {
  if (scope.storage != target.storage) return false;
  if (!scope.zone) return true;
  return std::find(target.zone_path.begin(), target.zone_path.end(), *scope.zone) !=
         target.zone_path.end();
}

const Grant* Policy::find(const SignId& id) const {
  auto it = grants_.find(id);
  return it == grants_.end() ? nullptr : &it->second;
}

bool Policy::live(const Grant& g, std::int64_t now) const {
  const Grant* cur = &g;
  for (int hops = 0; cur && hops < 64; ++hops) {
    if (cur->expiry && now >= *cur->expiry) return false;
    if (!cur->delegated_from) return true;
    cur = find(*cur->delegated_from);
  }
  return false;
}

const Grant& Policy::grant(const Principal& issuer, const Principal& subject, const Scope& scope,
                           Rights rights, std::optional<std::int64_t> expiry, std::int64_t now,
                           IdGenerator& ids, const ZonePathFn& zone_path) {
  if (rights == 0 || (rights & ~kAllRights)) fail(Errc::InvalidArgument, "rights");
  if (subject.is_owner()) fail(Errc::InvalidArgument, "the owner needs no grant");
  Grant g;
  g.subject = subject;
  g.scope = scope;
  g.rights = rights;
  g.issued_by = issuer;
  g.expiry = expiry;
  if (!issuer.is_owner()) {
    std::vector<SignId> path;
    if (scope.zone && zone_path) path = zone_path(scope.storage, *scope.zone);
    if (scope.zone && path.empty()) path = {*scope.zone};
    const Grant* holder = nullptr;
    bool any_share = false;
    for (const auto& [id, h] : grants_) {
      if (h.subject != issuer || !(h.rights & kShare) || !live(h, now)) continue;
      any_share = true;
      bool in_scope = h.scope.storage == scope.storage &&
                      (!h.scope.zone || (scope.zone && std::find(path.begin(), path.end(),
                                                                 *h.scope.zone) != path.end()));
      bool subset = (rights & ~h.rights) == 0;
      bool expiry_ok = !h.expiry || (expiry && *expiry <= *h.expiry);
      if (in_scope && subset && expiry_ok) {
        holder = &h;
        break;
      }
    }
    if (!any_share) fail(Errc::NotOwner, issuer.id());
    if (!holder) fail(Errc::ScopeEscalation, issuer.id());
    g.delegated_from = holder->id;
  }
  g.id = ids.next();
  auto id = g.id;
  grants_[id] = std::move(g);
  return grants_.at(id);
}

std::vector<SignId> Policy::closure(const SignId& id) const {
  std::vector<SignId> out{id};
  for (std::size_t i = 0; i < out.size(); ++i)
    for (const auto& [gid, g] : grants_)
      if (g.delegated_from == out[i]) out.push_back(gid);
  return out;
}

std::vector<SignId> Policy::revoke(const Principal& issuer, const SignId& grant_id) {
  const auto* g = find(grant_id);
  if (!g) fail(Errc::NotFound, "grant " + grant_id.str());
  if (!issuer.is_owner() && g->issued_by != issuer) fail(Errc::NotOwner, issuer.id());
  auto removed = closure(grant_id);
  for (const auto& id : removed) grants_.erase(id);
  return removed;
}

Decision Policy::check(const Principal& subject, std::string_view op, const AccessTarget& target,
                       std::int64_t now) const noexcept {
  if (subject.is_owner()) return {true, "OWNER", std::nullopt};
  auto right = right_for_op(op);
  if (!right) return {false, "OWNER_ONLY", std::nullopt};
  for (const auto& [id, g] : grants_) {
    if (g.subject != subject || !(g.rights & *right)) continue;
    if (!covers(g.scope, target)) continue;
    if (!live(g, now)) continue;
    return {true, "GRANT", id};
  }
  return {false, "NO_GRANT", std::nullopt};
}

void to_json(Json& j, const Principal& p) {
  j = Json{{"kind", to_string(p.kind)}};
  if (p.kind == PrincipalKind::LocalAgent) j["site"] = p.site;
  if (p.kind == PrincipalKind::ExternalAgent || p.kind == PrincipalKind::RemoteUser) {
    j["domain"] = p.domain.str();
    j["agent"] = p.agent;
  }
}

void from_json(const Json& j, Principal& p) {
  p = Principal{};
  p.kind = principal_kind_from(j.at("kind").get<std::string>());
  if (p.kind == PrincipalKind::LocalAgent) p.site = j.at("site").get<SignId>();
  if (p.kind == PrincipalKind::ExternalAgent || p.kind == PrincipalKind::RemoteUser) {
    p.domain = DomainId{Uuid::parse(j.at("domain").get<std::string>())};
    p.agent = j.value("agent", std::string("system"));
  }
}

void to_json(Json& j, const Scope& s) {
  j = Json{{"storage", s.storage}};
  if (s.zone) j["zone"] = *s.zone;
}

void from_json(const Json& j, Scope& s) {
  s.storage = j.at("storage").get<SignId>();
  s.zone.reset();
  if (j.contains("zone") && !j["zone"].is_null()) s.zone = j["zone"].get<SignId>();
}

void to_json(Json& j, const Grant& g) {
  j = Json{{"id", g.id},
           {"subject", g.subject},
           {"scope", g.scope},
           {"rights", rights_names(g.rights)},
           {"issued_by", g.issued_by}};
  if (g.delegated_from) j["delegated_from"] = *g.delegated_from;
  if (g.expiry) j["expiry"] = *g.expiry;
}

void from_json(const Json& j, Grant& g) {
  g.id = j.at("id").get<SignId>();
  g.subject = j.at("subject").get<Principal>();
  g.scope = j.at("scope").get<Scope>();
  g.rights = rights_from(j.at("rights").get<std::vector<std::string>>());
  g.issued_by = j.at("issued_by").get<Principal>();
  g.delegated_from.reset();
  g.expiry.reset();
  if (j.contains("delegated_from")) g.delegated_from = j["delegated_from"].get<SignId>();
  if (j.contains("expiry")) g.expiry = j["expiry"].get<std::int64_t>();
}

void to_json(Json& j, const Decision& d) {
  j = Json{{"allow", d.allow}, {"reason", d.reason}};
  if (d.matched_grant) j["matched_grant"] = *d.matched_grant;
}

Json to_json(const Policy& p) {
  Json grants = Json::array();
  for (const auto& [id, g] : p.grants()) grants.push_back(g);
  return Json{{"grants", grants}};
}

Policy policy_from_json(const Json& j) {
  Policy p;
  for (const auto& g : j.at("grants")) p.insert(g.get<Grant>());
  return p;
}

}  // namespace uni
