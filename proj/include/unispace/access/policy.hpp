#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "unispace/core/ids.hpp"

namespace uni {

enum class PrincipalKind { Owner, LocalAgent, ExternalAgent, RemoteUser };

std::string_view to_string(PrincipalKind k) noexcept;
PrincipalKind principal_kind_from(std::string_view text);

struct Principal {
  PrincipalKind kind = PrincipalKind::Owner;
  SignId site;           // LocalAgent
  DomainId domain;       // ExternalAgent, RemoteUser
  std::string agent;     // ExternalAgent agent id, RemoteUser card key
  std::string id() const;
  bool is_owner() const noexcept { return kind == PrincipalKind::Owner; }

  static Principal owner() { return {}; }
  static Principal local_agent(SignId site) { return {PrincipalKind::LocalAgent, site, {}, {}}; }
  static Principal external(DomainId domain, std::string agent = "system") {
    return {PrincipalKind::ExternalAgent, {}, domain, std::move(agent)};
  }
  static Principal remote_user(DomainId domain, std::string card_key) {
    return {PrincipalKind::RemoteUser, {}, domain, std::move(card_key)};
  }
  bool operator==(const Principal&) const = default;
};

enum Right : unsigned {
  kRead = 1u << 0,
  kWrite = 1u << 1,
  kMove = 1u << 2,
  kDelete = 1u << 3,
  kShare = 1u << 4,
};
using Rights = unsigned;
constexpr Rights kAllRights = kRead | kWrite | kMove | kDelete | kShare;

Rights rights_from(const std::vector<std::string>& names);  // throws InvalidArgument
std::vector<std::string> rights_names(Rights r);
/// Op tokens: read, write, move, delete, share map to one right; "settings"
/// is Owner-only and maps to none.
std::optional<Right> right_for_op(std::string_view op);

struct Scope {
  SignId storage;
  std::optional<SignId> zone;
  bool operator==(const Scope&) const = default;
};

struct Grant {
  SignId id;
  Principal subject;
  Scope scope;
  Rights rights = 0;
  Principal issued_by;
  std::optional<SignId> delegated_from;
  std::optional<std::int64_t> expiry;  // ms; live while now < expiry
  bool operator==(const Grant&) const = default;
};

struct Decision {
  bool allow = false;
  std::string reason;  // OWNER, GRANT, NO_GRANT, OWNER_ONLY
  std::optional<SignId> matched_grant;
};

/// Target of an access check: a storage and the zone path of the item
/// (section first). An empty path means the whole storage.
struct AccessTarget {
  SignId storage;
  std::vector<SignId> zone_path;
};

/// Zone path of a zone inside a storage, used to validate delegated scopes.
using ZonePathFn = std::function<std::vector<SignId>(const SignId& storage, const SignId& zone)>;

/// Deny-by-default grant set of one domain.
class Policy {
 public:
  /// Owner issues anything; a Share holder may re-grant a subset of a live
  /// Share grant's rights within its scope.
  const Grant& grant(const Principal& issuer, const Principal& subject, const Scope& scope,
                     Rights rights, std::optional<std::int64_t> expiry, std::int64_t now,
                     IdGenerator& ids, const ZonePathFn& zone_path = {});
  /// Removes the grant and everything delegated from it.
  std::vector<SignId> revoke(const Principal& issuer, const SignId& grant_id);
  Decision check(const Principal& subject, std::string_view op, const AccessTarget& target,
                 std::int64_t now) const noexcept;

  bool live(const Grant& g, std::int64_t now) const;
  const Grant* find(const SignId& id) const;
  const std::map<SignId, Grant>& grants() const noexcept { return grants_; }
  void insert(Grant g) { grants_[g.id] = std::move(g); }
  void erase(const SignId& id) { grants_.erase(id); }
  std::vector<SignId> closure(const SignId& id) const;
  bool operator==(const Policy&) const = default;

 private:
  static bool covers(const Scope& scope, const AccessTarget& target);
  std::map<SignId, Grant> grants_;
};

void to_json(Json& j, const Principal& p);
void from_json(const Json& j, Principal& p);
void to_json(Json& j, const Scope& s);
void from_json(const Json& j, Scope& s);
void to_json(Json& j, const Grant& g);
void from_json(const Json& j, Grant& g);
void to_json(Json& j, const Decision& d);
Json to_json(const Policy& p);
Policy policy_from_json(const Json& j);

}  // namespace uni
