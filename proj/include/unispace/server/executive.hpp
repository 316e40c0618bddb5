#pragma once

#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "unispace/access/policy.hpp"
#include "unispace/portal/record.hpp"
#include "unispace/storage/storage.hpp"
#include "unispace/task/task.hpp"
#include "unispace/wire/render.hpp"

namespace uni {

struct SessionState {
  std::string token;
  Principal principal;
  SessionLocation location;
  std::vector<SignId> selection;
  Json results = Json::array();  // last search hits
  std::string agent;
  bool operator==(const SessionState&) const = default;
};

struct FederationLink {
  std::string address;
  DomainId peer;
  PersonCard local_card;
  PersonCard remote_card;
  bool connected = true;
  bool operator==(const FederationLink&) const = default;
};

struct Command {
  std::string tool;
  Json target;  // null, id or name text, or a record object
  Json params = Json::object();
};

struct Outcome {
  Json result = Json::object();
  bool mutating = false;
  std::optional<Json> event;  // reply is an event message instead of a render
};

/// A command that has to be carried out by a peer server.
struct RemoteCall {
  DomainId peer;
  std::string address;
  Command command;
  std::optional<SignId> via_portal;  // set when entering a remote place
};

struct ExecutiveConfig {
  ComplexityLimits limits;
  std::uint32_t max_container_depth = 5;
  bool strict_lint = false;
  std::string host_address;  // advertised in exported portal records
  bool accept_peers = true;
  bool operator==(const ExecutiveConfig&) const = default;
};

/// All business state of one personal domain and the interpreter of tool
/// commands against it. A value type: I/O and networking live in the host.
class Executive {
 public:
  Executive() = default;
  static Executive create(const PersonCard& owner, IdGenerator ids, ExecutiveConfig config);

  // Sessions
  std::string open_session(const Principal& principal, const std::string& agent, std::int64_t at);
  void close_session(const std::string& token);
  const SessionState* session(const std::string& token) const;
  const std::map<std::string, SessionState>& sessions() const noexcept { return sessions_; }

  /// Runs a tool. Throws Error; on success `mutating` says whether the
  /// command changed durable state and must be logged.
  Outcome dispatch(const std::string& token, const Command& cmd, std::int64_t at);
  /// Non-null when the command must be forwarded to a federated peer.
  std::optional<RemoteCall> remote_for(const std::string& token, const Command& cmd) const;
  /// Applies a pre-resolved effect (federation, cloud mounts, remote entry).
  Json apply_effect(const Json& effect, std::int64_t at);

  RenderTree render(const std::string& token) const;
  static bool read_only(const std::string& tool);

  // Queries
  const PersonalDomain& domain() const noexcept { return domain_; }
  DomainId domain_id() const noexcept { return ids_.domain(); }
  const PortalCatalog& portals() const noexcept { return portals_; }
  const TaskEngine& tasks() const noexcept { return tasks_; }
  const std::map<SignId, Storage>& storages() const noexcept { return storages_; }
  const Policy& policy() const noexcept { return policy_; }
  const std::map<std::string, FederationLink>& links() const noexcept { return links_; }
  const FederationLink* link_for(const DomainId& peer) const;
  const ExecutiveConfig& config() const noexcept { return config_; }
  void set_host_address(std::string addr) { config_.host_address = std::move(addr); }
  /// Replaces the semantic settings; the advertised address is kept.
  void set_config(ExecutiveConfig c) {
    c.host_address = config_.host_address;
    config_ = std::move(c);
  }
  IdGenerator& ids() noexcept { return ids_; }
  const IdGenerator& ids() const noexcept { return ids_; }
  SigningKey signing_key() const;
  std::set<std::string> trusted_keys() const;
  bool has_edit_leases() const;
  /// Sites and records a principal may see from outside.
  Json peer_sites(const Principal& principal, std::int64_t now) const;
  /// Every portal whose target is local, with its resolution status.
  Json portal_status() const;
  Json state_json() const;

  bool operator==(const Executive&) const = default;

 private:
  friend class Dispatcher;
  SessionState& session_mut(const std::string& token);
  PortalTarget root_target() const;
  std::optional<SignId> site_of(const PortalTarget& t) const;
  std::optional<SignId> storage_holding(const SignId& item) const;
  bool exists(const PortalTarget& t) const;
  std::optional<TargetInfo> lookup(const SignId& id) const;
  Storage& storage_mut(const SignId& id, const Decision& decision);
  void push_history(const SignId& portal);
  void evict_sessions();

  ExecutiveConfig config_;
  IdGenerator ids_;
  PersonalDomain domain_;
  PortalCatalog portals_;
  TaskEngine tasks_;
  std::map<SignId, Storage> storages_;
  Policy policy_;
  std::map<std::string, SessionState> sessions_;
  std::deque<std::string> session_order_;
  std::map<std::string, FederationLink> links_;  // keyed by peer domain hex
};

void to_json(Json& j, const FederationLink& l);
void from_json(const Json& j, FederationLink& l);

}  // namespace uni
