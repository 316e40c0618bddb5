#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "unispace/core/domain.hpp"
#include "unispace/core/lint.hpp"

namespace uni {

enum class TargetKind {
  Domain,
  Partition,
  Site,
  Workplace,
  StorageSection,
  Container,
  ObjectPart,
  Task,
};

std::string_view to_string(TargetKind k) noexcept;
TargetKind target_kind_from(std::string_view text);  // throws Malformed

/// Where the target lives: this domain's server, or a remote one.
struct Endpoint {
  bool remote = false;
  std::string address;  // "host:port" when remote

  static Endpoint local() { return {}; }
  static Endpoint at(std::string addr) { return {true, std::move(addr)}; }
  std::string str() const { return remote ? "remote:" + address : "local"; }
  bool operator==(const Endpoint&) const = default;
};

struct PortalTarget {
  TargetKind kind = TargetKind::Site;
  SignId target;
  Endpoint endpoint;
  std::string part;  // ObjectPart only

  bool operator==(const PortalTarget&) const = default;
};

/// Communication agent of a portal, reduced to a route descriptor.
struct CommAgent {
  std::string protocol;  // "loopback" or "tcp"
  std::string address;
  bool operator==(const CommAgent&) const = default;
};

struct Portal {
  Sign sign;
  PortalTarget target;
  std::string interface_agent_hint = "render-tree/1";
  std::optional<std::string> software_agent_ref;
  std::vector<SignId> data_site_refs;
  PropertyMap parameters;
  CommAgent comm_agent;
  std::string context_id;
  bool spawn_task = false;

  bool operator==(const Portal&) const = default;
};

/// Everything the system knows about a place when it fills in a portal.
struct TargetInfo {
  TargetKind kind;
  std::string name;
  std::optional<std::string> software_agent;
  std::vector<SignId> data_sites;
};

using TargetLookup = std::function<std::optional<TargetInfo>(const SignId&)>;
using TargetExists = std::function<bool(const PortalTarget&)>;

/// Owns every portal of a domain. Portals are immutable once created;
/// portal-to-portal requests collapse to the original target at creation.
class PortalCatalog {
 public:
  struct Request {
    SignId target;  // a place, a task, or another portal
    std::string name;
    std::set<std::string> tags;
    std::string context;
    PropertyMap parameters;
    bool spawn_task = false;
    std::string part;
  };

  /// Throws NotFound when the target is neither a portal nor known to lookup.
  const Portal& create(const Request& req, const TargetLookup& lookup, IdGenerator& ids);
  /// Inserts an already-formed portal (import, remote site portals).
  const Portal& adopt(Portal portal);
  void erase(const SignId& id) { portals_.erase(id); }

  const Portal* find(const SignId& id) const;
  const Portal& get(const SignId& id) const;  // throws NotFound
  const std::map<SignId, Portal>& all() const noexcept { return portals_; }
  std::vector<const Portal*> find_by_name(std::string_view name) const;

  bool operator==(const PortalCatalog&) const = default;

 private:
  std::map<SignId, Portal> portals_;
};

/// Returns the stored target in one step. Throws PortalDangling when the
/// target no longer exists.
PortalTarget resolve(const Portal& portal, const TargetExists& exists);

struct Frame {
  PortalTarget space;
  SignId entry_portal;  // nil for the root frame
  bool operator==(const Frame&) const = default;
};

/// Navigation stack of one session. Never empty; the bottom frame is the
/// system site's task-management workplace.
class SessionLocation {
 public:
  SessionLocation() = default;
  explicit SessionLocation(PortalTarget root) : frames_{Frame{std::move(root), {}}} {}

  const Frame& current() const { return frames_.back(); }
  const Frame& root() const { return frames_.front(); }
  std::size_t depth() const noexcept { return frames_.size(); }
  const std::vector<Frame>& frames() const noexcept { return frames_; }
  void push(Frame f) { frames_.push_back(std::move(f)); }
  void pop();  // throws AtRoot
  void reset_to_root() { frames_.resize(1); }
  void truncate(std::size_t depth) { if (depth >= 1 && depth < frames_.size()) frames_.resize(depth); }

  bool operator==(const SessionLocation&) const = default;

 private:
  std::vector<Frame> frames_;
};

/// Pushes the portal's target. Access and journaling are the caller's job.
SessionLocation activate(SessionLocation session, const Portal& portal, const TargetExists& exists);
/// Pops the top frame; throws AtRoot at depth 1.
SessionLocation exit(SessionLocation session);

struct MapNode {
  SignId sign;
  std::string kind;  // domain, partition, site, workplace
  std::string name;
  std::uint32_t depth = 0;
  std::optional<std::size_t> parent;
  std::vector<std::size_t> children;
  Endpoint endpoint;
};

/// Hierarchical network of places: containment tree plus cross-links.
struct EnvironmentMap {
  std::vector<MapNode> nodes;  // nodes[0] is the domain root
  std::vector<std::pair<std::size_t, std::size_t>> links;
  std::vector<Violation> annotations;

  std::size_t count(std::string_view kind) const;
};

/// Builds the map of visible partitions, their sites and workplaces, and
/// attaches complexity violations as annotations.
EnvironmentMap build_map(const PersonalDomain& domain, const PortalCatalog& portals,
                         const ComplexityLimits& limits);
/// Lint graph of the domain's structure as the map presents it.
LintGraph lint_graph(const PersonalDomain& domain, const PortalCatalog& portals);
LintGraph lint_graph(const Site& site);

Json to_json(const EnvironmentMap& map);
void to_json(Json& j, const PortalTarget& t);
void from_json(const Json& j, PortalTarget& t);
void to_json(Json& j, const Frame& f);
void from_json(const Json& j, Frame& f);
void to_json(Json& j, const Portal& p);

}  // namespace uni
