#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "unispace/core/ids.hpp"

namespace uni {

enum class ConceptualType { Person, Tool, DataObject, Portal };

std::string_view to_string(ConceptualType t) noexcept;
ConceptualType conceptual_type_from(std::string_view text);

using PropertyMap = std::map<std::string, std::string>;

/// Universal addressable entity. The id is hidden from the user except
/// through the Properties tool; the name may repeat.
struct Sign {
  SignId id;
  std::string name;
  ConceptualType ctype = ConceptualType::DataObject;
  PropertyMap properties;
  std::optional<SignId> structure_ref;
  std::optional<std::string> agent_ref;
  std::set<std::string> tags;

  bool operator==(const Sign&) const = default;
};

struct ContactEndpoint {
  std::string protocol;
  std::string address;
  bool operator==(const ContactEndpoint&) const = default;
};

/// Calling card of a person. Cards are frozen once exchanged; an update is
/// a new card with a higher version.
struct PersonCard {
  Sign sign;
  std::vector<ContactEndpoint> contact_endpoints;
  std::uint32_t version = 1;
  /// Ed25519 public key of the owner's domain (lowercase hex), empty if none.
  std::string public_key;

  bool well_formed() const;
  PersonCard revised(std::vector<ContactEndpoint> endpoints) const;
  bool operator==(const PersonCard&) const = default;
};

PersonCard make_person_card(std::string name, std::vector<ContactEndpoint> endpoints = {});

struct ComplexityLimits {
  std::uint32_t mental_elements = 7;
  std::uint32_t perceptual_elements = 20;
  std::uint32_t mental_depth = 3;
  std::uint32_t perceptual_depth = 7;

  bool valid() const noexcept {
    return mental_elements >= 1 && perceptual_elements >= 1 && mental_depth >= 1 &&
           perceptual_depth >= 1;
  }
  bool operator==(const ComplexityLimits&) const = default;
};

enum class MountKind { Resident, MountedDevice, CloudRemote };

struct MountDescriptor {
  MountKind kind = MountKind::Resident;
  /// Device label for MountedDevice, "host:port" for CloudRemote.
  std::string source;
  bool operator==(const MountDescriptor&) const = default;
};

struct Partition {
  SignId id;
  std::string name;
  MountDescriptor mount;
  std::vector<SignId> site_portals;
  bool mounted = true;
  bool operator==(const Partition&) const = default;
};

enum class SiteKind { System, DataSite, ApplicationSite };
enum class Scheme { Technological, GenusSpecies, Mixed };

std::string_view to_string(SiteKind k) noexcept;
SiteKind site_kind_from(std::string_view text);
std::string_view to_string(Scheme s) noexcept;
Scheme scheme_from(std::string_view text);
std::string_view to_string(MountKind k) noexcept;

struct Tool {
  Sign sign;
  std::string command_key;
  std::string group;
  bool operator==(const Tool&) const = default;
};

struct Toolbar {
  SignId id;
  std::string name;
  std::vector<Tool> tools;
  bool operator==(const Toolbar&) const = default;
};

struct Bounds {
  int x = 0, y = 0, w = 0, h = 0;
  bool contains(const Bounds& inner) const noexcept {
    return inner.x >= x && inner.y >= y && inner.x + inner.w <= x + w &&
           inner.y + inner.h <= y + h;
  }
  bool operator==(const Bounds&) const = default;
};

struct Desktop {
  SignId id;
  std::vector<std::string> open_handles;  // lease ids
  std::vector<std::pair<SignId, Bounds>> layout;
  bool operator==(const Desktop&) const = default;
};

/// Mandatory workplaces are flagged so that linting and rendering can tell
/// them apart from a template's own technological workplaces.
enum class WorkplaceRole { TaskMgmt, DataMgmt, Search, Custom };

struct Workplace {
  SignId id;
  std::string name;
  Desktop desktop;
  std::vector<Toolbar> toolbars;
  Scheme scheme = Scheme::Technological;
  WorkplaceRole role = WorkplaceRole::Custom;

  const Tool* find_tool(std::string_view key) const;
  bool operator==(const Workplace&) const = default;
};

struct Site {
  SignId id;
  std::string name;
  std::vector<Workplace> workplaces;
  SignId storage_ref;
  SiteKind kind = SiteKind::ApplicationSite;
  SignId partition;
  std::string template_name;
  std::string purpose;

  const Workplace* workplace(std::string_view name) const;
  const Workplace* workplace(const SignId& id) const;
  Workplace* workplace(const SignId& id);
  bool operator==(const Site&) const = default;
};

/// Root managed subspace of one owner.
struct PersonalDomain {
  SignId id;
  PersonCard owner;
  std::vector<Partition> partitions;
  SignId system_site;
  std::string journal_ref = "journal.ndjson";
  std::string policy_ref = "policy.json";
  std::map<SignId, Site> sites;

  const Partition* partition(const SignId& id) const;
  Partition* partition(const SignId& id);
  const Site* site(const SignId& id) const;
  Site* site(const SignId& id);
  /// Partitions currently visible in listings (unmounted ones hidden).
  std::vector<const Partition*> visible_partitions() const;
  bool operator==(const PersonalDomain&) const = default;
};

void to_json(Json& j, const Sign& s);
void from_json(const Json& j, Sign& s);
void to_json(Json& j, const PersonCard& c);
void from_json(const Json& j, PersonCard& c);
void to_json(Json& j, const ComplexityLimits& l);
void from_json(const Json& j, ComplexityLimits& l);
void to_json(Json& j, const MountDescriptor& m);
void to_json(Json& j, const Partition& p);
void to_json(Json& j, const Tool& t);
void to_json(Json& j, const Toolbar& t);
void to_json(Json& j, const Bounds& b);
void to_json(Json& j, const Workplace& w);
void to_json(Json& j, const Site& s);
void to_json(Json& j, const PersonalDomain& d);

}  // namespace uni
