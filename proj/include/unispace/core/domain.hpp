#pragma once

#include <optional>
#include <string>

#include "unispace/core/catalog.hpp"
#include "unispace/core/model.hpp"

namespace uni {

/// Random domain id and seed for a brand-new domain.
IdGenerator fresh_domain_ids();

/// Builds a domain with one Resident partition and the system site
/// (TaskMgmt, DataMgmt, Search, Install, Devices, Settings workplaces).
/// `system_storage` is the id of the storage the caller creates for it.
PersonalDomain create_domain(const PersonCard& owner, IdGenerator& ids);

/// Mounts a device or cloud partition. Remounting a known source revives the
/// same partition id. Throws AlreadyMounted.
Partition& mount_partition(PersonalDomain& domain, const MountDescriptor& source, IdGenerator& ids);
/// Hides the partition from listings; contained signs stay. Throws NotFound,
/// NotMounted.
void unmount_partition(PersonalDomain& domain, const SignId& partition);

/// Creates the site record with its mandatory and template workplaces.
/// The caller creates the storage and the partition's site portal.
Site& install_site(PersonalDomain& domain, const SignId& partition, const SiteTemplate& tmpl,
                   std::string name, IdGenerator& ids);
/// Builds workplaces for the mandatory roles (used by install and create).
Workplace make_mandatory_workplace(WorkplaceRole role, IdGenerator& ids);

struct Description {
  std::string type;
  std::string name;
  std::string purpose;
  bool operator==(const Description&) const = default;
};

/// Resolves signs owned by the domain model itself: the domain, the owner,
/// partitions, sites, workplaces and tools.
std::optional<Sign> find_model_sign(const PersonalDomain& domain, const SignId& id);
std::optional<Description> describe_model_sign(const PersonalDomain& domain, const SignId& id);
/// Type, name and purpose property; never includes the id.
Description describe(const Sign& sign);

}  // namespace uni
