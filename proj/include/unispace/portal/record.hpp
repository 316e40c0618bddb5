#pragma once

#include <array>
#include <set>
#include <string>

#include "unispace/portal/portal.hpp"

namespace uni {

/// Ed25519 key pair of a domain, derived from the domain seed.
struct SigningKey {
  std::array<std::uint8_t, 32> public_key{};
  std::array<std::uint8_t, 64> secret_key{};

  static SigningKey from_seed(std::span<const std::uint8_t> seed);
  std::string public_hex() const { return to_hex(public_key); }
  std::string sign_hex(std::string_view message) const;
};

bool verify_signature(std::string_view message, std::string_view sig_hex, std::string_view pk_hex);

/// Decoded portable portal record.
struct PortalRecord {
  PortalTarget target;  // endpoint holds the hosting server address, if any
  std::string name;
  PropertyMap params;
  CommAgent route;
  std::string context;
  std::string signer;  // public key hex
};

/// Canonical record bytes:
/// {"v":1,"target":{"kind","domain","id","endpoint"},"name","params","route","context","sig"}
/// where sig = "ed25519:<pk hex>:<signature hex>" over the bytes without "sig".
/// `host_address` is where the target is served ("" if not listening).
std::string export_portal(const Portal& portal, const std::string& host_address,
                          const SigningKey& key);

/// Throws BadRecord for anything that is not byte-exact canonical with a
/// verifying signature, SignatureInvalid when the signer is not trusted.
PortalRecord parse_portal_record(std::string_view bytes, const std::set<std::string>& trusted_keys);

/// Materialises a record in the importer's domain with a fresh id. Targets
/// in `local_domain` become local; others route to the record's endpoint.
Portal import_portal(const PortalRecord& record, const DomainId& local_domain, IdGenerator& ids);

}  // namespace uni
