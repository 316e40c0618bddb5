#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

#include "unispace/util.hpp"

namespace uni {

/// 128-bit opaque value, UUIDv4-shaped.
struct Uuid {
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;

  bool is_nil() const noexcept { return hi == 0 && lo == 0; }
  std::string hex() const;
  static Uuid parse(std::string_view hex32);  // throws Error(Malformed)
  static Uuid random();                        // OS entropy

  auto operator<=>(const Uuid&) const = default;
};

struct DomainId {
  Uuid value;
  std::string str() const { return value.hex(); }
  auto operator<=>(const DomainId&) const = default;
};

/// System identifier of a sign: owning domain plus a local 128-bit value.
/// Text form is "<domain-hex>:<local-hex>".
struct SignId {
  DomainId domain;
  Uuid local;

  bool is_nil() const noexcept { return local.is_nil(); }
  std::string str() const;
  static SignId parse(std::string_view text);  // throws Error(Malformed)

  auto operator<=>(const SignId&) const = default;
};

/// Deterministic id stream: local = SHA-256(seed || counter), with the
/// version/variant bits forced. Replaying the same operations from the same
/// seed reproduces the same ids.
class IdGenerator {
 public:
  IdGenerator() = default;
  IdGenerator(DomainId domain, std::array<std::uint8_t, 32> seed, std::uint64_t counter = 0)
      : domain_(domain), seed_(seed), counter_(counter) {}

  SignId next();
  /// Token-shaped random text drawn from the same stream (session tokens).
  std::string next_token();

  DomainId domain() const noexcept { return domain_; }
  std::uint64_t counter() const noexcept { return counter_; }
  const std::array<std::uint8_t, 32>& seed() const noexcept { return seed_; }

 private:
  Uuid draw();

  DomainId domain_{};
  std::array<std::uint8_t, 32> seed_{};
  std::uint64_t counter_ = 0;
};

void to_json(Json& j, const SignId& id);
void from_json(const Json& j, SignId& id);

}  // namespace uni

template <>
struct std::hash<uni::SignId> {
  std::size_t operator()(const uni::SignId& id) const noexcept {
    return std::hash<std::uint64_t>{}(id.local.hi ^ (id.local.lo * 0x9e3779b97f4a7c15ULL) ^
                                      id.domain.value.lo);
  }
};
