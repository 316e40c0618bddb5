#include "unispace/core/ids.hpp"

#include <random>

#include "unispace/error.hpp"

namespace uni {
namespace {

std::uint64_t load_be64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = v << 8 | p[i];
  return v;
}

Uuid shape_v4(Uuid u) {
  u.hi = (u.hi & ~0xf000ULL) | 0x4000ULL;
  u.lo = (u.lo & ~(0xc0ULL << 56)) | (0x80ULL << 56);
  return u;
}

}  // namespace

std::string Uuid::hex() const {
  std::array<std::uint8_t, 16> raw{};
  for (int i = 0; i < 8; ++i) {
    raw[i] = static_cast<std::uint8_t>(hi >> (56 - 8 * i));
    raw[8 + i] = static_cast<std::uint8_t>(lo >> (56 - 8 * i));
  }
  return to_hex(raw);
}

Uuid Uuid::parse(std::string_view hex32) {
  if (hex32.size() != 32) fail(Errc::Malformed, "uuid length");
  auto raw = from_hex(hex32);
  return Uuid{load_be64(raw.data()), load_be64(raw.data() + 8)};
}

Uuid Uuid::random() {
  static thread_local std::random_device rd;
  auto draw64 = [] { return (std::uint64_t{rd()} << 32) | rd(); };
  return shape_v4(Uuid{draw64(), draw64()});
}

std::string SignId::str() const { return domain.value.hex() + ":" + local.hex(); }

SignId SignId::parse(std::string_view text) {
  auto colon = text.find(':');
  if (colon == std::string_view::npos) fail(Errc::Malformed, "sign id");
  return SignId{DomainId{Uuid::parse(text.substr(0, colon))}, Uuid::parse(text.substr(colon + 1))};
}

Uuid IdGenerator::draw() {
  std::array<std::uint8_t, 40> buf{};
  std::copy(seed_.begin(), seed_.end(), buf.begin());
  for (int i = 0; i < 8; ++i) buf[32 + i] = static_cast<std::uint8_t>(counter_ >> (56 - 8 * i));
  ++counter_;
  auto digest = sha256(buf);
  return shape_v4(Uuid{load_be64(digest.data()), load_be64(digest.data() + 8)});
}

SignId IdGenerator::next() { return SignId{domain_, draw()}; }

std::string IdGenerator::next_token() { return draw().hex(); }

void to_json(Json& j, const SignId& id) { j = id.str(); }

void from_json(const Json& j, SignId& id) { id = SignId::parse(j.get<std::string>()); }

}  // namespace uni
