#include "unispace/portal/record.hpp"

#include <sodium.h>

#include "unispace/error.hpp"

namespace uni {
namespace {

using Ordered = nlohmann::ordered_json;

void ensure_sodium() {
  static const bool ready = [] { return sodium_init() >= 0; }();
  if (!ready) throw std::runtime_error("libsodium init failed");
}

Ordered unsigned_record(const PortalTarget& target, const std::string& name,
                        const PropertyMap& params, const CommAgent& route,
                        const std::string& context, const std::string& host) {
  Ordered t;
  t["kind"] = std::string(to_string(target.kind));
  t["domain"] = target.target.domain.str();
  t["id"] = target.target.local.hex();
  t["endpoint"] = host;
  if (!target.part.empty()) t["part"] = target.part;
  Ordered p = Ordered::object();
  for (const auto& [k, v] : params) p[k] = v;  // PropertyMap iterates sorted
  Ordered r;
  r["protocol"] = route.protocol;
  r["address"] = route.address;
  Ordered rec;
  rec["v"] = 1;
  rec["target"] = std::move(t);
  rec["name"] = name;
  rec["params"] = std::move(p);
  rec["route"] = std::move(r);
  rec["context"] = context;
  return rec;
}

}  // namespace

SigningKey SigningKey::from_seed(std::span<const std::uint8_t> seed) {
  ensure_sodium();
  Bytes material(seed.begin(), seed.end());
  for (char c : std::string_view("portal-signing")) material.push_back(static_cast<std::uint8_t>(c));
  auto derived = sha256(material);
  SigningKey key;
  crypto_sign_seed_keypair(key.public_key.data(), key.secret_key.data(), derived.data());
  return key;
}

std::string SigningKey::sign_hex(std::string_view message) const {
  ensure_sodium();
  std::array<std::uint8_t, crypto_sign_BYTES> sig{};
  crypto_sign_detached(sig.data(), nullptr, reinterpret_cast<const unsigned char*>(message.data()),
                       message.size(), secret_key.data());
  return to_hex(sig);
}

bool verify_signature(std::string_view message, std::string_view sig_hex, std::string_view pk_hex) {
  ensure_sodium();
  try {
    auto sig = from_hex(sig_hex);
    auto pk = from_hex(pk_hex);
    if (sig.size() != crypto_sign_BYTES || pk.size() != crypto_sign_PUBLICKEYBYTES) return false;
    return crypto_sign_verify_detached(sig.data(),
                                       reinterpret_cast<const unsigned char*>(message.data()),
                                       message.size(), pk.data()) == 0;
  } catch (const Error&) {
    return false;
  }
}

std::string export_portal(const Portal& portal, const std::string& host_address,
                          const SigningKey& key) {
  CommAgent route = portal.comm_agent;
  std::string host = portal.target.endpoint.remote ? portal.target.endpoint.address : host_address;
  if (!portal.target.endpoint.remote) route = CommAgent{host.empty() ? "" : "tcp", host};
  auto rec = unsigned_record(portal.target, portal.sign.name, portal.parameters, route,
                             portal.context_id, host);
  auto body = rec.dump();
  rec["sig"] = "ed25519:" + key.public_hex() + ":" + key.sign_hex(body);
  return rec.dump();
}

PortalRecord parse_portal_record(std::string_view bytes, const std::set<std::string>& trusted_keys) {
  PortalRecord out;
  std::string sig;
  std::string host;
  try {
    auto doc = Ordered::parse(bytes);
    if (!doc.is_object() || doc.size() != 7 || doc.at("v") != 1) fail(Errc::BadRecord, "shape");
    const auto& t = doc.at("target");
    out.target.kind = target_kind_from(t.at("kind").get<std::string>());
    out.target.target = SignId{DomainId{Uuid::parse(t.at("domain").get<std::string>())},
                               Uuid::parse(t.at("id").get<std::string>())};
    host = t.at("endpoint").get<std::string>();
    if (t.contains("part")) out.target.part = t["part"].get<std::string>();
    out.name = doc.at("name").get<std::string>();
    for (const auto& [k, v] : doc.at("params").items()) out.params[k] = v.get<std::string>();
    out.route.protocol = doc.at("route").at("protocol").get<std::string>();
    out.route.address = doc.at("route").at("address").get<std::string>();
    out.context = doc.at("context").get<std::string>();
    sig = doc.at("sig").get<std::string>();
  } catch (const Error&) {
    fail(Errc::BadRecord, "fields");
  } catch (const std::exception&) {
    fail(Errc::BadRecord, "parse");
  }
  out.target.endpoint = host.empty() ? Endpoint::local() : Endpoint::at(host);

  auto body = unsigned_record(out.target, out.name, out.params, out.route, out.context, host);
  auto body_bytes = body.dump();
  body["sig"] = sig;
  if (body.dump() != bytes) fail(Errc::BadRecord, "not canonical");

  constexpr std::string_view kPrefix = "ed25519:";
  if (sig.rfind(kPrefix, 0) != 0) fail(Errc::BadRecord, "signature scheme");
  auto rest = std::string_view(sig).substr(kPrefix.size());
  auto colon = rest.find(':');
  if (colon == std::string_view::npos) fail(Errc::BadRecord, "signature shape");
  auto pk = rest.substr(0, colon);
  auto sig_hex = rest.substr(colon + 1);
  if (!verify_signature(body_bytes, sig_hex, pk)) fail(Errc::BadRecord, "signature mismatch");
  out.signer = std::string(pk);
  if (!trusted_keys.count(out.signer)) fail(Errc::SignatureInvalid, "untrusted signer");
  return out;
}

Portal import_portal(const PortalRecord& record, const DomainId& local_domain, IdGenerator& ids) {
  Portal p;
  p.sign.id = ids.next();
  p.sign.name = record.name;
  p.sign.ctype = ConceptualType::Portal;
  p.sign.properties["kind"] = "portal";
  p.sign.properties["imported"] = "true";
  p.target = record.target;
  p.parameters = record.params;
  p.context_id = record.context;
  if (record.target.target.domain == local_domain) {
    p.target.endpoint = Endpoint::local();
    p.comm_agent = CommAgent{"loopback", ""};
  } else {
    p.comm_agent = record.route;
    if (!p.target.endpoint.remote && !record.route.address.empty())
      p.target.endpoint = Endpoint::at(record.route.address);
    if (!p.target.endpoint.remote) p.target.endpoint = Endpoint{true, ""};
  }
  return p;
}

}  // namespace uni
