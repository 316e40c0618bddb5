#include "unispace/server/host.hpp"

#include <sodium.h>
#include <sys/socket.h>
#include <sys/stat.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>

#include "unispace/error.hpp"

namespace uni {

namespace fs = std::filesystem;

namespace {

constexpr const char* kDomainFile = "domain.json";
constexpr const char* kWalFile = "wal.ndjson";
constexpr const char* kTokenFile = "owner.token";
constexpr const char* kJournalFile = "journal.ndjson";
constexpr const char* kPolicyFile = "policy.json";
constexpr const char* kStoragesDir = "storages";

Json config_json(const ExecutiveConfig& c) {
  return Json{{"mental_elements", c.limits.mental_elements},
              {"perceptual_elements", c.limits.perceptual_elements},
              {"mental_depth", c.limits.mental_depth},
              {"perceptual_depth", c.limits.perceptual_depth},
              {"max_container_depth", c.max_container_depth},
              {"strict_lint", c.strict_lint},
              {"accept_peers", c.accept_peers}};
}

ExecutiveConfig config_from(const Json& j, ExecutiveConfig base) {
  base.limits.mental_elements = j.value("mental_elements", base.limits.mental_elements);
  base.limits.perceptual_elements = j.value("perceptual_elements", base.limits.perceptual_elements);
  base.limits.mental_depth = j.value("mental_depth", base.limits.mental_depth);
  base.limits.perceptual_depth = j.value("perceptual_depth", base.limits.perceptual_depth);
  base.max_container_depth = j.value("max_container_depth", base.max_container_depth);
  base.strict_lint = j.value("strict_lint", base.strict_lint);
  base.accept_peers = j.value("accept_peers", base.accept_peers);
  return base;
}

DomainId domain_from_seed(const std::array<std::uint8_t, 32>& seed) {
  Bytes material(seed.begin(), seed.end());
  for (char c : std::string_view("domain")) material.push_back(static_cast<std::uint8_t>(c));
  auto d = sha256(material);
  Uuid u;
  for (int i = 0; i < 8; ++i) u.hi = (u.hi << 8) | d[i];
  for (int i = 8; i < 16; ++i) u.lo = (u.lo << 8) | d[i];
  u.hi = (u.hi & ~0xF000ull) | 0x4000ull;
  u.lo = (u.lo & 0x3FFFFFFFFFFFFFFFull) | 0x8000000000000000ull;
  return DomainId{u};
}

std::string random_hex(std::size_t n) {
  Bytes b(n);
  randombytes_buf(b.data(), b.size());
  return to_hex(b);
}

std::string wal_line(Json entry) {
  entry.erase("crc");
  auto body = entry.dump();
  entry["crc"] = crc32_hex(body);
  return entry.dump() + "\n";
}

std::optional<Json> parse_wal_line(const std::string& line) {
  try {
    auto j = Json::parse(line);
    if (!j.is_object() || !j.contains("crc")) return std::nullopt;
    auto crc = j["crc"].get<std::string>();
    j.erase("crc");
    if (crc32_hex(j.dump()) != crc) return std::nullopt;
    return j;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::string peer_statement(const std::string& domain, const std::string& nonce, const PersonCard& card) {
  return "unispace-peer|" + domain + "|" + nonce + "|" + canonical(Json(card));
}

std::string storage_dir_name(const SignId& id) { return id.local.hex(); }

}  // namespace

std::array<std::uint8_t, 32> seed_from_text(const std::string& text) {
  std::array<std::uint8_t, 32> out{};
  if (text.size() == 64) {
    try {
      auto b = from_hex(text);
      std::copy(b.begin(), b.end(), out.begin());
      return out;
    } catch (const Error&) {
    }
  }
  return sha256(to_bytes(text));
}

struct DomainHost::PeerClient {
  std::unique_ptr<net::ProtocolClient> client;
  PersonCard card;
  DomainId domain;
};

DomainHost::DomainHost(ServerConfig config) : config_(std::move(config)) {
  if (sodium_init() < 0) throw std::runtime_error("libsodium init failed");
  if (config_.root.empty()) fail(Errc::InvalidArgument, "domain root not set");
  fs::create_directories(config_.root);
  if (fs::exists(config_.root / kDomainFile))
    recover();
  else
    create_fresh();
  resync_mirrors();
  wal_ = fsutil::AppendFile(config_.root / kWalFile, config_.durable);
  // Settings given at this start apply from here on, in log order.
  ExecutiveConfig wanted = config_.exec;
  wanted.host_address = ex_.config().host_address;
  if (!(config_json(wanted) == config_json(ex_.config()))) {
    Json effect{{"kind", "config"}, {"config", config_json(wanted)}};
    apply_logged_effect(effect, now());
  }
}

DomainHost::~DomainHost() { stop(); }

void DomainHost::create_fresh() {
  if (config_.seed) {
    seed_ = *config_.seed;
  } else {
    randombytes_buf(seed_.data(), seed_.size());
  }
  auto domain = domain_from_seed(seed_);
  PersonCard card;
  card.sign.name = config_.owner_name;
  card.sign.ctype = ConceptualType::Person;
  ex_ = Executive::create(card, IdGenerator(domain, seed_), config_.exec);
  owner_token_ = random_hex(24);
  Json doc{{"v", 1},
           {"domain", domain.str()},
           {"seed", to_hex(seed_)},
           {"owner", config_.owner_name},
           {"config", config_json(config_.exec)},
           {"clock", config_.logical_clock ? "logical" : "wall"}};
  fsutil::write_atomic(config_.root / kTokenFile, owner_token_ + "\n");
  ::chmod((config_.root / kTokenFile).c_str(), 0600);
  { std::ofstream(config_.root / kWalFile, std::ios::app); }
  fsutil::write_atomic(config_.root / kDomainFile, doc.dump(2) + "\n");
  fsutil::fsync_dir(config_.root);
}

void DomainHost::recover() {
  Json doc;
  try {
    doc = Json::parse(fsutil::read_file(config_.root / kDomainFile));
    auto seed = from_hex(doc.at("seed").get<std::string>());
    if (seed.size() != seed_.size()) fail(Errc::LogCorrupt, "seed");
    std::copy(seed.begin(), seed.end(), seed_.begin());
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    fail(Errc::LogCorrupt, std::string("domain.json: ") + e.what());
  }
  auto domain = domain_from_seed(seed_);
  config_.logical_clock = doc.value("clock", "wall") == "logical";
  if (domain.str() != doc.value("domain", "")) fail(Errc::LogCorrupt, "domain id does not match seed");
  PersonCard card;
  card.sign.name = doc.value("owner", "Owner");
  card.sign.ctype = ConceptualType::Person;
  auto stored = config_from(doc.value("config", Json::object()), ExecutiveConfig{});
  ex_ = Executive::create(card, IdGenerator(domain, seed_), stored);
  owner_token_ = fsutil::read_file(config_.root / kTokenFile);
  while (!owner_token_.empty() && (owner_token_.back() == '\n' || owner_token_.back() == '\r'))
    owner_token_.pop_back();

  // Valid prefix of the command log; a torn or unchecked tail was never acknowledged.
  auto wal_path = config_.root / kWalFile;
  std::string text = fs::exists(wal_path) ? fsutil::read_file(wal_path) : std::string();
  std::vector<Json> entries;
  std::size_t pos = 0, keep = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string::npos) break;  // torn final line
    auto entry = parse_wal_line(text.substr(pos, nl - pos));
    if (!entry) {
      if (text.find('\n', nl + 1) != std::string::npos)
        fail(Errc::LogCorrupt, "bad command log entry " + std::to_string(entries.size() + 1));
      break;
    }
    entries.push_back(std::move(*entry));
    pos = nl + 1;
    keep = pos;
  }
  if (keep < text.size()) {
    fs::resize_file(wal_path, keep);
  }

  for (const auto& e : entries) {
    try {
      auto kind = e.at("kind").get<std::string>();
      auto at = e.at("at").get<std::int64_t>();
      clock_ = std::max(clock_, at);
      ex_.ids() = IdGenerator(domain, seed_, e.at("ctr").get<std::uint64_t>());
      if (kind == "open") {
        auto tok = ex_.open_session(e.at("principal").get<Principal>(), e.value("agent", ""), at);
        if (tok != e.at("session").get<std::string>()) fail(Errc::LogCorrupt, "session token diverged");
      } else if (kind == "close") {
        ex_.close_session(e.at("session").get<std::string>());
      } else if (kind == "cmd") {
        Command cmd{e.at("tool").get<std::string>(), e.value("target", Json()), e.value("params", Json::object())};
        ex_.dispatch(e.at("session").get<std::string>(), cmd, at);
      } else if (kind == "effect") {
        const auto& effect = e.at("effect");
        if (effect.at("kind") == "config")
          ex_.set_config(config_from(effect.at("config"), ex_.config()));
        else
          ex_.apply_effect(effect, at);
      } else {
        fail(Errc::LogCorrupt, "entry kind " + kind);
      }
      wal_n_ = e.value("n", wal_n_ + 1);
    } catch (const Error& err) {
      if (err.code() == Errc::LogCorrupt) throw;
      fail(Errc::LogCorrupt, "replay of entry " + std::to_string(wal_n_ + 1) + " failed: " +
                                 err.what());
    } catch (const std::exception& err) {
      fail(Errc::LogCorrupt, "replay of entry " + std::to_string(wal_n_ + 1) + ": " + err.what());
    }
  }
}

void DomainHost::resync_mirrors() {
  // The command log is authoritative; mirrors that disagree with it are rebuilt.
  auto sdir = config_.root / kStoragesDir;
  fs::create_directories(sdir);
  std::set<std::string> wanted;
  storage_files_.clear();
  for (const auto& [id, st] : ex_.storages()) {
    auto dir = sdir / storage_dir_name(id);
    wanted.insert(storage_dir_name(id));
    bool intact = false;
    if (fs::exists(dir / "storage.json")) {
      try {
        intact = StorageFiles::recover(dir) == st;
      } catch (const std::exception&) {
        intact = false;
      }
    }
    StorageFiles files(dir, config_.durable);
    if (intact) {
      files.set_flushed(st.log().size());
      files.write_layout(st);
    } else {
      fs::remove_all(dir);
      files.create(st);
      files.flush(st);
    }
    storage_files_.emplace(id, std::move(files));
  }
  for (const auto& entry : fs::directory_iterator(sdir))
    if (!wanted.count(entry.path().filename().string())) fs::remove_all(entry.path());

  std::string journal;
  for (const auto& e : ex_.tasks().journal().entries()) journal += Json(e).dump() + "\n";
  fsutil::write_atomic(config_.root / kJournalFile, journal);
  journal_flushed_ = ex_.tasks().journal().entries().size();
  journal_ = fsutil::AppendFile(config_.root / kJournalFile, config_.durable);
  policy_written_ = to_json(ex_.policy()).dump(2) + "\n";
  fsutil::write_atomic(config_.root / kPolicyFile, policy_written_);
}

void DomainHost::flush_mirrors() {
  auto sdir = config_.root / kStoragesDir;
  for (auto it = storage_files_.begin(); it != storage_files_.end();) {
    if (!ex_.storages().count(it->first)) {
      fs::remove_all(it->second.dir());
      it = storage_files_.erase(it);
    } else {
      ++it;
    }
  }
  for (const auto& [id, st] : ex_.storages()) {
    auto it = storage_files_.find(id);
    if (it == storage_files_.end()) {
      StorageFiles files(sdir / storage_dir_name(id), config_.durable);
      files.create(st);
      it = storage_files_.emplace(id, std::move(files)).first;
    }
    it->second.flush(st);
  }
  const auto& entries = ex_.tasks().journal().entries();
  std::string add;
  for (std::size_t i = journal_flushed_; i < entries.size(); ++i) add += Json(entries[i]).dump() + "\n";
  if (!add.empty()) journal_.append(add);
  journal_flushed_ = entries.size();
  auto policy = to_json(ex_.policy()).dump(2) + "\n";
  if (policy != policy_written_) {
    fsutil::write_atomic(config_.root / kPolicyFile, policy);
    policy_written_ = std::move(policy);
  }
}

void DomainHost::append_wal(Json entry) {
  entry["n"] = ++wal_n_;
  wal_.append(wal_line(std::move(entry)));
}

std::int64_t DomainHost::now() {
  if (config_.logical_clock) return ++clock_;
  auto wall = std::chrono::duration_cast<std::chrono::milliseconds>(
                  std::chrono::system_clock::now().time_since_epoch())
                  .count();
  clock_ = std::max(clock_ + 1, static_cast<std::int64_t>(wall));
  return clock_;
}

Json DomainHost::apply_logged_effect(const Json& effect, std::int64_t at) {
  auto ctr = ex_.ids().counter();
  Executive backup = ex_;
  Json result;
  try {
    if (effect.at("kind") == "config") {
      ex_.set_config(config_from(effect.at("config"), ex_.config()));
      result = effect.at("config");
    } else {
      result = ex_.apply_effect(effect, at);
    }
  } catch (...) {
    ex_ = std::move(backup);
    throw;
  }
  append_wal(Json{{"kind", "effect"}, {"at", at}, {"ctr", ctr}, {"effect", effect}});
  flush_mirrors();
  return result;
}

Outcome DomainHost::dispatch_logged(const std::string& token, const Command& cmd, std::int64_t at) {
  if (Executive::read_only(cmd.tool)) return ex_.dispatch(token, cmd, at);
  auto ctr = ex_.ids().counter();
  Executive backup = ex_;
  Outcome out;
  try {
    out = ex_.dispatch(token, cmd, at);
  } catch (...) {
    ex_ = std::move(backup);
    throw;
  }
  if (out.mutating) {
    append_wal(Json{{"kind", "cmd"}, {"at", at}, {"ctr", ctr}, {"session", token}, {"tool", cmd.tool},
                    {"target", cmd.target}, {"params", cmd.params}});
    flush_mirrors();
  }
  return out;
}

// --- protocol ------------------------------------------------------------------

std::string DomainHost::handle_frame(Connection& conn, std::string_view frame) {
  Message msg;
  try {
    msg = decode(frame);
  } catch (const Error& e) {
    std::optional<std::uint64_t> re;
    try {
      auto j = Json::parse(frame);
      if (j.is_object() && j.contains("seq") && j["seq"].is_number_unsigned()) re = j["seq"].get<std::uint64_t>();
    } catch (const std::exception&) {
    }
    return encode(make_error(re.value_or(0), re, std::string(to_token(e.code())), e.detail()));
  }
  return encode(handle(conn, msg));
}

Message DomainHost::handle(Connection& conn, const Message& msg) {
  try {
    switch (msg.type) {
      case MsgType::Hello:
        return on_hello(conn, msg);
      case MsgType::Command:
        return on_command(conn, msg);
      case MsgType::Bye: {
        std::lock_guard lock(mu_);
        auto tok = msg.body.value("session", conn.session);
        if (!tok.empty() && ex_.session(tok)) {
          ex_.close_session(tok);
          append_wal(Json{{"kind", "close"}, {"at", now()}, {"ctr", ex_.ids().counter()}, {"session", tok}});
        }
        conn.session.clear();
        return Message{kProtocolVersion, MsgType::Bye, msg.seq, Json{{"reason", "closed"}}};
      }
      default:
        fail(Errc::Malformed, "clients send hello, command or bye");
    }
  } catch (const Error& e) {
    return make_error(msg.seq, msg.seq, std::string(to_token(e.code())), e.detail());
  } catch (const std::exception& e) {
    return make_error(msg.seq, msg.seq, "INTERNAL", e.what());
  }
}

Message DomainHost::on_hello(Connection& conn, const Message& msg) {
  std::lock_guard lock(mu_);
  const auto creds = msg.body.value("credentials", Json::object());
  auto kind = creds.value("kind", "");
  auto agent = msg.body.value("agent", "");
  Principal principal;
  Json server = Json::object();
  if (kind == "owner") {
    auto token = creds.value("token", "");
    if (token.size() != owner_token_.size() ||
        sodium_memcmp(token.data(), owner_token_.data(), token.size()) != 0)
      fail(Errc::AuthFailed, "bad owner credentials");
    principal = Principal::owner();
  } else if (kind == "peer") {
    PersonCard card;
    DomainId domain;
    std::string nonce;
    try {
      card = creds.at("card").get<PersonCard>();
      domain = DomainId{Uuid::parse(creds.at("domain").get<std::string>())};
      nonce = creds.at("nonce").get<std::string>();
    } catch (const std::exception&) {
      fail(Errc::AuthFailed, "peer credentials");
    }
    if (card.public_key.empty() || card.sign.id.domain != domain) fail(Errc::AuthFailed, "peer card");
    if (!verify_signature(peer_statement(domain.str(), nonce, card), creds.value("sig", ""), card.public_key))
      fail(Errc::AuthFailed, "peer signature");
    if (domain == ex_.domain_id()) fail(Errc::Rejected, "a domain does not federate with itself");
    const auto* link = ex_.link_for(domain);
    if (link && link->remote_card.public_key != card.public_key) fail(Errc::Rejected, "peer key changed");
    if (!link) {
      if (!creds.value("federate", false)) fail(Errc::AuthFailed, "no federation link");
      if (!ex_.config().accept_peers) fail(Errc::Rejected, "this server does not accept peers");
      FederationLink l{creds.value("address", ""), domain, ex_.domain().owner, card, true};
      apply_logged_effect(Json{{"kind", "link_add"}, {"link", l}}, now());
    }
    principal = Principal::external(domain, "system");
    server["sig"] = ex_.signing_key().sign_hex(peer_statement(ex_.domain_id().str(), nonce, ex_.domain().owner));
  } else {
    fail(Errc::AuthFailed, "unknown credential kind");
  }

  std::string token;
  if (msg.body.contains("session")) {
    auto want = msg.body["session"].get<std::string>();
    if (const auto* s = ex_.session(want); s && s->principal == principal) token = want;
  }
  if (token.empty()) {
    auto at = now();
    auto ctr = ex_.ids().counter();
    token = ex_.open_session(principal, agent, at);
    append_wal(Json{{"kind", "open"}, {"at", at}, {"ctr", ctr}, {"session", token}, {"principal", principal},
                    {"agent", agent}});
  }
  conn.session = token;
  Json body{{"agent", "unid"},
            {"session", token},
            {"principal", principal.id()},
            {"domain", ex_.domain_id().str()},
            {"card", ex_.domain().owner},
            {"server", server}};
  return Message{kProtocolVersion, MsgType::Hello, msg.seq, body};
}

Message DomainHost::reply_for(const std::string& token, std::uint64_t re, const Outcome& out) {
  if (out.event) {
    Json body = *out.event;
    body["re"] = re;
    return Message{kProtocolVersion, MsgType::Event, re, body};
  }
  Json body{{"re", re}, {"tree", to_json(ex_.render(token))}};
  if (!out.result.is_null()) body["result"] = out.result;
  return Message{kProtocolVersion, MsgType::Render, re, body};
}

Message DomainHost::on_command(Connection& conn, const Message& msg) {
  std::lock_guard lock(mu_);
  auto token = msg.body.at("session").get<std::string>();
  const auto* s = ex_.session(token);
  if (!s) fail(Errc::AuthFailed, "unknown session");
  conn.session = token;
  Command cmd{msg.body.at("tool").get<std::string>(), msg.body.value("target", Json()),
              msg.body.value("params", Json::object())};
  auto at = now();
  Outcome out;
  bool host_tool = cmd.tool == "federate" || cmd.tool == "snapshot" ||
                   (cmd.tool == "mount" && cmd.params.value("kind", "") == "cloud");
  if (host_tool) {
    out = run_host_tool(token, cmd, at);
  } else if (auto call = ex_.remote_for(token, cmd)) {
    out = forward(token, *call, at);
  } else {
    out = dispatch_logged(token, cmd, at);
  }
  return reply_for(token, msg.seq, out);
}

Outcome DomainHost::run_host_tool(const std::string& token, const Command& cmd, std::int64_t at) {
  const auto* s = ex_.session(token);
  if (!s->principal.is_owner()) fail(Errc::AccessDenied, cmd.tool + " is owner-only");
  auto address = cmd.params.value("address", cmd.target.is_string() ? cmd.target.get<std::string>() : "");
  Outcome out;
  if (cmd.tool == "federate") {
    if (address.empty()) fail(Errc::InvalidArgument, "federate needs an address");
    out.result = federate(address, at);
  } else if (cmd.tool == "snapshot") {
    auto path = cmd.params.value("path", "");
    if (path.empty()) fail(Errc::InvalidArgument, "snapshot needs a path");
    write_snapshot(path);
    out.result = Json{{"archive", path}};
  } else {
    auto source = cmd.params.value("source", address);
    if (source.empty()) fail(Errc::InvalidArgument, "cloud mount needs a source address");
    out.result = mount_cloud(source, at);
  }
  return out;
}

Json DomainHost::peer_credentials(bool federate) const {
  auto nonce = random_hex(16);
  const auto& card = ex_.domain().owner;
  return Json{{"kind", "peer"},
              {"card", card},
              {"domain", ex_.domain_id().str()},
              {"nonce", nonce},
              {"federate", federate},
              {"address", ex_.config().host_address},
              {"sig", ex_.signing_key().sign_hex(peer_statement(ex_.domain_id().str(), nonce, card))}};
}

net::ProtocolClient& DomainHost::peer(const std::string& address, bool federate) {
  auto it = peers_.find(address);
  if (it != peers_.end() && !federate) return *it->second->client;
  peers_.erase(address);
  auto client = std::make_unique<net::ProtocolClient>(std::make_unique<net::TcpLink>(address));
  auto creds = peer_credentials(federate);
  auto reply = client->hello("unid", creds);
  PersonCard card;
  DomainId domain;
  try {
    card = reply.body.at("card").get<PersonCard>();
    domain = DomainId{Uuid::parse(reply.body.at("domain").get<std::string>())};
  } catch (const std::exception&) {
    fail(Errc::Rejected, "peer hello reply");
  }
  auto sig = reply.body.value("server", Json::object()).value("sig", "");
  if (card.public_key.empty() ||
      !verify_signature(peer_statement(domain.str(), creds["nonce"].get<std::string>(), card), sig, card.public_key))
    fail(Errc::Rejected, "peer did not prove its key");
  if (const auto* link = ex_.link_for(domain); link && link->remote_card.public_key != card.public_key)
    fail(Errc::Rejected, "peer key changed");
  auto pc = std::make_unique<PeerClient>();
  pc->client = std::move(client);
  pc->card = card;
  pc->domain = domain;
  auto& ref = *pc->client;
  peers_[address] = std::move(pc);
  return ref;
}

Json DomainHost::federate(const std::string& address, std::int64_t at) {
  peer(address, true);
  const auto& pc = *peers_.at(address);
  const auto* link = ex_.link_for(pc.domain);
  if (!link) {
    FederationLink l{address, pc.domain, ex_.domain().owner, pc.card, true};
    apply_logged_effect(Json{{"kind", "link_add"}, {"link", l}}, at);
  } else if (!link->connected || link->address != address) {
    apply_logged_effect(Json{{"kind", "link_state"}, {"peer", pc.domain.str()}, {"connected", true},
                             {"address", address}},
                        at);
  }
  return Json{{"peer", pc.domain.str()}, {"name", pc.card.sign.name}, {"address", address}, {"connected", true}};
}

Json DomainHost::mount_cloud(const std::string& address, std::int64_t at) {
  Json sites;
  try {
    federate(address, at);
    auto reply = peer(address, false).command("peer_sites");
    net::throw_if_error(reply);
    sites = reply.body.at("result").at("sites");
  } catch (const Error& e) {
    peers_.erase(address);
    if (e.code() == Errc::Unreachable) fail(Errc::SourceUnreachable, address);
    throw;
  }
  Json records = Json::array();
  for (const auto& s : sites) records.push_back(s.at("record"));
  return apply_logged_effect(Json{{"kind", "mount_cloud"}, {"address", address}, {"records", records}}, at);
}

Outcome DomainHost::forward(const std::string& token, const RemoteCall& call, std::int64_t at) {
  Message reply;
  for (int attempt = 0;; ++attempt) {
    try {
      reply = peer(call.address, false).command(call.command.tool, call.command.target, call.command.params);
      break;
    } catch (const Error& e) {
      peers_.erase(call.address);
      if (attempt > 0 || e.code() != Errc::Unreachable) {
        if (e.code() == Errc::Unreachable || e.code() == Errc::AuthFailed) fail(Errc::Unreachable, call.address);
        throw;
      }
    }
  }
  net::throw_if_error(reply);
  Outcome out;
  if (reply.type == MsgType::Event) {
    Json body = reply.body;
    body.erase("re");
    out.event = body;
    return out;
  }
  out.result = reply.body.value("result", Json::object());
  if (call.via_portal)
    apply_logged_effect(Json{{"kind", "remote_enter"}, {"session", token}, {"portal", *call.via_portal}}, at);
  return out;
}

// --- queries -----------------------------------------------------------------

Executive DomainHost::executive() const {
  std::lock_guard lock(mu_);
  return ex_;
}

Json DomainHost::state_json() const {
  std::lock_guard lock(mu_);
  return ex_.state_json();
}

std::size_t DomainHost::log_entries() const {
  std::lock_guard lock(mu_);
  return wal_n_;
}

std::string DomainHost::tcp_address() const {
  std::lock_guard lock(mu_);
  return tcp_addr_;
}

void DomainHost::autosave() {
  std::lock_guard lock(mu_);
  bool dirty = false;
  for (const auto& [id, st] : ex_.storages())
    for (const auto& [lease, h] : st.handles()) dirty = dirty || (h.mode == LeaseMode::Edit && h.dirty);
  if (!dirty) return;
  dispatch_logged("", Command{"autosave", nullptr, Json::object()}, now());
}

void DomainHost::snapshot(const fs::path& archive) {
  std::lock_guard lock(mu_);
  write_snapshot(archive);
}

void DomainHost::write_snapshot(const fs::path& archive) {
  if (ex_.has_edit_leases()) fail(Errc::LeasesOpen, "close edit leases before a snapshot");
  fsutil::write_atomic(archive, pack_tree(config_.root));
}

// --- serving -----------------------------------------------------------------

std::string DomainHost::start_tcp(const std::string& addr) {
  auto listener = std::make_shared<net::Socket>(net::tcp_listen(addr));
  auto bound = net::local_address(*listener);
  {
    std::lock_guard lock(mu_);
    tcp_addr_ = bound;
    ex_.set_host_address(bound);
  }
  listeners_.push_back(listener);
  std::lock_guard lock(conn_mu_);
  threads_.emplace_back([this, listener] { serve_tcp(listener); });
  return bound;
}

void DomainHost::serve_tcp(std::shared_ptr<net::Socket> listener) {
  while (!stopping_) {
    auto sock = net::accept(*listener);
    if (!sock.valid()) break;
    std::lock_guard lock(conn_mu_);
    if (stopping_) break;
    conn_fds_.push_back(sock.fd());
    threads_.emplace_back([this, s = std::make_shared<net::Socket>(std::move(sock))]() mutable {
      serve_conn(std::move(*s));
    });
  }
}

void DomainHost::serve_conn(net::Socket sock) {
  net::LineChannel chan(sock.fd());
  Connection conn;
  try {
    while (!stopping_) {
      std::optional<std::string> line;
      try {
        line = chan.read_line();
      } catch (const Error& e) {
        chan.write_line(encode(make_error(0, std::nullopt, std::string(to_token(e.code())), e.detail())));
        break;
      }
      if (!line) break;
      if (line->empty()) continue;
      chan.write_line(handle_frame(conn, *line));
    }
  } catch (const std::exception&) {
  }
  std::lock_guard lock(conn_mu_);
  conn_fds_.erase(std::remove(conn_fds_.begin(), conn_fds_.end(), sock.fd()), conn_fds_.end());
}

void DomainHost::start_autosave(std::uint32_t period_ms) {
  if (period_ms == 0) return;
  std::lock_guard lock(conn_mu_);
  threads_.emplace_back([this, period_ms] {
    while (!stopping_) {
      for (std::uint32_t waited = 0; waited < period_ms && !stopping_; waited += 10)
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
      if (stopping_) break;
      try {
        autosave();
      } catch (const std::exception& e) {
        std::cerr << "autosave: " << e.what() << "\n";
      }
    }
  });
}

void DomainHost::stop() {
  if (stopping_.exchange(true)) return;
  for (auto& l : listeners_) l->shutdown();
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(conn_mu_);
    for (int fd : conn_fds_) ::shutdown(fd, SHUT_RDWR);
    threads.swap(threads_);
  }
  for (auto& t : threads)
    if (t.joinable()) t.join();
  // Threads started while joining.
  std::lock_guard lock(conn_mu_);
  for (auto& t : threads_)
    if (t.joinable()) t.join();
}

}  // namespace uni
