#include <gtest/gtest.h>
#include <sys/socket.h>
#include <sys/stat.h>

#include <fstream>

#include "support.hpp"
#include "unispace/cli/cli.hpp"
#include "unispace/error.hpp"
#include "unispace/server/host.hpp"
#include "unispace/util.hpp"

using namespace uni;
using uni::testing::TempDir;

namespace {

ServerConfig config_for(const std::filesystem::path& root, const std::string& seed) {
  ServerConfig c;
  c.root = root;
  c.seed = seed_from_text(seed);
  c.logical_clock = true;
  c.durable = false;
  return c;
}

struct Desk {
  std::unique_ptr<cli::Session> s;
  explicit Desk(DomainHost& h) : s(std::make_unique<cli::Session>(std::make_unique<LoopbackLink>(h), h.owner_credentials())) {}
  Desk(const std::string& addr, const Json& creds)
      : s(std::make_unique<cli::Session>(std::make_unique<net::TcpLink>(addr), creds)) {}

  cli::VerbResult run(const std::string& line) {
    auto r = s->run(cli::split_words(line));
    return r;
  }
  Json ok(const std::string& line) {
    auto r = run(line);
    EXPECT_EQ(r.exit_code, 0) << line << ": " << r.error;
    return r.bodies.empty() ? Json() : r.bodies.back().value("result", Json());
  }
  std::string fails(const std::string& line) {
    auto r = run(line);
    EXPECT_NE(r.exit_code, 0) << line;
    return r.error.substr(0, r.error.find(' '));
  }
};

}  // namespace

TEST(Host, FreshRootWritesDomainFiles) {
  TempDir tmp;
  DomainHost h(config_for(tmp.path, "a"));
  EXPECT_TRUE(std::filesystem::exists(tmp.path / "domain.json"));
  struct stat st{};
  ASSERT_EQ(::stat((tmp.path / "owner.token").c_str(), &st), 0);
  EXPECT_EQ(st.st_mode & 0777, 0600);
  auto doc = Json::parse(fsutil::read_file(tmp.path / "domain.json"));
  EXPECT_EQ(doc["clock"], "logical");
}

TEST(Host, SameSeedSameDomain) {
  TempDir a, b;
  DomainHost ha(config_for(a.path, "same"));
  DomainHost hb(config_for(b.path, "same"));
  EXPECT_EQ(ha.executive().domain_id(), hb.executive().domain_id());
}

TEST(Host, BadCredentialsRejected) {
  TempDir tmp;
  DomainHost h(config_for(tmp.path, "a"));
  try {
    cli::Session s(std::make_unique<LoopbackLink>(h), Json{{"kind", "owner"}, {"token", "wrong"}});
    FAIL() << "hello accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::AuthFailed);
  }
}

TEST(Host, MalformedFrameGetsErrorReply) {
  TempDir tmp;
  DomainHost h(config_for(tmp.path, "a"));
  Connection c;
  auto reply = decode(h.handle_frame(c, "{not json"));
  EXPECT_EQ(reply.type, MsgType::Error);
  EXPECT_EQ(reply.body["code"], "MALFORMED");
  reply = decode(h.handle_frame(c, encode(make_command(3, "nosuch", "map"))));
  EXPECT_EQ(reply.body["code"], "AUTH_FAILED");
  EXPECT_EQ(reply.seq, 3u);
}

TEST(Host, RecoverReproducesState) {
  TempDir tmp;
  Json before;
  {
    DomainHost h(config_for(tmp.path, "r"));
    Desk d(h);
    d.ok("site install document-editor --name Reports");
    d.ok("task new Quarterly");
    d.ok("find Reports");
    before = h.state_json();
  }
  DomainHost again(config_for(tmp.path, "r"));
  EXPECT_EQ(again.state_json(), before);
}

TEST(Host, TornWalTailIsTrimmed) {
  TempDir tmp;
  Json before;
  {
    DomainHost h(config_for(tmp.path, "t"));
    Desk d(h);
    d.ok("task new One");
    before = h.state_json();
  }
  {
    std::ofstream out(tmp.path / "wal.ndjson", std::ios::app);
    out << R"({"kind":"cmd","at":9,"ctr)";
  }
  DomainHost again(config_for(tmp.path, "t"));
  EXPECT_EQ(again.state_json(), before);
  auto text = fsutil::read_file(tmp.path / "wal.ndjson");
  EXPECT_EQ(text.back(), '\n');
}

TEST(Host, CorruptWalMiddleIsFatal) {
  TempDir tmp;
  {
    DomainHost h(config_for(tmp.path, "c"));
    Desk d(h);
    d.ok("task new One");
    d.ok("task new Two");
  }
  auto path = tmp.path / "wal.ndjson";
  auto text = fsutil::read_file(path);
  auto pos = text.find("create_task");
  ASSERT_NE(pos, std::string::npos);
  text[pos] = 'C';
  fsutil::write_atomic(path, text);
  try {
    DomainHost again(config_for(tmp.path, "c"));
    FAIL() << "recovered from a corrupt log";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::LogCorrupt);
  }
}

TEST(Host, FailedCommandsAreNotLogged) {
  TempDir tmp;
  DomainHost h(config_for(tmp.path, "f"));
  Desk d(h);
  auto n = h.log_entries();
  EXPECT_EQ(d.fails("go Nowhere"), "NOT_FOUND");
  EXPECT_EQ(d.fails("exit"), "AT_ROOT");
  EXPECT_EQ(h.log_entries(), n);
  d.ok("map");
  EXPECT_EQ(h.log_entries(), n);
}

TEST(Host, SnapshotRestoreRoundTrip) {
  TempDir tmp;
  auto root = tmp.path / "a";
  auto archive = tmp.path / "a.snap";
  Json before;
  {
    DomainHost h(config_for(root, "s"));
    Desk d(h);
    auto site = d.ok("site install data-site --name Vault");
    d.ok("task new Keep");
    d.ok("snapshot " + archive.string());
    before = h.state_json();
  }
  auto copy = tmp.path / "b";
  restore_archive(archive, copy);
  DomainHost b(config_for(copy, "ignored"));
  EXPECT_EQ(b.state_json(), before);
  // A restore never overwrites a live domain.
  EXPECT_THROW(restore_archive(archive, copy), Error);
}

TEST(Host, CorruptArchiveRejectedAtomically) {
  TempDir tmp;
  auto archive = tmp.path / "x.snap";
  {
    DomainHost h(config_for(tmp.path / "a", "s"));
    h.snapshot(archive);
  }
  auto bytes = fsutil::read_file(archive);
  bytes[bytes.size() - 3] ^= 0x5a;
  fsutil::write_atomic(archive, bytes);
  try {
    restore_archive(archive, tmp.path / "b");
    FAIL() << "restored a damaged archive";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ArchiveCorrupt);
  }
  EXPECT_FALSE(std::filesystem::exists(tmp.path / "b" / "domain.json"));
  fsutil::write_atomic(archive, "garbage");
  EXPECT_THROW(restore_archive(archive, tmp.path / "c"), Error);
}

TEST(Host, SnapshotRefusedWithOpenEditLease) {
  TempDir tmp;
  DomainHost h(config_for(tmp.path / "a", "l"));
  Desk d(h);
  auto site = d.ok("site install data-site --name Vault");
  auto listing = d.ok("ls " + site["storage"].get<std::string>());
  ASSERT_FALSE(listing["items"].empty());
  auto section = listing["items"][0]["id"].get<std::string>();
  auto obj = d.ok("obj put " + section + " note --text hi");
  d.ok("do open " + obj["id"].get<std::string>());
  EXPECT_EQ(d.fails("snapshot " + (tmp.path / "x.snap").string()), "LEASES_OPEN");
}

TEST(Host, BindFailedOnBusyPort) {
  TempDir tmp;
  DomainHost a(config_for(tmp.path / "a", "a"));
  auto addr = a.start_tcp("127.0.0.1:0");
  DomainHost b(config_for(tmp.path / "b", "b"));
  try {
    b.start_tcp(addr);
    FAIL() << "bound twice";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::BindFailed);
  }
}

TEST(Host, TcpAndLoopbackAgree) {
  TempDir tmp;
  DomainHost h(config_for(tmp.path, "x"));
  auto addr = h.start_tcp("127.0.0.1:0");
  Desk tcp(addr, h.owner_credentials());
  auto r = tcp.ok("task new Over TCP");
  EXPECT_TRUE(r.contains("task"));
  Desk loop(h);
  auto tasks = loop.ok("task ls");
  EXPECT_EQ(tasks["tasks"].size(), 1u);
}

namespace {

struct Federation {
  TempDir tmp;
  DomainHost a{config_for(tmp.path / "a", "alice")};
  DomainHost b{config_for(tmp.path / "b", "bob")};
  std::string addr_a = a.start_tcp("127.0.0.1:0");
  std::string addr_b = b.start_tcp("127.0.0.1:0");
  Desk da{a};
  Desk db{b};
  std::string shared_storage, private_storage, shared_section, private_section;

  Federation() {
    auto shared = db.ok("site install data-site --name Shared");
    auto priv = db.ok("site install data-site --name Private");
    shared_storage = shared["storage"];
    private_storage = priv["storage"];
    shared_section = db.ok("ls " + shared_storage)["items"][0]["id"];
    private_section = db.ok("ls " + private_storage)["items"][0]["id"];
    db.ok("obj put " + shared_section + " open-note --text public");
    db.ok("obj put " + private_section + " secret --text hidden");
    da.ok("federate " + addr_b);
    db.ok("grant " + shared_storage + " external:" + a.executive().domain_id().str() + " read");
  }
};

}  // namespace

TEST(Federation, GrantedReadOnlyGrantedStorage) {
  Federation f;
  auto listing = f.da.ok("ls " + f.shared_section);
  ASSERT_EQ(listing["items"].size(), 1u);
  EXPECT_EQ(listing["items"][0]["name"], "open-note");
  EXPECT_EQ(f.da.fails("ls " + f.private_section), "ACCESS_DENIED");
  EXPECT_EQ(f.da.fails("mkdir " + f.shared_section + " nope"), "ACCESS_DENIED");
}

TEST(Federation, CloudMountShowsOnlyGrantedSites) {
  Federation f;
  auto r = f.da.ok("mount cloud " + f.addr_b);
  auto map = f.da.ok("map");
  std::vector<std::string> names;
  for (const auto& n : map["nodes"])
    if (n["kind"] == "site") names.push_back(n["name"]);
  EXPECT_NE(std::find(names.begin(), names.end(), "Shared"), names.end());
  EXPECT_EQ(std::find(names.begin(), names.end(), "Private"), names.end());
  auto entered = f.da.ok("enter Shared");
  auto listing = f.da.ok("ls");
  EXPECT_FALSE(listing["items"].empty());
}

TEST(Federation, DisconnectMakesPeerUnreachable) {
  Federation f;
  f.da.ok("ls " + f.shared_section);
  f.da.ok("disconnect " + f.addr_b);
  auto r = f.da.run("ls " + f.shared_section);
  EXPECT_EQ(r.exit_code, 3);
  f.da.ok("federate " + f.addr_b);
  f.da.ok("ls " + f.shared_section);
}

TEST(Federation, CloudMountUnreachableSource) {
  TempDir tmp;
  DomainHost a(config_for(tmp.path, "a"));
  Desk d(a);
  auto listener = net::tcp_listen("127.0.0.1:0");
  auto dead = net::local_address(listener);
  listener.close();
  EXPECT_EQ(d.fails("mount cloud " + dead), "SOURCE_UNREACHABLE");
}

TEST(Federation, RecoveryKeepsLinksAndGrants) {
  TempDir tmp;
  Json a_state, b_state;
  {
    DomainHost a(config_for(tmp.path / "a", "alice"));
    DomainHost b(config_for(tmp.path / "b", "bob"));
    a.start_tcp("127.0.0.1:0");
    auto addr_b = b.start_tcp("127.0.0.1:0");
    Desk da(a), db(b);
    auto st = db.ok("site install data-site --name Shared")["storage"].get<std::string>();
    da.ok("federate " + addr_b);
    db.ok("grant " + st + " external:" + a.executive().domain_id().str() + " read,write");
    a_state = a.state_json();
    b_state = b.state_json();
  }
  DomainHost a(config_for(tmp.path / "a", "alice"));
  DomainHost b(config_for(tmp.path / "b", "bob"));
  EXPECT_EQ(a.state_json(), a_state);
  EXPECT_EQ(b.state_json(), b_state);
  EXPECT_EQ(a.executive().links().size(), 1u);
  EXPECT_EQ(b.executive().policy().grants().size(), 1u);
}

namespace {

std::string ws_frame(const std::string& payload) {
  std::string out;
  out.push_back(static_cast<char>(0x81));
  const std::uint8_t mask[4] = {0x12, 0x34, 0x56, 0x78};
  if (payload.size() < 126) {
    out.push_back(static_cast<char>(0x80 | payload.size()));
  } else {
    out.push_back(static_cast<char>(0x80 | 126));
    out.push_back(static_cast<char>(payload.size() >> 8));
    out.push_back(static_cast<char>(payload.size() & 0xff));
  }
  out.append(reinterpret_cast<const char*>(mask), 4);
  for (std::size_t i = 0; i < payload.size(); ++i) out.push_back(static_cast<char>(payload[i] ^ mask[i % 4]));
  return out;
}

std::string recv_exact(int fd, std::size_t n) {
  std::string out(n, '\0');
  std::size_t got = 0;
  while (got < n) {
    auto r = ::recv(fd, out.data() + got, n - got, 0);
    if (r <= 0) throw std::runtime_error("closed");
    got += static_cast<std::size_t>(r);
  }
  return out;
}

std::string ws_read(int fd) {
  auto head = recv_exact(fd, 2);
  std::uint64_t len = static_cast<std::uint8_t>(head[1]) & 0x7f;
  if (len == 126) {
    auto ext = recv_exact(fd, 2);
    len = static_cast<std::uint8_t>(ext[0]) << 8 | static_cast<std::uint8_t>(ext[1]);
  } else if (len == 127) {
    auto ext = recv_exact(fd, 8);
    len = 0;
    for (char c : ext) len = len << 8 | static_cast<std::uint8_t>(c);
  }
  return recv_exact(fd, len);
}

}  // namespace

TEST(WebSocket, BridgeCarriesProtocolFrames) {
  TempDir tmp;
  DomainHost h(config_for(tmp.path, "w"));
  auto addr = h.start_ws("127.0.0.1:0");
  auto sock = net::tcp_connect(addr);
  net::write_all(sock.fd(),
                 "GET / HTTP/1.1\r\nHost: x\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
                 "Sec-WebSocket-Key: dGhlIHNhbXBsZSBub25jZQ==\r\nSec-WebSocket-Version: 13\r\n\r\n");
  std::string head;
  while (head.find("\r\n\r\n") == std::string::npos) head += recv_exact(sock.fd(), 1);
  EXPECT_NE(head.find("101"), std::string::npos);
  EXPECT_NE(head.find("s3pPLMBiTxaQ9kYGzzhZRbK+xOo="), std::string::npos);

  Message hello{kProtocolVersion, MsgType::Hello, 1, Json{{"agent", "web"}, {"credentials", h.owner_credentials()}}};
  net::write_all(sock.fd(), ws_frame(encode(hello)));
  auto reply = decode(ws_read(sock.fd()));
  ASSERT_EQ(reply.type, MsgType::Hello);
  auto token = reply.body["session"].get<std::string>();
  net::write_all(sock.fd(), ws_frame(encode(make_command(2, token, "map"))));
  auto render = decode(ws_read(sock.fd()));
  EXPECT_EQ(render.type, MsgType::Render);
  EXPECT_EQ(render.seq, 2u);
  EXPECT_FALSE(validate_tree(render.body["tree"]));
}
