#pragma once

#include <array>
#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "unispace/server/executive.hpp"
#include "unispace/wire/net.hpp"

namespace uni {

struct ServerConfig {
  std::filesystem::path root;
  std::string listen;     // TCP address; empty serves Loopback only
  std::string listen_ws;  // websocket bridge address; empty disables it
  ExecutiveConfig exec;
  std::optional<std::array<std::uint8_t, 32>> seed;  // fixes domain and ids
  std::string owner_name = "Owner";
  std::uint32_t autosave_ticks = 0;  // milliseconds between autosaves, 0 disables
  bool logical_clock = false;        // time = command count, for reproducible runs
  bool durable = true;               // fdatasync every log append
};

std::array<std::uint8_t, 32> seed_from_text(const std::string& text);

/// Per-connection protocol state.
struct Connection {
  std::string session;
  std::string peer;  // transport endpoint, for logs only
};

/// One personal domain on disk: the executive, its command log and mirrors,
/// the protocol front end and the federation clients.
class DomainHost {
 public:
  /// Creates a fresh domain in an empty root or recovers an existing one.
  /// Throws LogCorrupt when the command log cannot be replayed.
  explicit DomainHost(ServerConfig config);
  ~DomainHost();
  DomainHost(const DomainHost&) = delete;
  DomainHost& operator=(const DomainHost&) = delete;

  /// Handles one frame and returns exactly one reply frame.
  std::string handle_frame(Connection& conn, std::string_view frame);
  Message handle(Connection& conn, const Message& msg);

  /// Starts the TCP listener; returns the bound address.
  std::string start_tcp(const std::string& addr);
  std::string start_ws(const std::string& addr);
  void start_autosave(std::uint32_t period_ms);
  void stop();

  /// Runs the owner-only autosave pass now.
  void autosave();
  /// Writes a portable archive of the domain root. Throws LeasesOpen.
  void snapshot(const std::filesystem::path& archive);

  const std::string& owner_token() const noexcept { return owner_token_; }
  Json owner_credentials() const { return Json{{"kind", "owner"}, {"token", owner_token_}}; }
  const ServerConfig& config() const noexcept { return config_; }
  std::string tcp_address() const;

  /// Copies taken under the command lock.
  Executive executive() const;
  Json state_json() const;
  std::size_t log_entries() const;

 private:
  struct PeerClient;

  void create_fresh();
  void recover();
  void resync_mirrors();
  void flush_mirrors();
  void append_wal(Json entry);
  void write_snapshot(const std::filesystem::path& archive);  // caller holds mu_
  std::int64_t now();

  Message on_hello(Connection& conn, const Message& msg);
  Message on_command(Connection& conn, const Message& msg);
  Message reply_for(const std::string& token, std::uint64_t re, const Outcome& out);
  Outcome run_host_tool(const std::string& token, const Command& cmd, std::int64_t at);
  Outcome forward(const std::string& token, const RemoteCall& call, std::int64_t at);
  Json federate(const std::string& address, std::int64_t at);
  Json mount_cloud(const std::string& address, std::int64_t at);
  net::ProtocolClient& peer(const std::string& address, bool federate);
  Json peer_credentials(bool federate) const;
  Json apply_logged_effect(const Json& effect, std::int64_t at);
  Outcome dispatch_logged(const std::string& token, const Command& cmd, std::int64_t at);

  void serve_tcp(std::shared_ptr<net::Socket> listener);
  void serve_conn(net::Socket sock);
  void serve_ws(std::shared_ptr<net::Socket> listener);
  void serve_ws_conn(net::Socket sock);

  ServerConfig config_;
  mutable std::mutex mu_;
  Executive ex_;
  std::array<std::uint8_t, 32> seed_{};
  std::string owner_token_;
  std::int64_t clock_ = 0;
  std::uint64_t wal_n_ = 0;
  fsutil::AppendFile wal_;
  std::map<SignId, StorageFiles> storage_files_;
  std::size_t journal_flushed_ = 0;
  fsutil::AppendFile journal_;
  std::string policy_written_;
  std::map<std::string, std::unique_ptr<PeerClient>> peers_;

  std::atomic<bool> stopping_{false};
  std::vector<std::shared_ptr<net::Socket>> listeners_;
  std::string tcp_addr_;
  std::vector<std::thread> threads_;
  std::mutex conn_mu_;
  std::vector<int> conn_fds_;
};

/// Frame link into an in-process host: the Loopback route.
class LoopbackLink : public net::FrameLink {
 public:
  explicit LoopbackLink(DomainHost& host) : host_(host) {}
  std::string exchange(const std::string& frame) override { return host_.handle_frame(conn_, frame); }
  std::string endpoint() const override { return "loopback"; }

 private:
  DomainHost& host_;
  Connection conn_;
};

/// Restores an archive into an empty or absent root, all or nothing.
/// Throws ArchiveCorrupt.
void restore_archive(const std::filesystem::path& archive, const std::filesystem::path& root);
/// Sec-WebSocket-Accept value for a handshake key.
std::string websocket_accept_key(const std::string& key);
/// Serializes a directory tree into the archive format.
std::string pack_tree(const std::filesystem::path& root);

}  // namespace uni
