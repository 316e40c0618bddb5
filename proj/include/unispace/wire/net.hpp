#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>

#include "unispace/wire/message.hpp"

namespace uni::net {

/// "host:port", ":port" or "port". Host defaults to 127.0.0.1.
std::pair<std::string, int> parse_address(const std::string& addr, int default_port = kDefaultPort);

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket();
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  int fd() const noexcept { return fd_; }
  bool valid() const noexcept { return fd_ >= 0; }
  void shutdown();
  void close();

 private:
  int fd_ = -1;
};

/// Throws Unreachable.
Socket tcp_connect(const std::string& addr, int timeout_ms = 3000);
/// Throws BindFailed.
Socket tcp_listen(const std::string& addr);
/// Bound "host:port" of a listening socket.
std::string local_address(const Socket& s);
/// Returns an invalid socket when the listener was shut down.
Socket accept(const Socket& listener);

void write_all(int fd, std::string_view data);

/// Newline-delimited frames over a socket, with a per-frame size cap.
class LineChannel {
 public:
  explicit LineChannel(int fd, std::size_t max_frame = kMaxFrameBytes) : fd_(fd), max_(max_frame) {}
  /// nullopt on end of stream. Throws Malformed when a frame exceeds the cap.
  std::optional<std::string> read_line();
  void write_line(std::string_view frame);
  /// Bytes received but not yet returned as a line.
  std::string take_buffer() { return std::exchange(buf_, {}); }

 private:
  int fd_;
  std::size_t max_;
  std::string buf_;
};

/// Request/response exchange of frames, one reply frame per request.
class FrameLink {
 public:
  virtual ~FrameLink() = default;
  virtual std::string exchange(const std::string& frame) = 0;
  virtual std::string endpoint() const = 0;
};

class TcpLink : public FrameLink {
 public:
  explicit TcpLink(const std::string& addr, int timeout_ms = 3000);
  std::string exchange(const std::string& frame) override;
  std::string endpoint() const override { return "tcp:" + addr_; }

 private:
  std::string addr_;
  Socket sock_;
  std::unique_ptr<LineChannel> chan_;
};

/// Client side of the protocol over any FrameLink.
class ProtocolClient {
 public:
  explicit ProtocolClient(std::unique_ptr<FrameLink> link) : link_(std::move(link)) {}

  /// Throws AuthFailed (or the server's error code) on rejection.
  /// `resume` asks the server to continue an earlier session.
  Message hello(const std::string& agent, const Json& credentials, const std::string& resume = {});
  /// Returns the reply (render, event or error message).
  Message command(const std::string& tool, Json target = nullptr, Json params = Json::object());
  Message send(Message m);
  void bye();

  const std::string& session() const noexcept { return session_; }
  std::size_t commands_sent() const noexcept { return commands_; }
  FrameLink& link() { return *link_; }

 private:
  std::unique_ptr<FrameLink> link_;
  std::uint64_t seq_ = 0;
  std::string session_;
  std::size_t commands_ = 0;
};

/// Raises an Error carrying the reply's code when `reply` is an error.
void throw_if_error(const Message& reply);

}  // namespace uni::net
