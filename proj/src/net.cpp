#include "unispace/wire/net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "unispace/error.hpp"

namespace uni::net {

std::pair<std::string, int> parse_address(const std::string& addr, int default_port) {
  std::string host = "127.0.0.1";
  std::string port_text;
  auto colon = addr.rfind(':');
  if (colon == std::string::npos) {
    if (!addr.empty() && addr.find_first_not_of("0123456789") == std::string::npos)
      port_text = addr;
    else if (!addr.empty())
      host = addr;
  } else {
    if (colon > 0) host = addr.substr(0, colon);
    port_text = addr.substr(colon + 1);
  }
  if (host == "localhost") host = "127.0.0.1";
  int port = default_port;
  if (!port_text.empty()) {
    try {
      std::size_t used = 0;
      port = std::stoi(port_text, &used);
      if (used != port_text.size() || port < 0 || port > 65535) throw std::invalid_argument("port");
    } catch (const std::exception&) {
      fail(Errc::InvalidArgument, "address " + addr);
    }
  }
  return {host, port};
}

Socket::~Socket() { close(); }

Socket& Socket::operator=(Socket&& o) noexcept {
  if (this != &o) {
    close();
    fd_ = std::exchange(o.fd_, -1);
  }
  return *this;
}

void Socket::shutdown() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void Socket::close() {
  if (fd_ >= 0) ::close(std::exchange(fd_, -1));
}

namespace {

sockaddr_in resolve(const std::string& host, int port, Errc on_fail) {
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(static_cast<std::uint16_t>(port));
  if (host == "0.0.0.0" || host == "*") {
    sa.sin_addr.s_addr = htonl(INADDR_ANY);
    return sa;
  }
  if (inet_pton(AF_INET, host.c_str(), &sa.sin_addr) == 1) return sa;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  addrinfo* res = nullptr;
  if (getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || !res) fail(on_fail, "cannot resolve " + host);
  sa.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  freeaddrinfo(res);
  return sa;
}

}  // namespace

Socket tcp_connect(const std::string& addr, int timeout_ms) {
  std::pair<std::string, int> hp;
  try {
    hp = parse_address(addr);
  } catch (const Error&) {
    fail(Errc::Unreachable, addr);
  }
  auto sa = resolve(hp.first, hp.second, Errc::Unreachable);
  Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!s.valid()) fail(Errc::Unreachable, std::strerror(errno));
  int flags = fcntl(s.fd(), F_GETFL);
  fcntl(s.fd(), F_SETFL, flags | O_NONBLOCK);
  int rc = ::connect(s.fd(), reinterpret_cast<sockaddr*>(&sa), sizeof sa);
  if (rc != 0 && errno != EINPROGRESS) fail(Errc::Unreachable, addr + ": " + std::strerror(errno));
  if (rc != 0) {
    pollfd p{s.fd(), POLLOUT, 0};
    if (::poll(&p, 1, timeout_ms) <= 0) fail(Errc::Unreachable, addr + ": timeout");
    int err = 0;
    socklen_t len = sizeof err;
    getsockopt(s.fd(), SOL_SOCKET, SO_ERROR, &err, &len);
    if (err != 0) fail(Errc::Unreachable, addr + ": " + std::strerror(err));
  }
  fcntl(s.fd(), F_SETFL, flags);
  int one = 1;
  setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return s;
}

Socket tcp_listen(const std::string& addr) {
  std::pair<std::string, int> hp;
  try {
    hp = parse_address(addr);
  } catch (const Error& e) {
    fail(Errc::BindFailed, e.detail());
  }
  auto sa = resolve(hp.first, hp.second, Errc::BindFailed);
  Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!s.valid()) fail(Errc::BindFailed, std::strerror(errno));
  int one = 1;
  setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(s.fd(), reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0)
    fail(Errc::BindFailed, addr + ": " + std::strerror(errno));
  if (::listen(s.fd(), 64) != 0) fail(Errc::BindFailed, addr + ": " + std::strerror(errno));
  return s;
}

std::string local_address(const Socket& s) {
  sockaddr_in sa{};
  socklen_t len = sizeof sa;
  getsockname(s.fd(), reinterpret_cast<sockaddr*>(&sa), &len);
  char buf[INET_ADDRSTRLEN] = {};
  inet_ntop(AF_INET, &sa.sin_addr, buf, sizeof buf);
  return std::string(buf) + ":" + std::to_string(ntohs(sa.sin_port));
}

Socket accept(const Socket& listener) {
  for (;;) {
    int fd = ::accept4(listener.fd(), nullptr, nullptr, SOCK_CLOEXEC);
    if (fd >= 0) {
      int one = 1;
      setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      return Socket(fd);
    }
    if (errno == EINTR || errno == ECONNABORTED) continue;
    return Socket();
  }
}

void write_all(int fd, std::string_view data) {
  while (!data.empty()) {
    auto n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail(Errc::Unreachable, std::strerror(errno));
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

std::optional<std::string> LineChannel::read_line() {
  for (;;) {
    auto nl = buf_.find('\n');
    if (nl != std::string::npos) {
      if (nl > max_) fail(Errc::Malformed, "frame too large");
      std::string line = buf_.substr(0, nl);
      buf_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    if (buf_.size() > max_) fail(Errc::Malformed, "frame too large");
    char chunk[65536];
    auto n = ::recv(fd_, chunk, sizeof chunk, 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      return std::nullopt;
    }
    if (n == 0) return std::nullopt;
    buf_.append(chunk, static_cast<std::size_t>(n));
  }
}

void LineChannel::write_line(std::string_view frame) {
  std::string out(frame);
  out.push_back('\n');
  write_all(fd_, out);
}

TcpLink::TcpLink(const std::string& addr, int timeout_ms)
    : addr_(addr), sock_(tcp_connect(addr, timeout_ms)), chan_(std::make_unique<LineChannel>(sock_.fd())) {}

std::string TcpLink::exchange(const std::string& frame) {
  chan_->write_line(frame);
  auto line = chan_->read_line();
  if (!line) fail(Errc::Unreachable, "connection closed by " + addr_);
  return *line;
}

void throw_if_error(const Message& reply) {
  if (reply.type != MsgType::Error) return;
  auto code = reply.body.value("code", std::string("MALFORMED"));
  throw Error(errc_from_token(code), reply.body.value("detail", std::string()));
}

Message ProtocolClient::send(Message m) {
  m.seq = ++seq_;
  auto reply = decode(link_->exchange(encode(m)));
  return reply;
}

Message ProtocolClient::hello(const std::string& agent, const Json& credentials, const std::string& resume) {
  Message m{kProtocolVersion, MsgType::Hello, 0, Json{{"agent", agent}, {"credentials", credentials}}};
  if (!resume.empty()) m.body["session"] = resume;
  auto reply = send(std::move(m));
  throw_if_error(reply);
  if (reply.type != MsgType::Hello || !reply.body.contains("session")) fail(Errc::Malformed, "hello reply");
  session_ = reply.body["session"].get<std::string>();
  return reply;
}

Message ProtocolClient::command(const std::string& tool, Json target, Json params) {
  ++commands_;
  return send(make_command(0, session_, tool, std::move(target), std::move(params)));
}

void ProtocolClient::bye() {
  if (session_.empty()) return;
  try {
    send(Message{kProtocolVersion, MsgType::Bye, 0, Json{{"session", session_}}});
  } catch (const Error&) {
  }
  session_.clear();
}

}  // namespace uni::net
