#include <openssl/sha.h>
#include <sys/socket.h>

#include <algorithm>
#include <cctype>

#include "unispace/error.hpp"
#include "unispace/server/host.hpp"

namespace uni {

namespace {

constexpr std::string_view kGuid = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";

bool read_exact(int fd, std::uint8_t* out, std::size_t n) {
  while (n > 0) {
    auto got = ::recv(fd, out, n, 0);
    if (got <= 0) {
      if (got < 0 && errno == EINTR) continue;
      return false;
    }
    out += got;
    n -= static_cast<std::size_t>(got);
  }
  return true;
}

void send_frame(int fd, std::uint8_t opcode, std::string_view payload) {
  std::string out;
  out.push_back(static_cast<char>(0x80 | opcode));
  if (payload.size() < 126) {
    out.push_back(static_cast<char>(payload.size()));
  } else if (payload.size() <= 0xFFFF) {
    out.push_back(126);
    out.push_back(static_cast<char>(payload.size() >> 8));
    out.push_back(static_cast<char>(payload.size() & 0xFF));
  } else {
    out.push_back(127);
    for (int i = 7; i >= 0; --i) out.push_back(static_cast<char>((payload.size() >> (8 * i)) & 0xFF));
  }
  out.append(payload);
  net::write_all(fd, out);
}

std::string header_value(const std::string& request, std::string name) {
  std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
  std::size_t pos = 0;
  while (pos < request.size()) {
    auto eol = request.find("\r\n", pos);
    if (eol == std::string::npos) eol = request.size();
    auto line = request.substr(pos, eol - pos);
    auto colon = line.find(':');
    if (colon != std::string::npos) {
      auto key = line.substr(0, colon);
      std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
      if (key == name) {
        auto v = line.substr(colon + 1);
        v.erase(0, v.find_first_not_of(" \t"));
        v.erase(v.find_last_not_of(" \t") + 1);
        return v;
      }
    }
    pos = eol + 2;
  }
  return {};
}

}  // namespace

std::string websocket_accept_key(const std::string& key) {
  auto text = key + std::string(kGuid);
  std::array<std::uint8_t, SHA_DIGEST_LENGTH> digest{};
  SHA1(reinterpret_cast<const unsigned char*>(text.data()), text.size(), digest.data());
  return base64_encode(digest);
}

std::string DomainHost::start_ws(const std::string& addr) {
  auto listener = std::make_shared<net::Socket>(net::tcp_listen(addr));
  auto bound = net::local_address(*listener);
  listeners_.push_back(listener);
  std::lock_guard lock(conn_mu_);
  threads_.emplace_back([this, listener] { serve_ws(listener); });
  return bound;
}

void DomainHost::serve_ws(std::shared_ptr<net::Socket> listener) {
  while (!stopping_) {
    auto sock = net::accept(*listener);
    if (!sock.valid()) break;
    std::lock_guard lock(conn_mu_);
    if (stopping_) break;
    conn_fds_.push_back(sock.fd());
    threads_.emplace_back([this, s = std::make_shared<net::Socket>(std::move(sock))]() mutable {
      serve_ws_conn(std::move(*s));
    });
  }
}

// Bridges websocket text messages to the same frames the TCP listener takes.
void DomainHost::serve_ws_conn(net::Socket sock) {
  int fd = sock.fd();
  try {
    std::string request;
    char c;
    while (request.size() < 16384 && request.find("\r\n\r\n") == std::string::npos) {
      auto n = ::recv(fd, &c, 1, 0);
      if (n <= 0) throw std::runtime_error("handshake");
      request.push_back(c);
    }
    auto key = header_value(request, "Sec-WebSocket-Key");
    if (key.empty()) {
      net::write_all(fd, "HTTP/1.1 400 Bad Request\r\nContent-Length: 0\r\n\r\n");
      throw std::runtime_error("not a websocket upgrade");
    }
    net::write_all(fd, "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
                       "Sec-WebSocket-Accept: " +
                           websocket_accept_key(key) + "\r\n\r\n");
    Connection conn;
    std::string message;
    while (!stopping_) {
      std::uint8_t head[2];
      if (!read_exact(fd, head, 2)) break;
      bool fin = head[0] & 0x80;
      std::uint8_t opcode = head[0] & 0x0F;
      bool masked = head[1] & 0x80;
      std::uint64_t len = head[1] & 0x7F;
      if (len == 126 || len == 127) {
        std::uint8_t ext[8];
        std::size_t n = len == 126 ? 2 : 8;
        if (!read_exact(fd, ext, n)) break;
        len = 0;
        for (std::size_t i = 0; i < n; ++i) len = (len << 8) | ext[i];
      }
      if (len + message.size() > kMaxFrameBytes) {
        send_frame(fd, 0x8, "\x03\xf1");
        break;
      }
      std::uint8_t mask[4] = {0, 0, 0, 0};
      if (masked && !read_exact(fd, mask, 4)) break;
      std::string payload(len, '\0');
      if (len > 0 && !read_exact(fd, reinterpret_cast<std::uint8_t*>(payload.data()), len)) break;
      for (std::size_t i = 0; i < payload.size(); ++i) payload[i] = static_cast<char>(payload[i] ^ mask[i % 4]);
      if (opcode == 0x8) {
        send_frame(fd, 0x8, "");
        break;
      }
      if (opcode == 0x9) {
        send_frame(fd, 0xA, payload);
        continue;
      }
      if (opcode == 0xA) continue;
      message += payload;
      if (!fin) continue;
      auto frame = std::exchange(message, {});
      while (!frame.empty() && (frame.back() == '\n' || frame.back() == '\r')) frame.pop_back();
      send_frame(fd, 0x1, handle_frame(conn, frame));
    }
  } catch (const std::exception&) {
  }
  std::lock_guard lock(conn_mu_);
  conn_fds_.erase(std::remove(conn_fds_.begin(), conn_fds_.end(), fd), conn_fds_.end());
}

}  // namespace uni
