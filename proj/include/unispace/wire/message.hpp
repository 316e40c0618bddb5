#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "unispace/util.hpp"

namespace uni {

inline constexpr int kProtocolVersion = 1;
inline constexpr std::size_t kMaxFrameBytes = 1u << 20;
inline constexpr int kDefaultPort = 7048;

enum class MsgType { Hello, Command, Render, Event, Error, Bye };

std::string_view to_string(MsgType t) noexcept;
std::optional<MsgType> msg_type_from(std::string_view text) noexcept;

struct Message {
  int v = kProtocolVersion;
  MsgType type = MsgType::Command;
  std::uint64_t seq = 0;
  Json body = Json::object();
  bool operator==(const Message&) const = default;
};

/// One frame without the trailing newline. Field order is v, type, seq, body;
/// body keys are sorted.
std::string encode(const Message& m);
/// Throws Malformed or UnsupportedVersion. Unknown fields are rejected.
Message decode(std::string_view frame);

Message make_command(std::uint64_t seq, const std::string& session, const std::string& tool,
                     Json target = nullptr, Json params = Json::object());
Message make_error(std::uint64_t seq, std::optional<std::uint64_t> re, const std::string& code,
                   const std::string& detail);

}  // namespace uni
