#include "unispace/wire/message.hpp"

#include <map>
#include <set>

#include "unispace/error.hpp"

namespace uni {

namespace {

struct BodyShape {
  std::set<std::string> required;
  std::set<std::string> optional;
};

const std::map<MsgType, BodyShape>& shapes() {
  static const std::map<MsgType, BodyShape> kShapes{
      {MsgType::Hello, {{"agent"}, {"credentials", "session", "principal", "domain", "card", "server"}}},
      {MsgType::Command, {{"tool", "session"}, {"target", "params"}}},
      {MsgType::Render, {{"re", "tree"}, {"result"}}},
      {MsgType::Event, {{"event"}, {"re", "data"}}},
      {MsgType::Error, {{"code"}, {"re", "detail"}}},
      {MsgType::Bye, {{}, {"session", "reason"}}},
  };
  return kShapes;
}

void check_body(MsgType type, const Json& body) {
  if (!body.is_object()) fail(Errc::Malformed, "body must be an object");
  const auto& shape = shapes().at(type);
  for (const auto& r : shape.required)
    if (!body.contains(r)) fail(Errc::Malformed, "missing body." + r);
  for (const auto& [k, v] : body.items())
    if (!shape.required.count(k) && !shape.optional.count(k)) fail(Errc::Malformed, "unknown field body." + k);
  auto want_string = [&](const char* k) {
    if (body.contains(k) && !body[k].is_string()) fail(Errc::Malformed, std::string("body.") + k + " must be text");
  };
  auto want_uint = [&](const char* k) {
    if (body.contains(k) && !body[k].is_number_unsigned()) fail(Errc::Malformed, std::string("body.") + k);
  };
  auto want_object = [&](const char* k) {
    if (body.contains(k) && !body[k].is_object()) fail(Errc::Malformed, std::string("body.") + k);
  };
  switch (type) {
    case MsgType::Hello:
      want_string("agent");
      want_object("credentials");
      want_string("session");
      break;
    case MsgType::Command:
      want_string("tool");
      want_string("session");
      want_object("params");
      if (body.contains("target") && !(body["target"].is_null() || body["target"].is_string() ||
                                       body["target"].is_object()))
        fail(Errc::Malformed, "body.target");
      break;
    case MsgType::Render:
      want_uint("re");
      want_object("tree");
      break;
    case MsgType::Event:
      want_string("event");
      want_uint("re");
      break;
    case MsgType::Error:
      want_string("code");
      want_uint("re");
      want_string("detail");
      break;
    case MsgType::Bye:
      want_string("session");
      want_string("reason");
      break;
  }
}

}  // namespace

std::string_view to_string(MsgType t) noexcept {
  switch (t) {
    case MsgType::Hello: return "hello";
    case MsgType::Command: return "command";
    case MsgType::Render: return "render";
    case MsgType::Event: return "event";
    case MsgType::Error: return "error";
    case MsgType::Bye: return "bye";
  }
  return "error";
}

std::optional<MsgType> msg_type_from(std::string_view text) noexcept {
  for (auto t : {MsgType::Hello, MsgType::Command, MsgType::Render, MsgType::Event, MsgType::Error,
                 MsgType::Bye})
    if (to_string(t) == text) return t;
  return std::nullopt;
}

std::string encode(const Message& m) {
  check_body(m.type, m.body);
  std::string out = "{\"v\":" + std::to_string(m.v) + ",\"type\":\"" + std::string(to_string(m.type)) +
                    "\",\"seq\":" + std::to_string(m.seq) + ",\"body\":";
  out += m.body.dump(-1, ' ', false, Json::error_handler_t::replace);
  out += "}";
  return out;
}

Message decode(std::string_view frame) {
  if (frame.size() > kMaxFrameBytes) fail(Errc::Malformed, "frame too large");
  if (!frame.empty() && frame.back() == '\n') frame.remove_suffix(1);
  if (frame.find('\n') != std::string_view::npos) fail(Errc::Malformed, "embedded newline");
  Json j;
  try {
    j = Json::parse(frame);
  } catch (const Json::exception&) {
    fail(Errc::Malformed, "not JSON");
  }
  if (!j.is_object()) fail(Errc::Malformed, "frame must be an object");
  for (const auto& [k, v] : j.items())
    if (k != "v" && k != "type" && k != "seq" && k != "body") fail(Errc::Malformed, "unknown field " + k);
  if (!j.contains("v") || !j.contains("type") || !j.contains("seq"))
    fail(Errc::Malformed, "missing v, type or seq");
  if (!j["v"].is_number_integer()) fail(Errc::Malformed, "v must be an integer");
  if (j["v"].get<std::int64_t>() != kProtocolVersion)
    fail(Errc::UnsupportedVersion, "v=" + j["v"].dump());
  if (!j["type"].is_string()) fail(Errc::Malformed, "type");
  auto type = msg_type_from(j["type"].get<std::string>());
  if (!type) fail(Errc::Malformed, "unknown type");
  if (!j["seq"].is_number_unsigned()) fail(Errc::Malformed, "seq");
  Message m;
  m.type = *type;
  m.seq = j["seq"].get<std::uint64_t>();
  m.body = j.contains("body") ? j["body"] : Json::object();
  check_body(m.type, m.body);
  return m;
}

Message make_command(std::uint64_t seq, const std::string& session, const std::string& tool,
                     Json target, Json params) {
  Message m{kProtocolVersion, MsgType::Command, seq, Json{{"tool", tool}, {"session", session}}};
  if (!target.is_null()) m.body["target"] = std::move(target);
  if (!params.empty()) m.body["params"] = std::move(params);
  return m;
}

Message make_error(std::uint64_t seq, std::optional<std::uint64_t> re, const std::string& code,
                   const std::string& detail) {
  Message m{kProtocolVersion, MsgType::Error, seq, Json{{"code", code}}};
  if (re) m.body["re"] = *re;
  if (!detail.empty()) m.body["detail"] = detail;
  return m;
}

}  // namespace uni
