#include <gtest/gtest.h>

#include <thread>

#include "unispace/error.hpp"
#include "unispace/server/host.hpp"
#include "unispace/wire/message.hpp"
#include "unispace/wire/net.hpp"
#include "unispace/wire/render.hpp"

using namespace uni;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error";
  return Errc::Malformed;
}

Json node(const std::string& id, const std::string& kind, std::vector<int> b, Json children = Json::array()) {
  return Json{{"id", id}, {"kind", kind}, {"bounds", b}, {"children", children}};
}

}  // namespace

TEST(Message, EncodeDecodeRoundTrip) {
  auto m = make_command(4, "tok", "enter", "Reports", {{"x", 1}});
  auto frame = encode(m);
  EXPECT_EQ(frame.find('\n'), std::string::npos);
  EXPECT_EQ(decode(frame), m);
  auto e = make_error(5, 4, "NOT_FOUND", "thing");
  EXPECT_EQ(decode(encode(e)), e);
}

TEST(Message, RejectsBadFrames) {
  EXPECT_EQ(code_of([] { decode("nope"); }), Errc::Malformed);
  EXPECT_EQ(code_of([] { decode(R"({"v":2,"type":"command","seq":1,"body":{}})"); }), Errc::UnsupportedVersion);
  EXPECT_EQ(code_of([] { decode(R"({"v":1,"type":"dance","seq":1,"body":{}})"); }), Errc::Malformed);
  EXPECT_EQ(code_of([] { decode(R"({"v":1,"type":"command","seq":-1,"body":{}})"); }), Errc::Malformed);
  EXPECT_EQ(code_of([] { decode(R"({"v":1,"type":"command","seq":1,"body":{"tool":"x"}})"); }), Errc::Malformed);
  EXPECT_EQ(code_of([] { decode(R"({"v":1,"type":"command","seq":1,"body":{"tool":"x","session":"s","zzz":1}})"); }),
            Errc::Malformed);
  EXPECT_EQ(code_of([] { decode(R"({"v":1,"type":"bye","seq":1,"body":{},"extra":0})"); }), Errc::Malformed);
  std::string huge(kMaxFrameBytes + 1, ' ');
  EXPECT_EQ(code_of([&] { decode(huge); }), Errc::Malformed);
}

TEST(Render, ValidatorAcceptsNestedBounds) {
  Json tree{{"depth", 1},
            {"root", node("r", "space", {0, 0, 1000, 1000},
                          Json::array({node("d", "desktop", {0, 100, 1000, 900},
                                            Json::array({node("o", "object", {10, 110, 100, 40})}))}))}};
  EXPECT_FALSE(validate_tree(tree));
  EXPECT_EQ(count_nodes(tree, "object"), 1u);
}

TEST(Render, ValidatorRejects) {
  auto wrap = [](Json root, int depth = 1) { return Json{{"depth", depth}, {"root", root}}; };
  EXPECT_TRUE(validate_tree(wrap(node("r", "desktop", {0, 0, 10, 10}))));
  EXPECT_TRUE(validate_tree(wrap(node("r", "space", {0, 0, 1001, 10}))));
  EXPECT_TRUE(validate_tree(
      wrap(node("r", "space", {0, 0, 100, 100}, Json::array({node("c", "label", {50, 50, 60, 10})})))));
  EXPECT_TRUE(validate_tree(
      wrap(node("r", "space", {0, 0, 100, 100}, Json::array({node("r", "label", {0, 0, 1, 1})})))));
  EXPECT_TRUE(validate_tree(wrap(node("r", "space", {0, 0, 100, 100}), 2)));
  auto with_exit = node("r", "space", {0, 0, 100, 100}, Json::array({node("x", "tool", {0, 0, 10, 10})}));
  with_exit["children"][0]["key"] = "exit";
  EXPECT_FALSE(validate_tree(wrap(with_exit, 2)));
}

TEST(Net, ParseAddress) {
  EXPECT_EQ(net::parse_address("localhost:9"), (std::pair<std::string, int>{"127.0.0.1", 9}));
  EXPECT_EQ(net::parse_address(":0").second, 0);
  EXPECT_EQ(net::parse_address("8080").second, 8080);
  EXPECT_EQ(net::parse_address("").second, kDefaultPort);
  EXPECT_EQ(code_of([] { net::parse_address("h:99999"); }), Errc::InvalidArgument);
}

TEST(Net, LineExchangeOverTcp) {
  auto listener = net::tcp_listen("127.0.0.1:0");
  auto addr = net::local_address(listener);
  std::thread server([&] {
    auto s = net::accept(listener);
    net::LineChannel ch(s.fd());
    while (auto line = ch.read_line()) ch.write_line("echo " + *line);
  });
  {
    net::TcpLink link(addr);
    EXPECT_EQ(link.exchange("a"), "echo a");
    EXPECT_EQ(link.exchange(std::string(100000, 'b')).size(), 100005u);
  }
  server.join();
}

TEST(Net, BindConflictAndUnreachable) {
  auto listener = net::tcp_listen("127.0.0.1:0");
  auto addr = net::local_address(listener);
  EXPECT_EQ(code_of([&] { net::tcp_listen(addr); }), Errc::BindFailed);
  listener.close();
  EXPECT_EQ(code_of([&] { net::TcpLink link(addr, 500); }), Errc::Unreachable);
}

TEST(WebSocket, AcceptKeyMatchesKnownAnswer) {
  EXPECT_EQ(websocket_accept_key("dGhlIHNhbXBsZSBub25jZQ=="), "s3pPLMBiTxaQ9kYGzzhZRbK+xOo=");
}
