#pragma once

#include <memory>
#include <string>
#include <vector>

#include "unispace/wire/net.hpp"

namespace uni::cli {

/// Result of one verb: the reply bodies it produced, in order.
struct VerbResult {
  int exit_code = 0;           // 0 ok, 1 command error, 2 usage, 3 unreachable
  std::vector<Json> bodies;    // raw protocol bodies (render, event or error)
  std::string text;            // human output
  std::string error;           // "TOKEN detail" when exit_code != 0
};

/// Splits a script line into words; single and double quotes group words.
/// Throws ScriptParse on an unterminated quote.
std::vector<std::string> split_words(const std::string& line);

/// Recursively removes endpoint and address fields so transcripts over
/// different transports compare equal.
Json erase_endpoints(Json value);

/// Local check of a structure document; no server needed.
VerbResult lint_file(const std::string& path);

/// One protocol session driven by CLI verbs.
class Session {
 public:
  Session(std::unique_ptr<net::FrameLink> link, Json credentials, std::string resume = {});

  /// Runs one verb (argv without the program name). Throws ScriptParse for
  /// unknown verbs or bad arguments; protocol errors come back in the result.
  VerbResult run(const std::vector<std::string>& argv);
  /// Runs a script: one verb per line. Stops at the first failure unless
  /// keep_going. The transcript is every reply body in order.
  VerbResult run_script(const std::string& text, bool keep_going);

  const std::string& session() const noexcept { return client_.session(); }
  std::size_t commands_sent() const noexcept { return client_.commands_sent(); }
  net::ProtocolClient& client() noexcept { return client_; }

 private:
  Message send(VerbResult& r, const std::string& tool, Json target = nullptr, Json params = Json::object());

  net::ProtocolClient client_;
};

/// Verbs the CLI understands, for usage text.
const std::vector<std::string>& verbs();

}  // namespace uni::cli
