// uni: command-line interface agent.
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "unispace/cli/cli.hpp"
#include "unispace/error.hpp"
#include "unispace/server/host.hpp"

namespace fs = std::filesystem;

namespace {

std::string env(const char* name) {
  const char* v = std::getenv(name);
  return v ? v : "";
}

fs::path session_file(const std::string& endpoint_key) {
  auto explicit_path = env("UNISPACE_SESSION_FILE");
  if (!explicit_path.empty()) return explicit_path;
  auto home = env("HOME");
  fs::path dir = (home.empty() ? fs::temp_directory_path() : fs::path(home)) / ".unispace";
  fs::create_directories(dir);
  return dir / ("cli-" + uni::sha256_hex(endpoint_key).substr(0, 12) + ".session");
}

int print(const uni::cli::VerbResult& r, bool json) {
  if (json) {
    for (const auto& b : r.bodies) std::cout << b.dump() << "\n";
  } else if (!r.text.empty()) {
    std::cout << r.text << "\n";
  }
  if (r.exit_code != 0) std::cerr << "uni: " << r.error << "\n";
  return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"uni - command-line agent for a personal domain"};
  std::string addr, root, token, seed, session_path;
  bool json = false, logical_clock = false, fresh = false;
  app.add_option("--addr", addr, "server address host:port (default $UNISPACE_ADDR)");
  app.add_option("--root", root, "serve this domain root in-process over the Loopback route");
  app.add_option("--token", token, "owner token (default $UNISPACE_TOKEN or <root>/owner.token)");
  app.add_option("--seed", seed, "seed for a domain created in-process");
  app.add_option("--session-file", session_path, "where the session token is kept between runs");
  app.add_flag("--json", json, "print raw protocol bodies, one per line");
  app.add_flag("--logical-clock", logical_clock, "logical clock for a domain created in-process");
  app.add_flag("--new-session", fresh, "do not resume the saved session");
  app.prefix_command();
  app.footer([] {
    std::string s = "Verbs:\n";
    for (const auto& v : uni::cli::verbs()) s += "  " + v + "\n";
    s += "  script <file> [--keep-going]\n";
    return s;
  }());
  CLI11_PARSE(app, argc, argv);
  auto rest = app.remaining();
  if (rest.empty()) {
    std::cerr << app.help();
    return 2;
  }

  try {
    if (rest[0] == "lint") {
      if (rest.size() < 2) throw uni::Error(uni::Errc::ScriptParse, "lint <file>");
      return print(uni::cli::lint_file(rest[1]), json);
    }

    bool loopback = addr.empty() && !root.empty();
    if (addr.empty() && root.empty()) {
      addr = env("UNISPACE_ADDR");
      if (addr.empty()) {
        root = env("UNISPACE_ROOT");
        loopback = !root.empty();
      }
      if (addr.empty() && root.empty()) addr = "127.0.0.1:" + std::to_string(uni::kDefaultPort);
    }
    if (root.empty()) root = env("UNISPACE_ROOT");
    if (token.empty()) token = env("UNISPACE_TOKEN");

    std::unique_ptr<uni::DomainHost> host;
    std::unique_ptr<uni::net::FrameLink> link;
    std::string endpoint_key;
    if (loopback) {
      uni::ServerConfig cfg;
      cfg.root = root;
      cfg.logical_clock = logical_clock;
      if (!seed.empty()) cfg.seed = uni::seed_from_text(seed);
      host = std::make_unique<uni::DomainHost>(cfg);
      if (token.empty()) token = host->owner_token();
      link = std::make_unique<uni::LoopbackLink>(*host);
      endpoint_key = "root:" + fs::absolute(root).string();
    } else {
      if (token.empty() && !root.empty()) {
        token = uni::fsutil::read_file(fs::path(root) / "owner.token");
        while (!token.empty() && (token.back() == '\n' || token.back() == '\r')) token.pop_back();
      }
      if (token.empty()) {
        std::cerr << "uni: no owner token (use --token, UNISPACE_TOKEN or --root)\n";
        return 2;
      }
      link = std::make_unique<uni::net::TcpLink>(addr);
      endpoint_key = "tcp:" + addr;
    }

    fs::path spath = session_path.empty() ? session_file(endpoint_key) : fs::path(session_path);
    std::string resume;
    if (!fresh && fs::exists(spath)) {
      resume = uni::fsutil::read_file(spath);
      while (!resume.empty() && (resume.back() == '\n' || resume.back() == '\r')) resume.pop_back();
    }
    uni::cli::Session session(std::move(link), uni::Json{{"kind", "owner"}, {"token", token}}, resume);
    if (session.session() != resume) uni::fsutil::write_atomic(spath, session.session() + "\n");

    uni::cli::VerbResult r;
    if (rest[0] == "script") {
      if (rest.size() < 2) throw uni::Error(uni::Errc::ScriptParse, "script <file> [--keep-going]");
      bool keep_going = std::find(rest.begin(), rest.end(), "--keep-going") != rest.end();
      r = session.run_script(uni::fsutil::read_file(rest[1]), keep_going);
    } else {
      r = session.run(rest);
    }
    return print(r, json);
  } catch (const uni::Error& e) {
    std::cerr << "uni: " << e.token() << " " << e.detail() << "\n";
    if (e.code() == uni::Errc::ScriptParse || e.code() == uni::Errc::InvalidArgument) return 2;
    if (e.code() == uni::Errc::Unreachable) return 3;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "uni: " << e.what() << "\n";
    return 1;
  }
}
