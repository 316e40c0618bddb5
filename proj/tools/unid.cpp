// unid: executive server for one personal domain.
#include <csignal>
#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "unispace/error.hpp"
#include "unispace/server/host.hpp"

int main(int argc, char** argv) {
  CLI::App app{"unid - personal domain server"};
  std::string root;
  std::string listen = "127.0.0.1:" + std::to_string(uni::kDefaultPort);
  std::string listen_ws;
  std::string restore;
  std::string seed;
  std::string owner = "Owner";
  bool strict_lint = false;
  bool logical_clock = false;
  bool no_fsync = false;
  std::uint32_t autosave = 0;
  std::uint32_t max_depth = 5;
  app.add_option("--root", root, "domain root directory (default $UNISPACE_ROOT)");
  app.add_option("--listen", listen, "TCP address, host:port");
  app.add_option("--listen-ws", listen_ws, "websocket bridge address, host:port");
  app.add_flag("--strict-lint", strict_lint, "reject site installs that break complexity limits");
  app.add_option("--autosave", autosave, "milliseconds between autosaves of open edits (0 = off)");
  app.add_option("--restore", restore, "restore this archive into --root and exit");
  app.add_option("--seed", seed, "deterministic domain seed (64 hex chars or any text)");
  app.add_option("--owner", owner, "owner name for a new domain");
  app.add_option("--max-depth", max_depth, "maximum container depth for new storages");
  app.add_flag("--logical-clock", logical_clock, "timestamps count commands instead of milliseconds");
  app.add_flag("--no-fsync", no_fsync, "skip fdatasync on log appends");
  CLI11_PARSE(app, argc, argv);

  if (root.empty())
    if (const char* env = std::getenv("UNISPACE_ROOT")) root = env;
  if (root.empty()) {
    std::cerr << "unid: no domain root (use --root or UNISPACE_ROOT)\n";
    return 2;
  }

  try {
    if (!restore.empty()) {
      uni::restore_archive(restore, root);
      std::cout << "restored " << restore << " into " << root << std::endl;
      return 0;
    }

    // Signals are taken synchronously by the main thread.
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    uni::ServerConfig cfg;
    cfg.root = root;
    cfg.listen = listen;
    cfg.listen_ws = listen_ws;
    cfg.exec.strict_lint = strict_lint;
    cfg.exec.max_container_depth = max_depth;
    cfg.owner_name = owner;
    cfg.autosave_ticks = autosave;
    cfg.logical_clock = logical_clock;
    cfg.durable = !no_fsync;
    if (!seed.empty()) cfg.seed = uni::seed_from_text(seed);

    uni::DomainHost host(cfg);
    if (!listen.empty()) std::cout << "listening " << host.start_tcp(listen) << std::endl;
    if (!listen_ws.empty()) std::cout << "websocket " << host.start_ws(listen_ws) << std::endl;
    host.start_autosave(autosave);
    int sig = 0;
    sigwait(&set, &sig);
    host.stop();
    return 0;
  } catch (const uni::Error& e) {
    std::cerr << "unid: " << uni::to_token(e.code()) << " " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "unid: " << e.what() << "\n";
    return 1;
  }
}
