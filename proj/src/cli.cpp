#include "unispace/cli/cli.hpp"

#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "unispace/core/lint.hpp"
#include "unispace/error.hpp"

namespace uni::cli {

namespace {

struct Args {
  std::vector<std::string> pos;
  std::map<std::string, std::string> opt;
  std::set<std::string> flags;

  std::string at(std::size_t i, const char* what) const {
    if (i >= pos.size()) fail(Errc::ScriptParse, std::string("missing ") + what);
    return pos[i];
  }
  std::string get(const std::string& k, std::string def = {}) const {
    auto it = opt.find(k);
    return it == opt.end() ? def : it->second;
  }
  bool has(const std::string& k) const { return opt.count(k) > 0; }
};

Args parse(const std::vector<std::string>& argv, std::size_t from, const std::set<std::string>& flag_names = {}) {
  Args a;
  for (std::size_t i = from; i < argv.size(); ++i) {
    const auto& w = argv[i];
    if (w.size() > 2 && w.rfind("--", 0) == 0) {
      auto key = w.substr(2);
      if (auto eq = key.find('='); eq != std::string::npos) {
        a.opt[key.substr(0, eq)] = key.substr(eq + 1);
      } else if (flag_names.count(key)) {
        a.flags.insert(key);
      } else {
        if (i + 1 >= argv.size()) fail(Errc::ScriptParse, "option --" + key + " needs a value");
        a.opt[key] = argv[++i];
      }
    } else {
      a.pos.push_back(w);
    }
  }
  return a;
}

Json split_list(const std::string& text) {
  Json out = Json::array();
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::string summary(const Json& body) {
  if (body.contains("code")) return {};
  if (body.contains("result")) {
    const auto& r = body["result"];
    if (r.is_object() && r.empty()) return {};
    return r.dump(2);
  }
  if (body.contains("data")) {
    auto d = body["data"];
    if (d.contains("bytes")) d["bytes"] = std::to_string(d["bytes"].get<std::string>().size()) + " base64 chars";
    return d.dump(2);
  }
  return {};
}

const std::vector<std::string> kVerbs{
    "task new [name]",
    "task ls [--all]",
    "task switch <task>",
    "task done [task]",
    "task cancel [task]",
    "go <portal|place> [--part p]",
    "enter <place>",
    "exit [--save]",
    "find <q> [--zone z] [--tags a,b]",
    "ls [zone]",
    "obj put <zone> <name> [--text t] [--tags a,b]",
    "obj get <object>",
    "obj mv <object> <dest>",
    "obj cp <object> <dest>",
    "obj rm <object>",
    "obj restore <object>",
    "obj versions <object>",
    "obj edit <object> --text t [--part p]",
    "obj save <object> [--mode new|overwrite]",
    "mkdir <parent> <name>",
    "portal mk <target> [--name n]",
    "portal ls",
    "portal export <portal>",
    "portal import <record-file|record>",
    "map",
    "journal [--task t] [--event e]",
    "site install <template> [--name n] [--partition p]",
    "site rm <site>",
    "lint <file>",
    "grant <storage|zone> <subject> <rights> [--ttl ms]",
    "revoke <grant>",
    "federate <address>",
    "disconnect <peer>",
    "mount cloud|device <source>",
    "snapshot <path>",
    "undo | redo",
    "what <sign>",
    "do <tool> [target] [key=value ...]",
};

}  // namespace

const std::vector<std::string>& verbs() { return kVerbs; }

std::vector<std::string> split_words(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool in_word = false;
  char quote = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quote) {
      if (c == quote) {
        quote = 0;
      } else if (c == '\\' && quote == '"' && i + 1 < line.size()) {
        cur.push_back(line[++i]);
      } else {
        cur.push_back(c);
      }
    } else if (c == '\'' || c == '"') {
      quote = c;
      in_word = true;
    } else if (c == ' ' || c == '\t') {
      if (in_word) out.push_back(std::exchange(cur, {}));
      in_word = false;
    } else {
      cur.push_back(c);
      in_word = true;
    }
  }
  if (quote) fail(Errc::ScriptParse, "unterminated quote");
  if (in_word) out.push_back(cur);
  return out;
}

Json erase_endpoints(Json value) {
  if (value.is_object()) {
    Json out = Json::object();
    for (auto& [k, v] : value.items()) {
      if (k == "endpoint" || k == "address") continue;
      out[k] = erase_endpoints(v);
    }
    return out;
  }
  if (value.is_array()) {
    for (auto& v : value) v = erase_endpoints(v);
  }
  return value;
}

VerbResult lint_file(const std::string& path) {
  VerbResult r;
  Json doc;
  try {
    doc = Json::parse(fsutil::read_file(path));
  } catch (const Error& e) {
    r.exit_code = 1;
    r.error = std::string(e.token()) + " " + e.detail();
    return r;
  } catch (const std::exception& e) {
    r.exit_code = 1;
    r.error = "MALFORMED " + std::string(e.what());
    return r;
  }
  ComplexityLimits limits;
  if (doc.contains("limits")) {
    const auto& l = doc["limits"];
    limits.mental_elements = l.value("mental_elements", limits.mental_elements);
    limits.perceptual_elements = l.value("perceptual_elements", limits.perceptual_elements);
    limits.mental_depth = l.value("mental_depth", limits.mental_depth);
    limits.perceptual_depth = l.value("perceptual_depth", limits.perceptual_depth);
  }
  try {
    auto report = validate_complexity(parse_lint_document(doc), limits);
    auto body = to_json(report);
    r.bodies.push_back(body);
    std::ostringstream text;
    for (const auto& v : report.violations)
      text << to_string(v.rule) << " " << v.path << " " << v.observed << " > " << v.limit << "\n";
    text << report.violations.size() << " violation(s)";
    r.text = text.str();
    if (!report.violations.empty()) {
      r.exit_code = 1;
      r.error = "LINT_FAILED " + std::to_string(report.violations.size()) + " violation(s)";
    }
  } catch (const Error& e) {
    r.exit_code = 1;
    r.error = std::string(e.token()) + " " + e.detail();
  }
  return r;
}

Session::Session(std::unique_ptr<net::FrameLink> link, Json credentials, std::string resume)
    : client_(std::move(link)) {
  client_.hello("uni", credentials, resume);
}

Message Session::send(VerbResult& r, const std::string& tool, Json target, Json params) {
  auto reply = client_.command(tool, std::move(target), std::move(params));
  r.bodies.push_back(reply.body);
  if (reply.type == MsgType::Error) {
    r.exit_code = reply.body.value("code", "") == "UNREACHABLE" ? 3 : 1;
    r.error = reply.body.value("code", "MALFORMED") + " " + reply.body.value("detail", "");
  } else {
    auto s = summary(reply.body);
    if (!s.empty()) r.text += (r.text.empty() ? "" : "\n") + s;
  }
  return reply;
}

VerbResult Session::run(const std::vector<std::string>& argv) {
  VerbResult r;
  if (argv.empty()) fail(Errc::ScriptParse, "empty command");
  const auto& verb = argv[0];
  auto sub = argv.size() > 1 ? argv[1] : std::string();
  auto ok = [&] { return r.exit_code == 0; };
  auto target_or_null = [](const Args& a, std::size_t i) -> Json {
    return i < a.pos.size() ? Json(a.pos[i]) : Json();
  };

  if (verb == "task") {
    auto a = parse(argv, 2, {"all"});
    if (sub == "new") {
      Json p = Json::object();
      if (!a.pos.empty()) p["name"] = a.pos[0];
      send(r, "create_task", nullptr, p);
    } else if (sub == "ls") {
      send(r, "tasks", nullptr, a.flags.count("all") ? Json{{"all", true}} : Json::object());
    } else if (sub == "switch") {
      send(r, "switch_task", a.at(0, "task"));
    } else if (sub == "done") {
      send(r, "complete_task", target_or_null(a, 0));
    } else if (sub == "cancel") {
      send(r, "cancel_task", target_or_null(a, 0));
    } else {
      fail(Errc::ScriptParse, "task new|ls|switch|done|cancel");
    }
  } else if (verb == "go") {
    auto a = parse(argv, 1);
    Json p = Json::object();
    if (a.has("part")) p["part"] = a.get("part");
    send(r, "activate", a.at(0, "portal"), p);
  } else if (verb == "enter") {
    auto a = parse(argv, 1);
    Json p = Json::object();
    if (a.has("part")) p["part"] = a.get("part");
    send(r, "enter", a.at(0, "place"), p);
  } else if (verb == "exit") {
    auto a = parse(argv, 1, {"save"});
    Json p = Json::object();
    if (a.flags.count("save")) p["save"] = true;
    send(r, "exit", nullptr, p);
  } else if (verb == "find") {
    auto a = parse(argv, 1);
    Json p{{"q", a.pos.empty() ? "" : a.pos[0]}};
    if (a.has("zone")) p["zone"] = a.get("zone");
    if (a.has("partition")) p["partition"] = a.get("partition");
    if (a.has("tags")) p["tags"] = split_list(a.get("tags"));
    send(r, "find", nullptr, p);
  } else if (verb == "ls") {
    auto a = parse(argv, 1);
    send(r, "listing", target_or_null(a, 0));
  } else if (verb == "mkdir") {
    auto a = parse(argv, 1);
    send(r, "create_container", a.at(0, "parent"), Json{{"name", a.at(1, "name")}});
  } else if (verb == "obj") {
    auto a = parse(argv, 2);
    if (sub == "put") {
      Json p{{"name", a.at(1, "name")}};
      if (a.has("text")) p["text"] = a.get("text");
      if (a.has("file")) p["text"] = fsutil::read_file(a.get("file"));
      if (a.has("tags")) p["tags"] = split_list(a.get("tags"));
      send(r, "create_object", a.at(0, "zone"), p);
    } else if (sub == "get") {
      send(r, "obj_get", a.at(0, "object"));
    } else if (sub == "mv") {
      send(r, "move", a.at(0, "object"), Json{{"dest", a.at(1, "destination")}});
    } else if (sub == "cp") {
      send(r, "copy", a.at(0, "object"));
      if (ok()) send(r, "insert", a.at(1, "destination"));
    } else if (sub == "rm") {
      send(r, "delete", a.at(0, "object"));
    } else if (sub == "restore") {
      send(r, "restore", a.at(0, "object"));
    } else if (sub == "versions") {
      send(r, "obj_versions", a.at(0, "object"));
    } else if (sub == "edit") {
      auto reply = send(r, "open", a.at(0, "object"));
      if (ok()) {
        Json p{{"lease", reply.body["result"]["lease"]}, {"text", a.get("text")}};
        if (a.has("part")) p["part"] = a.get("part");
        send(r, "edit", nullptr, p);
      }
    } else if (sub == "save") {
      Json p = Json::object();
      if (a.has("mode")) p["mode"] = a.get("mode");
      send(r, "save", a.at(0, "object"), p);
    } else {
      fail(Errc::ScriptParse, "obj put|get|mv|cp|rm|restore|versions|edit|save");
    }
  } else if (verb == "portal") {
    auto a = parse(argv, 2, {"spawn"});
    if (sub == "mk") {
      Json p = Json::object();
      if (a.has("name")) p["name"] = a.get("name");
      if (a.has("part")) p["part"] = a.get("part");
      if (a.flags.count("spawn")) p["spawn_task"] = true;
      send(r, "portal_mk", a.at(0, "target"), p);
    } else if (sub == "ls") {
      send(r, "portal_ls");
    } else if (sub == "export") {
      send(r, "portal_export", a.at(0, "portal"));
      if (ok() && a.has("out")) {
        fsutil::write_atomic(a.get("out"), r.bodies.back()["result"]["record"].get<std::string>());
      }
    } else if (sub == "import") {
      auto src = a.at(0, "record");
      std::string record = src;
      if (!src.empty() && src.front() != '{') record = fsutil::read_file(src);
      while (!record.empty() && (record.back() == '\n' || record.back() == '\r')) record.pop_back();
      send(r, "portal_import", nullptr, Json{{"record", record}});
    } else {
      fail(Errc::ScriptParse, "portal mk|ls|export|import");
    }
  } else if (verb == "map") {
    send(r, "map");
  } else if (verb == "journal") {
    auto a = parse(argv, 1);
    Json p = Json::object();
    if (a.has("task")) p["task"] = a.get("task");
    if (a.has("event")) p["event"] = a.get("event");
    send(r, "journal", nullptr, p);
  } else if (verb == "site") {
    auto a = parse(argv, 2);
    if (sub == "install") {
      Json p{{"template", a.at(0, "template")}};
      if (a.has("name")) p["name"] = a.get("name");
      if (a.has("partition")) p["partition"] = a.get("partition");
      if (a.has("file")) p["template"] = Json::parse(fsutil::read_file(a.get("file")));
      send(r, "install_site", nullptr, p);
    } else if (sub == "rm") {
      send(r, "uninstall_site", a.at(0, "site"));
    } else {
      fail(Errc::ScriptParse, "site install|rm");
    }
  } else if (verb == "lint") {
    auto a = parse(argv, 1);
    return lint_file(a.at(0, "file"));
  } else if (verb == "grant") {
    auto a = parse(argv, 1);
    Json p{{"storage", a.at(0, "storage")}, {"subject", a.at(1, "subject")}, {"rights", split_list(a.at(2, "rights"))}};
    if (a.has("zone")) p["zone"] = a.get("zone");
    if (a.has("ttl")) p["ttl_ms"] = std::stoll(a.get("ttl"));
    send(r, "grant", nullptr, p);
  } else if (verb == "revoke") {
    auto a = parse(argv, 1);
    send(r, "revoke", a.at(0, "grant"));
  } else if (verb == "federate") {
    auto a = parse(argv, 1);
    send(r, "federate", a.at(0, "address"));
  } else if (verb == "disconnect") {
    auto a = parse(argv, 1);
    send(r, "disconnect", a.at(0, "peer"));
  } else if (verb == "mount") {
    auto a = parse(argv, 2);
    if (sub != "cloud" && sub != "device") fail(Errc::ScriptParse, "mount cloud|device <source>");
    send(r, "mount", nullptr, Json{{"kind", sub}, {"source", a.at(0, "source")}});
  } else if (verb == "snapshot") {
    auto a = parse(argv, 1);
    send(r, "snapshot", nullptr, Json{{"path", a.at(0, "path")}});
  } else if (verb == "undo" || verb == "redo") {
    auto a = parse(argv, 1);
    send(r, verb, target_or_null(a, 0));
  } else if (verb == "what") {
    auto a = parse(argv, 1);
    send(r, "what_is_this", target_or_null(a, 0));
  } else if (verb == "do") {
    if (argv.size() < 2) fail(Errc::ScriptParse, "do <tool>");
    Json target;
    Json params = Json::object();
    for (std::size_t i = 2; i < argv.size(); ++i) {
      auto eq = argv[i].find('=');
      if (eq != std::string::npos) {
        auto v = argv[i].substr(eq + 1);
        Json parsed;
        try {
          parsed = Json::parse(v);
        } catch (const std::exception&) {
          parsed = v;
        }
        params[argv[i].substr(0, eq)] = parsed;
      } else if (target.is_null()) {
        target = argv[i];
      } else {
        fail(Errc::ScriptParse, "unexpected word " + argv[i]);
      }
    }
    send(r, argv[1], target, params);
  } else {
    fail(Errc::ScriptParse, "unknown verb " + verb);
  }
  return r;
}

VerbResult Session::run_script(const std::string& text, bool keep_going) {
  // Parse everything first so a bad line fails before any command runs.
  std::vector<std::pair<std::size_t, std::vector<std::string>>> lines;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  static const std::set<std::string> kKnown{"task", "go", "enter", "exit", "find", "ls", "mkdir", "obj",
                                            "portal", "map", "journal", "site", "lint", "grant", "revoke",
                                            "federate", "disconnect", "mount", "snapshot", "undo", "redo",
                                            "what", "do"};
  while (std::getline(in, line)) {
    ++n;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    if (line.back() == '\r') line.pop_back();
    std::vector<std::string> words;
    try {
      words = split_words(line);
    } catch (const Error& e) {
      fail(Errc::ScriptParse, "line " + std::to_string(n) + ": " + e.detail());
    }
    if (!kKnown.count(words[0])) fail(Errc::ScriptParse, "line " + std::to_string(n) + ": unknown verb " + words[0]);
    lines.emplace_back(n, std::move(words));
  }
  VerbResult all;
  for (const auto& [ln, words] : lines) {
    VerbResult r;
    try {
      r = run(words);
    } catch (const Error& e) {
      if (e.code() == Errc::ScriptParse) fail(Errc::ScriptParse, "line " + std::to_string(ln) + ": " + e.detail());
      r.exit_code = 1;
      r.error = std::string(e.token()) + " " + e.detail();
    }
    for (auto& b : r.bodies) all.bodies.push_back(std::move(b));
    if (!r.text.empty()) all.text += (all.text.empty() ? "" : "\n") + r.text;
    if (r.exit_code != 0) {
      if (all.exit_code == 0) {
        all.exit_code = r.exit_code;
        all.error = "line " + std::to_string(ln) + ": " + r.error;
      }
      if (!keep_going) break;
    }
  }
  return all;
}

}  // namespace uni::cli
