#include <algorithm>
#include <cctype>
#include <functional>
#include <sstream>

#include "unispace/core/domain.hpp"
#include "unispace/core/lint.hpp"
#include "unispace/error.hpp"
#include "unispace/server/executive.hpp"

namespace uni {

namespace {

std::optional<SignId> parse_id(const std::string& text) {
  if (text.find(':') == std::string::npos) return std::nullopt;
  try {
    return SignId::parse(text);
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::string text_param(const Json& p, const char* key, const std::string& def = {}) {
  if (!p.contains(key) || p[key].is_null()) return def;
  if (p[key].is_string()) return p[key].get<std::string>();
  return p[key].dump();
}

bool bool_param(const Json& p, const char* key, bool def) {
  if (!p.contains(key) || p[key].is_null()) return def;
  const auto& v = p[key];
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_number_integer()) return v.get<std::int64_t>() != 0;
  if (v.is_string()) {
    auto s = v.get<std::string>();
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
  }
  fail(Errc::InvalidArgument, std::string(key) + " must be a flag");
}

std::optional<std::int64_t> int_param(const Json& p, const char* key) {
  if (!p.contains(key) || p[key].is_null()) return std::nullopt;
  const auto& v = p[key];
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_string()) {
    try {
      std::size_t used = 0;
      auto s = v.get<std::string>();
      auto n = std::stoll(s, &used);
      if (used == s.size()) return n;
    } catch (const std::exception&) {
    }
  }
  fail(Errc::InvalidArgument, std::string(key) + " must be an integer");
}

PropertyMap map_param(const Json& p, const char* key) {
  PropertyMap out;
  if (!p.contains(key) || p[key].is_null()) return out;
  if (!p[key].is_object()) fail(Errc::InvalidArgument, std::string(key) + " must be an object");
  for (const auto& [k, v] : p[key].items()) out[k] = v.is_string() ? v.get<std::string>() : v.dump();
  return out;
}

std::vector<std::string> list_param(const Json& p, const char* key) {
  std::vector<std::string> out;
  if (!p.contains(key) || p[key].is_null()) return out;
  if (p[key].is_array()) {
    for (const auto& v : p[key]) out.push_back(v.is_string() ? v.get<std::string>() : v.dump());
  } else {
    std::stringstream ss(text_param(p, key));
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool matches(const std::string& hay, const std::string& needle) {
  return needle.empty() || lower(hay).find(lower(needle)) != std::string::npos;
}

const std::set<std::string>& read_only_tools() {
  static const std::set<std::string> k{
      "what_is_this", "map",        "favorites", "history",   "portal_ls", "portal_export", "journal",
      "tasks",        "listing",      "obj_get",    "obj_versions", "fetch_part", "trash_list", "properties", "structure",
      "templates",    "lint",       "partitions", "policy",    "links",     "peer_sites",    "snapshot"};
  return k;
}

// Tools an external principal may use, with the access right each needs.
const std::map<std::string, std::string>& external_tools() {
  static const std::map<std::string, std::string> k{
      {"enter", "read"},      {"activate", "read"},   {"listing", "read"},
      {"obj_get", "read"},    {"obj_versions", "read"}, {"fetch_part", "read"},
      {"properties", "read"}, {"structure", "read"},  {"what_is_this", "read"},
      {"find", "read"},       {"view", "read"},       {"close", "read"},
      {"create_container", "write"}, {"create_object", "write"}, {"open", "write"},
      {"edit", "write"},      {"save", "write"},      {"restore_version", "write"},
      {"move", "move"},       {"delete", "delete"},   {"restore", "delete"},
      {"peer_sites", "read"}, {"exit", "read"},      {"select", "read"},
  };
  return k;
}

}  // namespace

bool Executive::read_only(const std::string& tool) { return read_only_tools().count(tool) > 0; }

/// One command against one executive.
class Dispatcher {
 public:
  Dispatcher(Executive& e, SessionState& s, const Command& c, std::int64_t at)
      : e_(e), s_(s), cmd_(c), p_(c.params.is_object() ? c.params : Json::object()), at_(at) {}

  Outcome run();

 private:
  // --- resolution -------------------------------------------------------
  bool owner() const { return s_.principal.is_owner(); }
  const Frame& cur() const { return s_.location.current(); }
  bool has_target() const { return !cmd_.target.is_null() && !(cmd_.target.is_string() && cmd_.target.get<std::string>().empty()); }
  SignId target() const {
    if (!has_target()) fail(Errc::InvalidArgument, cmd_.tool + " needs a target");
    if (!cmd_.target.is_string()) fail(Errc::InvalidArgument, "target must be an id or a name");
    return resolve(cmd_.target.get<std::string>());
  }
  SignId resolve(const std::string& text) const;
  std::optional<SignId> cur_site() const { return e_.site_of(cur().space); }
  const Site& site_or_system() const {
    auto sid = cur_site();
    return e_.domain_.sites.at(sid ? *sid : e_.domain_.system_site);
  }
  const Workplace* cur_workplace() const;
  SignId cur_storage() const;
  SignId storage_for(const SignId& item) const {
    auto st = e_.storage_holding(item);
    if (!st) fail(Errc::NotFound, item.str());
    return *st;
  }
  const Workplace& system_workplace(WorkplaceRole role) const {
    const auto& sys = e_.domain_.sites.at(e_.domain_.system_site);
    for (const auto& w : sys.workplaces)
      if (w.role == role) return w;
    fail(Errc::NotFound, "system workplace");
  }
  std::optional<SignId> current_zone() const {
    const auto& sp = cur().space;
    if (sp.kind == TargetKind::StorageSection || sp.kind == TargetKind::Container) return sp.target;
    return std::nullopt;
  }

  // --- access -----------------------------------------------------------
  Decision authorize(const std::string& op, const SignId& storage, std::optional<SignId> item = {}) const;
  Decision require(const std::string& op, const SignId& storage, std::optional<SignId> item = {}) const {
    auto d = authorize(op, storage, item);
    if (!d.allow) fail(Errc::AccessDenied, op + " " + d.reason);
    return d;
  }
  void owner_only() const {
    if (!owner()) fail(Errc::AccessDenied, cmd_.tool + " is owner-only");
  }
  Storage& write(const std::string& op, const SignId& storage, std::optional<SignId> item = {}) {
    return e_.storage_mut(storage, require(op, storage, item));
  }
  const Storage& read(const SignId& storage, std::optional<SignId> item = {}) const {
    require("read", storage, item);
    return e_.storages_.at(storage);
  }

  // --- navigation -------------------------------------------------------
  void remember_space(bool journal);
  void push(const PortalTarget& t, const SignId& entry);
  const Portal* portal_for_site(const SignId& site) const;

  // --- tools --------------------------------------------------------------
  Outcome t_system();
  Outcome t_site();
  Outcome t_what_is_this();
  Outcome t_find();
  Outcome t_select();
  Outcome t_history_op(const std::string& which);
  Outcome t_save();
  Outcome t_command();
  Outcome t_create_task();
  Outcome t_complete_task();
  Outcome t_exit();
  Outcome t_enter();
  Outcome t_activate();
  Outcome t_switch_task();
  Outcome t_spawn_subtask();
  Outcome t_return();
  Outcome t_cancel_task();
  Outcome t_journal();
  Outcome t_tasks();
  Outcome t_map();
  Outcome t_favorites(bool mark);
  Outcome t_history();
  Outcome t_portal_mk();
  Outcome t_portal_ls();
  Outcome t_portal_export();
  Outcome t_portal_import();
  Outcome t_listing();
  Outcome t_create_section();
  Outcome t_create_container();
  Outcome t_create_object();
  Outcome t_obj_get();
  Outcome t_obj_versions();
  Outcome t_restore_version();
  Outcome t_open(LeaseMode mode);
  Outcome t_edit();
  Outcome t_close();
  Outcome t_fetch_part();
  Outcome t_trash_list();
  Outcome t_restore();
  Outcome t_properties();
  Outcome t_structure();
  Outcome t_move();
  Outcome t_copy();
  Outcome t_insert();
  Outcome t_delete();
  Outcome t_install_site();
  Outcome t_uninstall_site();
  Outcome t_templates();
  Outcome t_lint();
  Outcome t_mount();
  Outcome t_unmount();
  Outcome t_partitions();
  Outcome t_grant();
  Outcome t_revoke();
  Outcome t_policy();
  Outcome t_disconnect();
  Outcome t_links();
  Outcome t_set_setting();
  Outcome t_peer_sites();
  Outcome t_autosave();
  Outcome t_site_tool(const Tool& tool);

  std::vector<SignId> selection_or_target() const;
  Json object_json(const Storage& st, const DataObject& o, bool with_bytes) const;
  Json zone_listing(const Storage& st, const Zone& z) const;
  void save_dirty(const SignId& storage, SaveMode mode, std::optional<SignId> only_object = {});

  Executive& e_;
  SessionState& s_;
  const Command& cmd_;
  Json p_;
  std::int64_t at_;
};

// ---------------------------------------------------------------------------

SignId Dispatcher::resolve(const std::string& text) const {
  if (auto id = parse_id(text)) return *id;
  if (text == ".") return cur().space.target;
  std::vector<SignId> hits;
  if (!owner()) {
    // Agents of other domains resolve names only inside storages they can read.
    for (const auto& [stid, st] : e_.storages_) {
      for (const auto& [zid, z] : st.zones())
        if (z.name == text && !st.zone_path(zid).empty() && authorize("read", stid, zid).allow) hits.push_back(zid);
      for (const auto& [oid, o] : st.objects())
        if (o.sign.name == text && !st.zone_path(oid).empty() && authorize("read", stid, oid).allow)
          hits.push_back(oid);
    }
    if (hits.size() > 1) fail(Errc::InvalidArgument, "ambiguous name " + text);
    if (hits.empty()) fail(Errc::NotFound, text);
    return hits.front();
  }
  auto settle = [&](const char* what) -> std::optional<SignId> {
    if (hits.empty()) return std::nullopt;
    if (hits.size() > 1) fail(Errc::InvalidArgument, std::string("ambiguous ") + what + " name " + text);
    return hits.front();
  };
  // Open task portals, then other portals.
  for (const auto* t : e_.tasks_.open_tasks())
    if (t->name == text) hits.push_back(t->id);
  if (auto r = settle("task")) return *r;
  for (const auto* p : e_.portals_.find_by_name(text)) {
    if (p->target.kind == TargetKind::Task) continue;
    hits.push_back(p->sign.id);
  }
  if (hits.size() > 1) {
    // Prefer the portal a partition lists for a site.
    std::vector<SignId> listed;
    for (const auto& part : e_.domain_.partitions)
      for (const auto& sp : part.site_portals)
        if (std::find(hits.begin(), hits.end(), sp) != hits.end()) listed.push_back(sp);
    if (listed.size() == 1) hits = listed;
  }
  if (auto r = settle("portal")) return *r;
  for (const auto& part : e_.domain_.partitions)
    if (part.name == text) hits.push_back(part.id);
  if (auto r = settle("partition")) return *r;
  const auto& site = site_or_system();
  if (const auto* w = site.workplace(text)) return w->id;
  for (const auto& [sid, s] : e_.domain_.sites)
    if (s.name == text) hits.push_back(sid);
  if (auto r = settle("site")) return *r;
  for (const auto& [stid, st] : e_.storages_) {
    for (const auto& [zid, z] : st.zones())
      if (z.name == text && !st.zone_path(zid).empty()) hits.push_back(zid);
  }
  if (auto r = settle("zone")) return *r;
  for (const auto& [stid, st] : e_.storages_)
    for (const auto& [oid, o] : st.objects())
      if (o.sign.name == text && !st.zone_path(oid).empty()) hits.push_back(oid);
  if (auto r = settle("object")) return *r;
  fail(Errc::NotFound, text);
}

const Workplace* Dispatcher::cur_workplace() const {
  const auto& sp = cur().space;
  if (sp.endpoint.remote) return nullptr;
  auto sid = cur_site();
  if (!sid) return nullptr;
  const auto& site = e_.domain_.sites.at(*sid);
  if (sp.kind == TargetKind::Workplace) return site.workplace(sp.target);
  WorkplaceRole role = (sp.kind == TargetKind::StorageSection || sp.kind == TargetKind::Container ||
                        sp.kind == TargetKind::ObjectPart)
                           ? WorkplaceRole::DataMgmt
                           : WorkplaceRole::TaskMgmt;
  for (const auto& w : site.workplaces)
    if (w.role == role) return &w;
  return nullptr;
}

SignId Dispatcher::cur_storage() const {
  if (auto z = current_zone()) return storage_for(*z);
  if (cur().space.kind == TargetKind::ObjectPart && !cur().space.endpoint.remote)
    return storage_for(cur().space.target);
  return site_or_system().storage_ref;
}

Decision Dispatcher::authorize(const std::string& op, const SignId& storage, std::optional<SignId> item) const {
  AccessTarget t{storage, {}};
  if (item && *item != storage) {
    const auto& st = e_.storages_.at(storage);
    t.zone_path = st.zone_path(*item);
    if (st.zone(*item)) t.zone_path.push_back(*item);
    if (t.zone_path.empty() && st.in_trash(*item)) t.zone_path = {};
  }
  auto d = e_.policy_.check(s_.principal, op, t, at_);
  if (!d.allow || owner()) return d;
  // Storage-wide decisions for items in the trash need a storage-wide grant.
  return d;
}

const Portal* Dispatcher::portal_for_site(const SignId& site) const {
  for (const auto& part : e_.domain_.partitions)
    for (const auto& pid : part.site_portals)
      if (const auto* p = e_.portals_.find(pid); p && p->target.target == site) return p;
  return nullptr;
}

void Dispatcher::remember_space(bool journal) {
  if (!owner()) return;
  auto f = e_.tasks_.focus();
  if (!f) return;
  const auto& t = e_.tasks_.get(*f);
  if (!is_open(t.state)) return;
  if (journal)
    e_.tasks_.space_entered(*f, cur().space, s_.location.frames(), at_);
  else
    e_.tasks_.set_space(*f, s_.location.frames());
}

void Dispatcher::push(const PortalTarget& t, const SignId& entry) {
  s_.location.push(Frame{t, entry});
}

std::vector<SignId> Dispatcher::selection_or_target() const {
  std::vector<SignId> items;
  if (p_.contains("items"))
    for (const auto& i : list_param(p_, "items")) items.push_back(resolve(i));
  if (items.empty() && has_target()) items.push_back(target());
  if (items.empty()) items = s_.selection;
  if (items.empty()) fail(Errc::InvalidArgument, "nothing selected");
  return items;
}

Json Dispatcher::object_json(const Storage& st, const DataObject& o, bool with_bytes) const {
  Json parts = Json::array();
  const auto& committed = o.current_version().snapshot;
  for (const auto& part : committed) {
    Json pj{{"name", part.name}, {"media", part.media_type}, {"size", part.bytes.size()}};
    if (with_bytes) pj["bytes"] = base64_encode(part.bytes);
    parts.push_back(std::move(pj));
  }
  Json path = Json::array();
  for (const auto& z : st.zone_path(o.sign.id)) path.push_back(st.zone(z)->name);
  return Json{{"id", o.sign.id},
              {"name", o.sign.name},
              {"tags", o.sign.tags},
              {"zone", path},
              {"version", o.current_version().vid},
              {"hash", o.current_version().hash},
              {"parts", parts}};
}

Json Dispatcher::zone_listing(const Storage& st, const Zone& z) const {
  Json items = Json::array();
  for (const auto& c : z.children) {
    if (const auto* o = st.object(c))
      items.push_back({{"id", c}, {"kind", "object"}, {"name", o->sign.name}, {"version", o->current_version().vid}});
    else if (const auto* cz = st.zone(c))
      items.push_back({{"id", c}, {"kind", "container"}, {"name", cz->name}, {"depth", cz->depth}});
  }
  return Json{{"zone", z.id},
              {"name", z.name},
              {"kind", z.kind == ZoneKind::Section ? "section" : "container"},
              {"depth", z.depth},
              {"items", items}};
}

void Dispatcher::save_dirty(const SignId& storage, SaveMode mode, std::optional<SignId> only_object) {
  auto sit = e_.storages_.find(storage);
  if (sit == e_.storages_.end()) return;
  std::vector<std::string> leases;
  for (const auto& [lease, h] : sit->second.handles())
    if (h.mode == LeaseMode::Edit && h.dirty && (!only_object || h.object == *only_object))
      leases.push_back(lease);
  for (const auto& lease : leases) {
    auto obj = sit->second.handle(lease)->object;
    write("write", storage, obj).save(lease, mode, s_.principal.id(), at_);
  }
}

// ---------------------------------------------------------------------------

Outcome Dispatcher::run() {
  const auto& tool = cmd_.tool;
  if (tool.empty()) fail(Errc::UnknownTool, "empty tool");
  if (!owner()) {
    if (!external_tools().count(tool)) {
      if (is_system_tool(tool) || tool == "autosave") fail(Errc::AccessDenied, tool + " is owner-only");
      fail(Errc::UnknownTool, tool);
    }
  }
  if (tool == "autosave") {
    if (!s_.token.empty()) fail(Errc::UnknownTool, tool);
    return t_autosave();
  }
  if (!is_system_tool(tool)) {
    const auto* w = cur_workplace();
    const Tool* found = w ? w->find_tool(tool) : nullptr;
    if (!found) fail(Errc::UnknownTool, tool);
    return t_site_tool(*found);
  }
  static const std::map<std::string, Outcome (Dispatcher::*)()> kTable{
      {"system", &Dispatcher::t_system},
      {"site", &Dispatcher::t_site},
      {"what_is_this", &Dispatcher::t_what_is_this},
      {"find", &Dispatcher::t_find},
      {"select", &Dispatcher::t_select},
      {"save", &Dispatcher::t_save},
      {"command", &Dispatcher::t_command},
      {"create_task", &Dispatcher::t_create_task},
      {"complete_task", &Dispatcher::t_complete_task},
      {"exit", &Dispatcher::t_exit},
      {"enter", &Dispatcher::t_enter},
      {"activate", &Dispatcher::t_activate},
      {"switch_task", &Dispatcher::t_switch_task},
      {"spawn_subtask", &Dispatcher::t_spawn_subtask},
      {"return", &Dispatcher::t_return},
      {"cancel_task", &Dispatcher::t_cancel_task},
      {"journal", &Dispatcher::t_journal},
      {"tasks", &Dispatcher::t_tasks},
      {"map", &Dispatcher::t_map},
      {"history", &Dispatcher::t_history},
      {"portal_mk", &Dispatcher::t_portal_mk},
      {"portal_ls", &Dispatcher::t_portal_ls},
      {"portal_export", &Dispatcher::t_portal_export},
      {"portal_import", &Dispatcher::t_portal_import},
      {"listing", &Dispatcher::t_listing},
      {"create_section", &Dispatcher::t_create_section},
      {"create_container", &Dispatcher::t_create_container},
      {"create_object", &Dispatcher::t_create_object},
      {"obj_get", &Dispatcher::t_obj_get},
      {"obj_versions", &Dispatcher::t_obj_versions},
      {"restore_version", &Dispatcher::t_restore_version},
      {"edit", &Dispatcher::t_edit},
      {"close", &Dispatcher::t_close},
      {"fetch_part", &Dispatcher::t_fetch_part},
      {"trash_list", &Dispatcher::t_trash_list},
      {"restore", &Dispatcher::t_restore},
      {"properties", &Dispatcher::t_properties},
      {"structure", &Dispatcher::t_structure},
      {"move", &Dispatcher::t_move},
      {"copy", &Dispatcher::t_copy},
      {"insert", &Dispatcher::t_insert},
      {"delete", &Dispatcher::t_delete},
      {"install_site", &Dispatcher::t_install_site},
      {"uninstall_site", &Dispatcher::t_uninstall_site},
      {"templates", &Dispatcher::t_templates},
      {"lint", &Dispatcher::t_lint},
      {"mount", &Dispatcher::t_mount},
      {"unmount", &Dispatcher::t_unmount},
      {"partitions", &Dispatcher::t_partitions},
      {"grant", &Dispatcher::t_grant},
      {"revoke", &Dispatcher::t_revoke},
      {"policy", &Dispatcher::t_policy},
      {"disconnect", &Dispatcher::t_disconnect},
      {"links", &Dispatcher::t_links},
      {"set_setting", &Dispatcher::t_set_setting},
      {"peer_sites", &Dispatcher::t_peer_sites},
  };
  Outcome out;
  if (tool == "undo" || tool == "redo" || tool == "repeat") {
    out = t_history_op(tool);
  } else if (tool == "open") {
    out = t_open(p_.contains("mode") ? lease_mode_from(text_param(p_, "mode")) : LeaseMode::Edit);
  } else if (tool == "view") {
    out = t_open(LeaseMode::View);
  } else if (tool == "favorites") {
    out = t_favorites(false);
  } else if (tool == "mark_favorite") {
    out = t_favorites(true);
  } else if (tool == "federate" || tool == "snapshot") {
    fail(Errc::InvalidArgument, tool + " is carried out by the server host");
  } else {
    auto it = kTable.find(tool);
    if (it == kTable.end()) fail(Errc::UnknownTool, tool);
    out = (this->*(it->second))();
  }
  out.mutating = !Executive::read_only(tool);
  return out;
}

// --- task tools ------------------------------------------------------------

Outcome Dispatcher::t_system() {
  owner_only();
  s_.location.reset_to_root();
  return {};
}

Outcome Dispatcher::t_site() {
  owner_only();
  auto sid = cur_site();
  if (!sid || *sid == e_.domain_.system_site) {
    s_.location.reset_to_root();
    return {};
  }
  const auto& frames = s_.location.frames();
  std::size_t keep = frames.size();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (e_.site_of(frames[i].space) == sid) {
      keep = i + 1;
      break;
    }
  }
  s_.location.truncate(keep);
  const auto& site = e_.domain_.sites.at(*sid);
  const Workplace* tm = nullptr;
  for (const auto& w : site.workplaces)
    if (w.role == WorkplaceRole::TaskMgmt) tm = &w;
  if (tm && !(cur().space.kind == TargetKind::Workplace && cur().space.target == tm->id))
    push(PortalTarget{TargetKind::Workplace, tm->id, {}, {}}, {});
  remember_space(false);
  return {};
}

Outcome Dispatcher::t_what_is_this() {
  Outcome out;
  if (cmd_.target.is_string()) {
    auto text = cmd_.target.get<std::string>();
    if (!parse_id(text)) {
      if (const auto* spec = find_system_tool(text)) {
        out.result = Json{{"type", "Tool"}, {"name", std::string(spec->name)}, {"purpose", std::string(spec->purpose)}};
        return out;
      }
      if (const auto* w = cur_workplace())
        if (const auto* t = w->find_tool(text)) {
          out.result = Json{{"type", "Tool"}, {"name", t->sign.name},
                            {"purpose", t->sign.properties.count("purpose") ? t->sign.properties.at("purpose") : ""}};
          return out;
        }
    }
  }
  auto id = has_target() ? target() : cur().space.target;
  std::optional<Description> d;
  if (owner()) d = describe_model_sign(e_.domain_, id);
  if (!d) {
    if (const auto* p = e_.portals_.find(id)) {
      owner_only();
      d = describe(p->sign);
      d->type = "Portal";
      d->purpose = "leads to " + std::string(to_string(p->target.kind));
      if (const auto* info = e_.domain_.site(p->target.target); info && !info->purpose.empty())
        d->purpose += ": " + info->purpose;
    } else if (const auto* t = e_.tasks_.find(id)) {
      owner_only();
      d = Description{"Task", t->name, std::string(to_string(t->state))};
    } else if (auto st = e_.storage_holding(id)) {
      const auto& s = read(*st, id);
      if (const auto* o = s.object(id))
        d = Description{"DataObject", o->sign.name, o->sign.properties.count("purpose") ? o->sign.properties.at("purpose") : ""};
      else if (const auto* z = s.zone(id))
        d = Description{z->kind == ZoneKind::Section ? "Section" : "Container", z->name, "holds data objects"};
      else
        d = Description{"Storage", "storage", "associated storage of a site"};
    }
  }
  if (!d) fail(Errc::NotFound, id.str());
  out.result = Json{{"type", d->type}, {"name", d->name}, {"purpose", d->purpose}};
  return out;
}

Outcome Dispatcher::t_find() {
  auto q = text_param(p_, "q", cmd_.target.is_string() && !has_target() ? "" : text_param(p_, "query"));
  if (q.empty() && cmd_.target.is_string()) q = cmd_.target.get<std::string>();
  auto tags_list = list_param(p_, "tags");
  std::set<std::string> tags(tags_list.begin(), tags_list.end());
  std::optional<SignId> zone;
  std::optional<SignId> partition;
  if (p_.contains("zone") && !p_["zone"].is_null()) {
    auto z = resolve(text_param(p_, "zone"));
    if (e_.domain_.partition(z))
      partition = z;
    else
      zone = z;
  }
  if (p_.contains("partition")) partition = resolve(text_param(p_, "partition"));
  if (partition && !e_.domain_.partition(*partition)) fail(Errc::NotFound, "partition");
  Json hits = Json::array();
  if (owner() && !zone) {
    for (const auto& part : e_.domain_.partitions) {
      if (!part.mounted) continue;
      if (partition && part.id != *partition) continue;
      for (const auto& pid : part.site_portals) {
        const auto* portal = e_.portals_.find(pid);
        if (!portal) continue;
        const auto* site = e_.domain_.site(portal->target.target);
        std::string purpose = site ? site->purpose : portal->sign.properties.count("purpose") ? portal->sign.properties.at("purpose") : "";
        if (!tags.empty()) continue;
        if (matches(portal->sign.name, q) || (!q.empty() && matches(purpose, q)))
          hits.push_back(Json{{"kind", "site"}, {"portal", pid}, {"name", portal->sign.name},
                              {"partition", part.name}, {"endpoint", portal->target.endpoint.str()}});
      }
    }
    if (!partition) {
      for (const auto& [pid, portal] : e_.portals_.all()) {
        if (portal.target.kind == TargetKind::Task || portal.target.kind == TargetKind::Site) continue;
        if (!tags.empty() && !std::all_of(tags.begin(), tags.end(), [&](const std::string& t) { return portal.sign.tags.count(t) > 0; }))
          continue;
        if (matches(portal.sign.name, q))
          hits.push_back(Json{{"kind", "portal"}, {"portal", pid}, {"name", portal.sign.name},
                              {"target", to_string(portal.target.kind)}});
      }
    }
  }
  std::vector<SignId> stores;
  if (zone) {
    stores.push_back(storage_for(*zone));
  } else {
    for (const auto& [sid, site] : e_.domain_.sites) {
      if (partition && site.partition != *partition) continue;
      if (const auto* part = e_.domain_.partition(site.partition); part && !part->mounted) continue;
      stores.push_back(site.storage_ref);
    }
  }
  for (const auto& stid : stores) {
    const auto& st = e_.storages_.at(stid);
    if (zone) require("read", stid, *zone);
    for (const auto& oid : st.search(SearchQuery{q, zone, tags})) {
      if (!authorize("read", stid, oid).allow) continue;
      const auto& o = *st.object(oid);
      Json path = Json::array();
      for (const auto& z : st.zone_path(oid)) path.push_back(st.zone(z)->name);
      hits.push_back(Json{{"kind", "object"}, {"id", oid}, {"name", o.sign.name}, {"zone", path}});
    }
  }
  s_.results = hits;
  if (owner()) {
    const auto& search = system_workplace(WorkplaceRole::Search);
    if (!(cur().space.kind == TargetKind::Workplace && cur().space.target == search.id))
      push(PortalTarget{TargetKind::Workplace, search.id, {}, {}}, {});
    remember_space(false);
  }
  Outcome out;
  out.result = Json{{"hits", hits}, {"count", hits.size()}};
  return out;
}

Outcome Dispatcher::t_select() {
  std::vector<SignId> items;
  if (p_.contains("items"))
    for (const auto& i : list_param(p_, "items")) items.push_back(resolve(i));
  if (has_target()) items.push_back(target());
  s_.selection = items;
  Outcome out;
  out.result = Json{{"selection", items}};
  return out;
}

Outcome Dispatcher::t_history_op(const std::string& which) {
  owner_only();
  Outcome out;
  if (which == "undo") {
    auto f = e_.tasks_.focus();
    const auto& search = system_workplace(WorkplaceRole::Search);
    if (f && e_.tasks_.get(*f).state == TaskState::Searching && cur().space.kind == TargetKind::Workplace &&
        cur().space.target == search.id) {
      e_.tasks_.cancel_creation(*f, at_);
      s_.location.reset_to_root();
      out.result = Json{{"undone", true}, {"cancelled_task", *f}};
      return out;
    }
  }
  auto stid = has_target() ? storage_for(target()) : cur_storage();
  auto& st = write("write", stid);
  bool ok = false;
  if (which == "undo") ok = st.undo();
  else if (which == "redo") ok = st.redo();
  else ok = st.repeat(e_.ids_, at_);
  out.result = Json{{which == "undo" ? "undone" : which == "redo" ? "redone" : "repeated", ok}};
  return out;
}

Outcome Dispatcher::t_save() {
  auto mode = p_.contains("mode") ? save_mode_from(text_param(p_, "mode")) : SaveMode::NewVersion;
  Outcome out;
  if (p_.contains("lease")) {
    auto lease = text_param(p_, "lease");
    std::optional<SignId> stid;
    for (const auto& [id, st] : e_.storages_)
      if (st.handle(lease)) stid = id;
    if (!stid) fail(Errc::StaleHandle, lease);
    auto obj = e_.storages_.at(*stid).handle(lease)->object;
    const auto& v = write("write", *stid, obj).save(lease, mode, s_.principal.id(), at_);
    out.result = Json{{"object", obj}, {"version", v.vid}, {"hash", v.hash}};
    return out;
  }
  if (has_target()) {
    auto obj = target();
    auto stid = storage_for(obj);
    save_dirty(stid, mode, obj);
    out.result = Json{{"object", obj}, {"version", e_.storages_.at(stid).get_object(obj).current_version().vid}};
    return out;
  }
  owner_only();
  save_dirty(cur_storage(), mode);
  out.result = Json{{"saved", true}};
  return out;
}

Outcome Dispatcher::t_command() {
  auto line = text_param(p_, "line", cmd_.target.is_string() ? cmd_.target.get<std::string>() : "");
  std::istringstream in(line);
  std::string word;
  Command sub;
  sub.params = Json::object();
  while (in >> word) {
    if (sub.tool.empty()) {
      sub.tool = word;
    } else if (auto eq = word.find('='); eq != std::string::npos) {
      sub.params[word.substr(0, eq)] = word.substr(eq + 1);
    } else if (sub.target.is_null()) {
      sub.target = word;
    } else {
      fail(Errc::InvalidArgument, "unexpected word " + word);
    }
  }
  if (sub.tool.empty()) fail(Errc::InvalidArgument, "empty command line");
  if (sub.tool == "command") fail(Errc::InvalidArgument, "nested command");
  Dispatcher inner(e_, s_, sub, at_);
  auto out = inner.run();
  out.result = Json{{"tool", sub.tool}, {"result", out.result}};
  return out;
}

Outcome Dispatcher::t_create_task() {
  owner_only();
  auto n = e_.tasks_.tasks().size() + 1;
  auto name = text_param(p_, "name", "Task " + std::to_string(n));
  auto task_id = e_.ids_.next();
  Portal portal;
  portal.sign.id = e_.ids_.next();
  portal.sign.name = name;
  portal.sign.ctype = ConceptualType::Portal;
  portal.sign.properties["kind"] = "task";
  portal.target = PortalTarget{TargetKind::Task, task_id, {}, {}};
  portal.comm_agent = CommAgent{"loopback", ""};
  portal.context_id = task_id.str();
  const auto& search = system_workplace(WorkplaceRole::Search);
  SessionLocation loc(e_.root_target());
  loc.push(Frame{PortalTarget{TargetKind::Workplace, search.id, {}, {}}, portal.sign.id});
  auto portal_id = portal.sign.id;
  e_.portals_.adopt(std::move(portal));
  e_.tasks_.create_task(task_id, portal_id, name, loc.frames(), at_);
  s_.location = loc;
  s_.results = Json::array();
  Outcome out;
  out.result = Json{{"task", task_id}, {"portal", portal_id}, {"name", name}};
  return out;
}

Outcome Dispatcher::t_complete_task() {
  owner_only();
  SignId id;
  if (has_target()) {
    id = target();
    if (const auto* p = e_.portals_.find(id); p && p->target.kind == TargetKind::Task) id = p->target.target;
  } else {
    auto f = e_.tasks_.focus();
    if (!f) fail(Errc::WrongState, "no task in focus");
    id = *f;
  }
  const auto& t = e_.tasks_.get(id);
  bool was_focus = e_.tasks_.focus() == id;
  if (t.state != TaskState::Active && t.state != TaskState::Suspended)
    fail(Errc::WrongState, std::string(to_string(t.state)));
  for (const auto& [cid, c] : e_.tasks_.tasks())
    if (c.parent == id && is_open(c.state)) fail(Errc::OpenChildren, c.name);
  if (t.site && !t.site->endpoint.remote)
    if (const auto* site = e_.domain_.site(t.site->target)) save_dirty(site->storage_ref, SaveMode::Overwrite);
  e_.tasks_.complete_task(id, at_);
  if (was_focus) s_.location.reset_to_root();
  Outcome out;
  out.result = Json{{"task", id}, {"state", "Completed"}};
  return out;
}

Outcome Dispatcher::t_exit() {
  bool save = bool_param(p_, "save", false);
  Outcome out;
  if (!owner()) return out;
  auto f = e_.tasks_.focus();
  if (f) {
    const auto& t = e_.tasks_.get(*f);
    if (t.parent && t.state == TaskState::Active && s_.location.depth() <= t.base_depth) {
      std::optional<PropertyMap> results;
      if (p_.contains("results")) results = map_param(p_, "results");
      if (save && !results) results = PropertyMap{};
      if (save && t.site && !t.site->endpoint.remote)
        if (const auto* site = e_.domain_.site(t.site->target)) save_dirty(site->storage_ref, SaveMode::NewVersion);
      const auto& parent = e_.tasks_.return_from_subtask(*f, results, save, at_);
      s_.location = SessionLocation(e_.root_target());
      for (std::size_t i = 1; i < parent.space.size(); ++i) s_.location.push(parent.space[i]);
      out.result = Json{{"returned_to", parent.id}};
      return out;
    }
  }
  if (s_.location.depth() <= 1) fail(Errc::AtRoot);
  if (save && !cur().space.endpoint.remote) save_dirty(cur_storage(), SaveMode::NewVersion);
  s_.location.pop();
  remember_space(false);
  out.result = Json{{"depth", s_.location.depth()}};
  return out;
}

Outcome Dispatcher::t_enter() {
  auto id = target();
  PortalTarget t;
  t.target = id;
  auto stid = e_.storage_holding(id);
  if (stid && *stid != id) {
    const auto& st = read(*stid, id);
    if (st.zone_path(id).empty()) fail(Errc::NotFound, id.str());
    if (const auto* z = st.zone(id))
      t.kind = z->kind == ZoneKind::Section ? TargetKind::StorageSection : TargetKind::Container;
    else {
      t.kind = TargetKind::ObjectPart;
      t.part = text_param(p_, "part");
      if (!t.part.empty() && !st.object(id)->part(t.part)) fail(Errc::NotFound, "part " + t.part);
    }
  } else {
    if (!owner()) {
      const auto* site = e_.domain_.site(id);
      if (!site) fail(Errc::AccessDenied, "enter " + id.str());
      require("read", site->storage_ref);
      Json secs = Json::array();
      for (const auto* z : e_.storages_.at(site->storage_ref).sections())
        secs.push_back(Json{{"id", z->id}, {"kind", "section"}, {"name", z->name}});
      Outcome out;
      out.result = Json{{"space", PortalTarget{TargetKind::Site, id, {}, {}}}, {"storage", site->storage_ref},
                        {"items", secs}};
      return out;
    }
    if (e_.portals_.find(id)) {
      Command act{"activate", cmd_.target, cmd_.params};
      Dispatcher inner(e_, s_, act, at_);
      return inner.t_activate();
    }
    auto info = e_.lookup(id);
    if (!info) fail(Errc::NotFound, id.str());
    if (info->kind == TargetKind::Task) {
      Command sw{"switch_task", cmd_.target, cmd_.params};
      Dispatcher inner(e_, s_, sw, at_);
      return inner.t_switch_task();
    }
    t.kind = info->kind;
  }
  if (!owner()) {
    Outcome out;
    out.result = Json{{"space", t}};
    if (t.kind == TargetKind::StorageSection || t.kind == TargetKind::Container)
      out.result["listing"] = zone_listing(e_.storages_.at(*stid), *e_.storages_.at(*stid).zone(id));
    return out;
  }
  push(t, {});
  remember_space(true);
  Outcome out;
  out.result = Json{{"space", t}, {"depth", s_.location.depth()}};
  return out;
}

Outcome Dispatcher::t_activate() {
  if (!owner()) {
    Command en{"enter", cmd_.target, cmd_.params};
    Dispatcher inner(e_, s_, en, at_);
    return inner.t_enter();
  }
  auto id = target();
  const Portal* portal = e_.portals_.find(id);
  if (!portal) {
    if (const auto* site = e_.domain_.site(id)) portal = portal_for_site(site->id);
    if (!portal) {
      if (e_.tasks_.find(id)) {
        Command sw{"switch_task", cmd_.target, cmd_.params};
        Dispatcher inner(e_, s_, sw, at_);
        return inner.t_switch_task();
      }
      Command en{"enter", cmd_.target, cmd_.params};
      Dispatcher inner(e_, s_, en, at_);
      return inner.t_enter();
    }
  }
  if (portal->target.kind == TargetKind::Task) {
    Command sw{"switch_task", Json(portal->target.target.str()), cmd_.params};
    Dispatcher inner(e_, s_, sw, at_);
    return inner.t_switch_task();
  }
  if (portal->target.endpoint.remote) fail(Errc::Unreachable, "remote portal needs the server host");
  auto target = uni::resolve(*portal, [this](const PortalTarget& t) { return e_.exists(t); });
  auto portal_id = portal->sign.id;
  Outcome out;
  auto f = e_.tasks_.focus();
  if (f && e_.tasks_.get(*f).state == TaskState::Searching && target.kind == TargetKind::Site) {
    SessionLocation loc(e_.root_target());
    loc.push(Frame{target, portal_id});
    e_.tasks_.bind_task(*f, target, portal->context_id, loc.frames(), at_);
    s_.location = loc;
    e_.push_history(portal_id);
    out.result = Json{{"bound", *f}, {"space", Json(target)}};
    return out;
  }
  if (portal->spawn_task && f && e_.tasks_.get(*f).state == TaskState::Active) {
    auto child = e_.ids_.next();
    auto loc = s_.location;
    loc.push(Frame{target, portal_id});
    e_.tasks_.spawn_subtask(*f, child, portal_id, portal->parameters, loc.frames(), at_);
    s_.location = loc;
    e_.push_history(portal_id);
    out.result = Json{{"spawned", child}, {"space", Json(target)}};
    return out;
  }
  push(target, portal_id);
  remember_space(true);
  e_.push_history(portal_id);
  out.result = Json{{"space", Json(target)}, {"depth", s_.location.depth()}};
  return out;
}

Outcome Dispatcher::t_switch_task() {
  owner_only();
  auto id = target();
  if (const auto* p = e_.portals_.find(id); p && p->target.kind == TargetKind::Task) id = p->target.target;
  const auto& t = e_.tasks_.switch_task(id, at_);
  s_.location = SessionLocation(e_.root_target());
  bool ok = !t.space.empty() && std::all_of(t.space.begin(), t.space.end(), [&](const Frame& fr) { return e_.exists(fr.space); });
  if (ok)
    for (std::size_t i = 1; i < t.space.size(); ++i) s_.location.push(t.space[i]);
  Outcome out;
  out.result = Json{{"task", id}, {"state", to_string(t.state)}};
  return out;
}

Outcome Dispatcher::t_spawn_subtask() {
  owner_only();
  auto f = e_.tasks_.focus();
  if (!f) fail(Errc::WrongState, "no task in focus");
  const auto& parent = e_.tasks_.get(*f);
  if (parent.state != TaskState::Active) fail(Errc::WrongState, std::string(to_string(parent.state)));
  SignId portal_id;
  PortalTarget space = cur().space;
  PropertyMap params = map_param(p_, "params");
  if (has_target()) {
    auto id = target();
    const Portal* portal = e_.portals_.find(id);
    if (!portal) {
      if (const auto* site = e_.domain_.site(id)) portal = portal_for_site(site->id);
    }
    if (!portal) fail(Errc::NotFound, "portal");
    space = uni::resolve(*portal, [this](const PortalTarget& t) { return e_.exists(t); });
    portal_id = portal->sign.id;
    for (const auto& [k, v] : portal->parameters) params.emplace(k, v);
  }
  auto child = e_.ids_.next();
  auto loc = s_.location;
  if (has_target()) loc.push(Frame{space, portal_id});
  e_.tasks_.spawn_subtask(*f, child, portal_id, params, loc.frames(), at_);
  s_.location = loc;
  Outcome out;
  out.result = Json{{"task", child}, {"parent", *f}, {"params", params}};
  return out;
}

Outcome Dispatcher::t_return() {
  owner_only();
  auto f = e_.tasks_.focus();
  if (!f) fail(Errc::WrongState, "no task in focus");
  bool save = bool_param(p_, "save", true);
  std::optional<PropertyMap> results;
  if (p_.contains("results")) results = map_param(p_, "results");
  const auto& t = e_.tasks_.get(*f);
  if (save && t.site && !t.site->endpoint.remote)
    if (const auto* site = e_.domain_.site(t.site->target)) save_dirty(site->storage_ref, SaveMode::NewVersion);
  const auto& parent = e_.tasks_.return_from_subtask(*f, results, save, at_);
  s_.location = SessionLocation(e_.root_target());
  for (std::size_t i = 1; i < parent.space.size(); ++i) s_.location.push(parent.space[i]);
  Outcome out;
  out.result = Json{{"task", parent.id}, {"inbox", parent.inbox}};
  return out;
}

Outcome Dispatcher::t_cancel_task() {
  owner_only();
  SignId id;
  if (has_target()) {
    id = target();
    if (const auto* p = e_.portals_.find(id); p && p->target.kind == TargetKind::Task) id = p->target.target;
  } else {
    auto f = e_.tasks_.focus();
    if (!f) fail(Errc::WrongState, "no task in focus");
    id = *f;
  }
  bool was_focus = e_.tasks_.focus() == id;
  e_.tasks_.cancel_creation(id, at_);
  if (was_focus) s_.location.reset_to_root();
  Outcome out;
  out.result = Json{{"task", id}, {"state", "Cancelled"}};
  return out;
}

Outcome Dispatcher::t_journal() {
  owner_only();
  JournalFilter f;
  if (p_.contains("task")) f.task = resolve(text_param(p_, "task"));
  if (p_.contains("event")) f.event = text_param(p_, "event");
  if (auto a = int_param(p_, "after")) f.after_seq = static_cast<std::uint64_t>(*a);
  if (auto a = int_param(p_, "from")) f.from_at = *a;
  if (auto a = int_param(p_, "to")) f.to_at = *a;
  Json entries = Json::array();
  for (const auto& e : e_.tasks_.journal().query(f)) entries.push_back(e);
  Outcome out;
  out.result = Json{{"entries", entries}, {"count", entries.size()}};
  return out;
}

Outcome Dispatcher::t_tasks() {
  owner_only();
  bool all = bool_param(p_, "all", false);
  auto focus = e_.tasks_.focus();
  Json list = Json::array();
  for (const auto& [id, t] : e_.tasks_.tasks()) {
    if (!all && !is_open(t.state)) continue;
    Json j{{"id", id}, {"name", t.name}, {"state", to_string(t.state)}, {"focus", focus == id}};
    if (t.parent) j["parent"] = *t.parent;
    list.push_back(std::move(j));
  }
  Outcome out;
  out.result = Json{{"tasks", list}};
  return out;
}

// --- search workplace -------------------------------------------------------

Outcome Dispatcher::t_map() {
  owner_only();
  Outcome out;
  out.result = to_json(build_map(e_.domain_, e_.portals_, e_.config_.limits));
  return out;
}

Outcome Dispatcher::t_favorites(bool mark) {
  owner_only();
  auto stid = e_.domain_.sites.at(e_.domain_.system_site).storage_ref;
  const auto& st = e_.storages_.at(stid);
  Json favs = Json::array();
  if (auto it = st.settings().find("favorites"); it != st.settings().end()) favs = Json::parse(it->second);
  if (mark) {
    auto id = target();
    if (!e_.portals_.find(id)) fail(Errc::NotFound, "portal");
    if (std::find(favs.begin(), favs.end(), Json(id.str())) == favs.end()) {
      favs.push_back(id.str());
      write("write", stid).set_meta("favorites", favs.dump());
    }
  }
  Json out_list = Json::array();
  for (const auto& f : favs) {
    auto pid = SignId::parse(f.get<std::string>());
    const auto* p = e_.portals_.find(pid);
    out_list.push_back(Json{{"portal", pid}, {"name", p ? p->sign.name : ""}});
  }
  Outcome out;
  out.result = Json{{"favorites", out_list}};
  return out;
}

Outcome Dispatcher::t_history() {
  owner_only();
  const auto& st = e_.storages_.at(e_.domain_.sites.at(e_.domain_.system_site).storage_ref);
  Json hist = Json::array();
  if (auto it = st.settings().find("history"); it != st.settings().end()) hist = Json::parse(it->second);
  Json out_list = Json::array();
  for (const auto& h : hist) {
    auto pid = SignId::parse(h.get<std::string>());
    const auto* p = e_.portals_.find(pid);
    out_list.push_back(Json{{"portal", pid}, {"name", p ? p->sign.name : ""}});
  }
  Outcome out;
  out.result = Json{{"history", out_list}};
  return out;
}

Outcome Dispatcher::t_portal_mk() {
  owner_only();
  PortalCatalog::Request req;
  req.target = has_target() ? target() : cur().space.target;
  req.name = text_param(p_, "name");
  auto tags = list_param(p_, "tags");
  req.tags = std::set<std::string>(tags.begin(), tags.end());
  req.context = text_param(p_, "context");
  req.parameters = map_param(p_, "params");
  req.spawn_task = bool_param(p_, "spawn_task", false);
  req.part = text_param(p_, "part");
  const auto& p = e_.portals_.create(req, [this](const SignId& id) { return e_.lookup(id); }, e_.ids_);
  Outcome out;
  out.result = Json{{"portal", p.sign.id}, {"name", p.sign.name}, {"target", p.target}};
  return out;
}

Outcome Dispatcher::t_portal_ls() {
  owner_only();
  Json list = Json::array();
  for (const auto& [id, p] : e_.portals_.all()) {
    list.push_back(Json{{"portal", id},
                        {"name", p.sign.name},
                        {"kind", to_string(p.target.kind)},
                        {"target", p.target.target},
                        {"endpoint", p.target.endpoint.str()},
                        {"resolves", e_.exists(p.target)}});
  }
  Outcome out;
  out.result = Json{{"portals", list}};
  return out;
}

Outcome Dispatcher::t_portal_export() {
  owner_only();
  const auto& p = e_.portals_.get(target());
  Outcome out;
  out.result = Json{{"record", export_portal(p, e_.config_.host_address, e_.signing_key())}};
  return out;
}

Outcome Dispatcher::t_portal_import() {
  owner_only();
  std::string record = text_param(p_, "record");
  if (record.empty() && cmd_.target.is_object()) record = cmd_.target.dump();
  if (record.empty()) fail(Errc::BadRecord, "no record");
  auto rec = parse_portal_record(record, e_.trusted_keys());
  auto portal = import_portal(rec, e_.domain_id(), e_.ids_);
  const auto& p = e_.portals_.adopt(std::move(portal));
  Outcome out;
  out.result = Json{{"portal", p.sign.id}, {"name", p.sign.name}, {"target", p.target}};
  return out;
}

// --- data workplace -----------------------------------------------------------

Outcome Dispatcher::t_listing() {
  Outcome out;
  if (has_target() || current_zone()) {
    auto id = has_target() ? target() : *current_zone();
    if (e_.storages_.count(id)) {
      const auto& st = read(id);
      Json secs = Json::array();
      for (const auto* z : st.sections()) secs.push_back(Json{{"id", z->id}, {"kind", "section"}, {"name", z->name}});
      out.result = Json{{"storage", id}, {"items", secs}};
      return out;
    }
    if (const auto* site = e_.domain_.site(id)) {
      require("read", site->storage_ref);
      const auto& st = e_.storages_.at(site->storage_ref);
      Json secs = Json::array();
      for (const auto* z : st.sections()) secs.push_back(Json{{"id", z->id}, {"kind", "section"}, {"name", z->name}});
      out.result = Json{{"storage", site->storage_ref}, {"items", secs}};
      return out;
    }
    auto stid = storage_for(id);
    const auto& st = read(stid, id);
    const auto* z = st.zone(id);
    if (!z || st.zone_path(id).empty()) fail(Errc::NotFound, "zone " + id.str());
    out.result = zone_listing(st, *z);
    return out;
  }
  owner_only();
  auto stid = cur_storage();
  const auto& st = e_.storages_.at(stid);
  Json secs = Json::array();
  for (const auto* z : st.sections()) secs.push_back(Json{{"id", z->id}, {"kind", "section"}, {"name", z->name}});
  out.result = Json{{"storage", stid}, {"items", secs}};
  return out;
}

Outcome Dispatcher::t_create_section() {
  owner_only();
  SignId stid = cur_storage();
  if (has_target()) {
    auto id = target();
    if (const auto* site = e_.domain_.site(id)) stid = site->storage_ref;
    else if (e_.storages_.count(id)) stid = id;
    else fail(Errc::InvalidArgument, "create_section target must be a site or storage");
  }
  auto name = text_param(p_, "name", "Section");
  const auto& z = write("write", stid).create_section(name, e_.ids_);
  Outcome out;
  out.result = Json{{"id", z.id}, {"name", z.name}, {"storage", stid}};
  return out;
}

Outcome Dispatcher::t_create_container() {
  auto parent = has_target() ? target() : current_zone().value_or(SignId{});
  if (parent.is_nil()) fail(Errc::InvalidArgument, "create_container needs a parent zone");
  auto stid = storage_for(parent);
  auto name = text_param(p_, "name", "Container");
  const auto& z = write("write", stid, parent).create_container(parent, name, e_.ids_);
  Outcome out;
  out.result = Json{{"id", z.id}, {"name", z.name}, {"depth", z.depth}};
  return out;
}

Outcome Dispatcher::t_create_object() {
  auto dest = has_target() ? target() : current_zone().value_or(SignId{});
  if (dest.is_nil()) fail(Errc::InvalidArgument, "create_object needs a destination zone");
  auto stid = storage_for(dest);
  NewObject obj;
  obj.name = text_param(p_, "name", "Object");
  auto tags = list_param(p_, "tags");
  obj.tags = std::set<std::string>(tags.begin(), tags.end());
  obj.properties = map_param(p_, "properties");
  if (p_.contains("parts")) {
    if (!p_["parts"].is_array()) fail(Errc::InvalidArgument, "parts must be a list");
    for (const auto& pj : p_["parts"]) {
      if (!pj.is_object()) fail(Errc::InvalidArgument, "part must be an object");
      ObjectPart part;
      part.name = text_param(pj, "name");
      part.media_type = text_param(pj, "media", "application/octet-stream");
      if (pj.contains("bytes")) part.bytes = base64_decode(text_param(pj, "bytes"));
      else part.bytes = to_bytes(text_param(pj, "text"));
      if (part.name.empty()) fail(Errc::InvalidArgument, "part name");
      obj.parts.push_back(std::move(part));
    }
  } else if (p_.contains("text")) {
    obj.parts.push_back(ObjectPart{"content", "text/plain", to_bytes(text_param(p_, "text"))});
  }
  auto id = write("write", stid, dest).put_object(dest, obj, s_.principal.id(), at_, e_.ids_);
  Outcome out;
  out.result = Json{{"id", id}, {"name", obj.name}, {"version", 1}};
  return out;
}

Outcome Dispatcher::t_obj_get() {
  auto id = has_target() ? target() : (cur().space.kind == TargetKind::ObjectPart ? cur().space.target : SignId{});
  if (id.is_nil()) fail(Errc::InvalidArgument, "obj_get needs an object");
  auto stid = storage_for(id);
  const auto& st = read(stid, id);
  const auto* o = st.object(id);
  if (!o) fail(Errc::NotFound, "object " + id.str());
  Outcome out;
  out.result = object_json(st, *o, bool_param(p_, "bytes", true));
  if (st.in_trash(id)) out.result["trash"] = true;
  return out;
}

Outcome Dispatcher::t_obj_versions() {
  auto id = target();
  auto stid = storage_for(id);
  const auto& o = read(stid, id).get_object(id);
  Json list = Json::array();
  for (std::size_t i = 0; i < o.versions.size(); ++i) {
    const auto& v = o.versions[i];
    list.push_back(Json{{"vid", v.vid}, {"hash", v.hash}, {"at", v.created_at}, {"author", v.author},
                        {"current", i == o.current}});
  }
  Outcome out;
  out.result = Json{{"object", id}, {"versions", list}};
  return out;
}

Outcome Dispatcher::t_restore_version() {
  auto id = target();
  auto vid = int_param(p_, "vid");
  if (!vid) fail(Errc::InvalidArgument, "restore_version needs vid");
  auto stid = storage_for(id);
  write("write", stid, id).restore_version(id, static_cast<std::uint64_t>(*vid));
  Outcome out;
  out.result = Json{{"object", id}, {"restored", *vid}};
  return out;
}

Outcome Dispatcher::t_open(LeaseMode mode) {
  auto id = target();
  auto stid = storage_for(id);
  require(mode == LeaseMode::Edit ? "write" : "read", stid, id);
  SignId workplace;
  if (const auto* w = cur_workplace(); w && owner()) workplace = w->id;
  Decision d = authorize(mode == LeaseMode::Edit ? "write" : "read", stid, id);
  auto& st = e_.storage_mut(stid, d);
  const auto& h = st.open(id, workplace, mode, e_.ids_);
  Outcome out;
  out.result = Json{{"lease", h.lease}, {"object", id}, {"mode", to_string(mode)}};
  return out;
}

Outcome Dispatcher::t_edit() {
  auto lease = text_param(p_, "lease");
  std::optional<SignId> stid;
  for (const auto& [id, st] : e_.storages_)
    if (st.handle(lease)) stid = id;
  if (!stid) fail(Errc::StaleHandle, lease);
  auto obj = e_.storages_.at(*stid).handle(lease)->object;
  auto part = text_param(p_, "part", "content");
  Bytes bytes = p_.contains("bytes") ? base64_decode(text_param(p_, "bytes")) : to_bytes(text_param(p_, "text"));
  auto media = text_param(p_, "media", p_.contains("bytes") ? "application/octet-stream" : "text/plain");
  write("write", *stid, obj).edit(lease, part, bytes, media);
  Outcome out;
  out.result = Json{{"lease", lease}, {"object", obj}, {"part", part}, {"size", bytes.size()}};
  return out;
}

Outcome Dispatcher::t_close() {
  auto lease = text_param(p_, "lease", cmd_.target.is_string() ? cmd_.target.get<std::string>() : "");
  std::optional<SignId> stid;
  for (const auto& [id, st] : e_.storages_)
    if (st.handle(lease)) stid = id;
  if (!stid) fail(Errc::StaleHandle, lease);
  auto obj = e_.storages_.at(*stid).handle(lease)->object;
  e_.storage_mut(*stid, require("read", *stid, obj)).close(lease);
  Outcome out;
  out.result = Json{{"closed", lease}};
  return out;
}

Outcome Dispatcher::t_fetch_part() {
  auto id = target();
  auto stid = storage_for(id);
  const auto& o = read(stid, id).get_object(id);
  auto name = text_param(p_, "part");
  const ObjectPart* part = nullptr;
  for (const auto& pt : o.current_version().snapshot)
    if (pt.name == name || (name.empty() && !part)) part = &pt;
  if (!part) fail(Errc::NotFound, "part " + name);
  auto total = static_cast<std::int64_t>(part->bytes.size());
  auto offset = std::clamp<std::int64_t>(int_param(p_, "offset").value_or(0), 0, total);
  constexpr std::int64_t kChunk = 256 * 1024;
  auto length = std::clamp<std::int64_t>(int_param(p_, "length").value_or(kChunk), 0, std::min(kChunk, total - offset));
  Bytes chunk(part->bytes.begin() + offset, part->bytes.begin() + offset + length);
  Outcome out;
  out.result = Json{{"object", id}, {"part", part->name}, {"offset", offset}, {"length", length}, {"total", total}};
  Json data = out.result;
  data["bytes"] = base64_encode(chunk);
  out.event = Json{{"event", "part"}, {"data", data}};
  return out;
}

Outcome Dispatcher::t_trash_list() {
  owner_only();
  auto stid = has_target() ? storage_for(target()) : cur_storage();
  const auto& st = e_.storages_.at(stid);
  Json items = Json::array();
  for (const auto& t : st.trash()) {
    std::string name = st.object(t.item) ? st.object(t.item)->sign.name : st.zone(t.item)->name;
    items.push_back(Json{{"id", t.item}, {"name", name}, {"origin", t.origin}});
  }
  Outcome out;
  out.result = Json{{"storage", stid}, {"items", items}};
  return out;
}

Outcome Dispatcher::t_restore() {
  auto id = target();
  auto stid = storage_for(id);
  if (!e_.storages_.at(stid).in_trash(id)) fail(Errc::NotInTrash, id.str());
  // Restoring is checked against the storage as a whole: the item is nowhere.
  write("delete", stid).restore_from_trash(id);
  Outcome out;
  out.result = Json{{"restored", id}};
  return out;
}

// --- selection tools ------------------------------------------------------------

Outcome Dispatcher::t_properties() {
  auto id = has_target() ? target() : (s_.selection.empty() ? cur().space.target : s_.selection.front());
  Outcome out;
  if (auto st = e_.storage_holding(id); st && *st != id) {
    const auto& s = read(*st, id);
    if (const auto* o = s.object(id)) {
      out.result = o->sign;
      out.result["version"] = o->current_version().vid;
      return out;
    }
    const auto* z = s.zone(id);
    out.result = Json{{"id", z->id}, {"name", z->name}, {"kind", z->kind == ZoneKind::Section ? "section" : "container"}, {"depth", z->depth}};
    return out;
  }
  owner_only();
  if (auto sign = find_model_sign(e_.domain_, id)) {
    out.result = *sign;
    return out;
  }
  if (const auto* p = e_.portals_.find(id)) {
    out.result = *p;
    return out;
  }
  if (const auto* t = e_.tasks_.find(id)) {
    out.result = *t;
    return out;
  }
  fail(Errc::NotFound, id.str());
}

Outcome Dispatcher::t_structure() {
  auto id = has_target() ? target() : (s_.selection.empty() ? cur().space.target : s_.selection.front());
  Outcome out;
  if (auto st = e_.storage_holding(id); st && *st != id) {
    const auto& s = read(*st, id);
    if (const auto* o = s.object(id)) {
      Json parts = Json::array();
      for (const auto& pt : o->current_version().snapshot)
        parts.push_back(Json{{"name", pt.name}, {"media", pt.media_type}, {"size", pt.bytes.size()}});
      out.result = Json{{"id", id}, {"parts", parts}};
      return out;
    }
    out.result = zone_listing(s, *s.zone(id));
    return out;
  }
  owner_only();
  if (const auto* site = e_.domain_.site(id)) {
    Json wps = Json::array();
    for (const auto& w : site->workplaces) {
      Json bars = Json::array();
      for (const auto& b : w.toolbars) {
        Json tools = Json::array();
        for (const auto& t : b.tools) tools.push_back(t.command_key);
        bars.push_back(Json{{"name", b.name}, {"tools", tools}});
      }
      wps.push_back(Json{{"id", w.id}, {"name", w.name}, {"toolbars", bars}});
    }
    out.result = Json{{"id", id}, {"workplaces", wps}, {"storage", site->storage_ref}};
    return out;
  }
  if (const auto* part = e_.domain_.partition(id)) {
    out.result = Json{{"id", id}, {"sites", part->site_portals}};
    return out;
  }
  fail(Errc::NotFound, id.str());
}

Outcome Dispatcher::t_move() {
  auto items = selection_or_target();
  Outcome out;
  if (p_.contains("dest")) {
    auto dest = resolve(text_param(p_, "dest"));
    auto stid = storage_for(dest);
    for (const auto& i : items)
      if (storage_for(i) != stid) fail(Errc::InvalidArgument, "moves stay inside one storage");
    require("write", stid, dest);
    for (const auto& i : items) require("move", stid, i);
    auto d = require("move", stid, items.front());
    auto& st = e_.storage_mut(stid, d);
    for (const auto& i : items) st.move(i, dest);
    out.result = Json{{"moved", items}, {"dest", dest}};
    return out;
  }
  owner_only();
  auto stid = storage_for(items.front());
  for (const auto& i : items)
    if (storage_for(i) != stid) fail(Errc::InvalidArgument, "selection spans storages");
  write("move", stid).cut(items);
  out.result = Json{{"clipboard", items}, {"cut", true}};
  return out;
}

Outcome Dispatcher::t_copy() {
  owner_only();
  auto items = selection_or_target();
  auto stid = storage_for(items.front());
  for (const auto& i : items)
    if (storage_for(i) != stid) fail(Errc::InvalidArgument, "selection spans storages");
  write("read", stid).copy(items);
  Outcome out;
  out.result = Json{{"clipboard", items}, {"cut", false}};
  return out;
}

Outcome Dispatcher::t_insert() {
  owner_only();
  auto dest = has_target() ? target() : current_zone().value_or(SignId{});
  if (dest.is_nil()) fail(Errc::InvalidArgument, "insert needs a destination zone");
  auto stid = storage_for(dest);
  auto created = write("write", stid, dest).paste(dest, e_.ids_);
  Outcome out;
  out.result = Json{{"items", created}, {"dest", dest}};
  return out;
}

Outcome Dispatcher::t_delete() {
  auto items = selection_or_target();
  for (const auto& i : items) require("delete", storage_for(i), i);
  for (const auto& i : items) {
    auto stid = storage_for(i);
    write("delete", stid, i).delete_to_trash(i);
  }
  s_.selection.clear();
  Outcome out;
  out.result = Json{{"trashed", items}};
  return out;
}

// --- install, devices, settings ---------------------------------------------------

Outcome Dispatcher::t_install_site() {
  owner_only();
  SignId partition = e_.domain_.partitions.front().id;
  if (has_target()) partition = target();
  else if (p_.contains("partition")) partition = resolve(text_param(p_, "partition"));
  SiteTemplate tmpl;
  if (p_.contains("template") && p_["template"].is_object())
    tmpl = parse_template(p_["template"]);
  else
    tmpl = builtin_template(text_param(p_, "template", "empty"));
  auto name = text_param(p_, "name", tmpl.name);
  const auto* part = e_.domain_.partition(partition);
  if (!part || !part->mounted) fail(Errc::NotFound, "partition");
  if (part->mount.kind == MountKind::CloudRemote) fail(Errc::AccessDenied, "cloud partitions are managed by their own server");
  auto probe_ids = e_.ids_;
  auto probe = e_.domain_;
  const auto& probe_site = install_site(probe, partition, tmpl, name, probe_ids);
  auto report = validate_complexity(lint_graph(probe_site), e_.config_.limits);
  if (e_.config_.strict_lint && !report.violations.empty())
    fail(Errc::LintFailed, report.violations.front().path + " " + std::string(to_string(report.violations.front().rule)));
  const auto& site = install_site(e_.domain_, partition, tmpl, name, e_.ids_);
  Storage st(site.storage_ref, site.id, StorageConfig{e_.config_.max_container_depth});
  auto site_id = site.id;
  auto storage_id = site.storage_ref;
  e_.storages_.emplace(storage_id, std::move(st));
  for (const auto& sec : tmpl.sections) e_.storages_.at(storage_id).create_section(sec, e_.ids_);
  PortalCatalog::Request req;
  req.target = site_id;
  req.name = name;
  const auto& portal = e_.portals_.create(req, [this](const SignId& id) { return e_.lookup(id); }, e_.ids_);
  e_.domain_.partition(partition)->site_portals.push_back(portal.sign.id);
  Json workplaces = Json::array();
  for (const auto& w : e_.domain_.sites.at(site_id).workplaces) workplaces.push_back(w.name);
  Outcome out;
  out.result = Json{{"site", site_id}, {"portal", portal.sign.id}, {"storage", storage_id},
                    {"workplaces", workplaces}, {"lint", to_json(report)}};
  return out;
}

Outcome Dispatcher::t_uninstall_site() {
  owner_only();
  auto id = target();
  const auto* site = e_.domain_.site(id);
  if (!site) fail(Errc::NotFound, "site");
  if (site->kind == SiteKind::System) fail(Errc::AccessDenied, "the system site stays");
  if (e_.storages_.at(site->storage_ref).has_edit_leases()) fail(Errc::LeasesOpen, site->name);
  for (const auto& [tok, s] : e_.sessions_)
    for (const auto& fr : s.location.frames())
      if (e_.site_of(fr.space) == id) fail(Errc::LeaseConflict, "site is in use by a session");
  auto storage = site->storage_ref;
  for (auto& part : e_.domain_.partitions)
    part.site_portals.erase(std::remove_if(part.site_portals.begin(), part.site_portals.end(),
                                           [&](const SignId& pid) {
                                             const auto* p = e_.portals_.find(pid);
                                             return p && p->target.target == id;
                                           }),
                            part.site_portals.end());
  e_.domain_.sites.erase(id);
  e_.storages_.erase(storage);
  Outcome out;
  out.result = Json{{"removed", id}};
  return out;
}

Outcome Dispatcher::t_templates() {
  owner_only();
  Json list = Json::array();
  for (const auto& n : builtin_template_names()) list.push_back(template_to_json(builtin_template(n)));
  Outcome out;
  out.result = Json{{"templates", list}};
  return out;
}

Outcome Dispatcher::t_lint() {
  owner_only();
  ValidationReport report;
  if (p_.contains("doc")) {
    report = validate_complexity(parse_lint_document(p_["doc"]), e_.config_.limits);
  } else if (has_target()) {
    const auto* site = e_.domain_.site(target());
    if (!site) fail(Errc::NotFound, "site");
    report = validate_complexity(lint_graph(*site), e_.config_.limits);
  } else {
    report = validate_complexity(lint_graph(e_.domain_, e_.portals_), e_.config_.limits);
  }
  Outcome out;
  out.result = to_json(report);
  return out;
}

Outcome Dispatcher::t_mount() {
  owner_only();
  auto kind = text_param(p_, "kind", "device");
  auto source = text_param(p_, "source", cmd_.target.is_string() ? cmd_.target.get<std::string>() : "");
  if (kind == "cloud") fail(Errc::InvalidArgument, "cloud mounts are carried out by the server host");
  if (kind != "device") fail(Errc::InvalidArgument, "mount kind " + kind);
  const auto& p = mount_partition(e_.domain_, MountDescriptor{MountKind::MountedDevice, source}, e_.ids_);
  Outcome out;
  out.result = Json{{"partition", p.id}, {"name", p.name}};
  return out;
}

Outcome Dispatcher::t_unmount() {
  owner_only();
  auto id = target();
  unmount_partition(e_.domain_, id);
  Outcome out;
  out.result = Json{{"unmounted", id}};
  return out;
}

Outcome Dispatcher::t_partitions() {
  owner_only();
  Json list = Json::array();
  for (const auto& p : e_.domain_.partitions) {
    if (!p.mounted && !bool_param(p_, "all", false)) continue;
    list.push_back(Json{{"id", p.id}, {"name", p.name}, {"mount", to_string(p.mount.kind)},
                        {"source", p.mount.source}, {"mounted", p.mounted}, {"sites", p.site_portals.size()}});
  }
  Outcome out;
  out.result = Json{{"partitions", list}};
  return out;
}

namespace {

Principal parse_subject(const std::string& text) {
  // external:<domain>[/agent] | user:<domain>/<key> | local:<site id>
  auto colon = text.find(':');
  if (colon == std::string::npos) fail(Errc::InvalidArgument, "subject " + text);
  auto kind = text.substr(0, colon);
  auto rest = text.substr(colon + 1);
  if (kind == "local") return Principal::local_agent(SignId::parse(rest));
  auto slash = rest.find('/');
  auto dom = DomainId{Uuid::parse(rest.substr(0, slash))};
  std::string agent = slash == std::string::npos ? "system" : rest.substr(slash + 1);
  if (kind == "external") return Principal::external(dom, agent);
  if (kind == "user") return Principal::remote_user(dom, agent);
  fail(Errc::InvalidArgument, "subject kind " + kind);
}

}  // namespace

Outcome Dispatcher::t_grant() {
  Principal subject = p_.contains("subject") && p_["subject"].is_object()
                          ? p_["subject"].get<Principal>()
                          : parse_subject(text_param(p_, "subject"));
  Scope scope;
  auto st_text = text_param(p_, "storage", cmd_.target.is_string() ? cmd_.target.get<std::string>() : "");
  if (st_text.empty()) fail(Errc::InvalidArgument, "grant needs a storage");
  auto sid = resolve(st_text);
  if (const auto* site = e_.domain_.site(sid)) {
    scope.storage = site->storage_ref;
  } else if (e_.storages_.count(sid)) {
    scope.storage = sid;
  } else {
    auto holder = storage_for(sid);
    if (!e_.storages_.at(holder).zone(sid)) fail(Errc::InvalidArgument, "grant scope must be a storage or zone");
    scope.storage = holder;
    scope.zone = sid;
  }
  if (p_.contains("zone")) scope.zone = resolve(text_param(p_, "zone"));
  if (scope.zone && storage_for(*scope.zone) != scope.storage) fail(Errc::InvalidArgument, "zone outside storage");
  auto rights = rights_from(list_param(p_, "rights"));
  std::optional<std::int64_t> expiry = int_param(p_, "expiry");
  if (auto ttl = int_param(p_, "ttl_ms")) expiry = at_ + *ttl;
  const auto& g = e_.policy_.grant(
      s_.principal, subject, scope, rights, expiry, at_, e_.ids_,
      [this](const SignId& storage, const SignId& zone) {
        auto path = e_.storages_.at(storage).zone_path(zone);
        if (e_.storages_.at(storage).zone(zone)) path.push_back(zone);
        return path;
      });
  Json gj = g;
  e_.tasks_.audit(Json{{"action", "grant"}, {"grant", gj}}, at_);
  Outcome out;
  out.result = gj;
  return out;
}

Outcome Dispatcher::t_revoke() {
  auto id = target();
  auto removed = e_.policy_.revoke(s_.principal, id);
  e_.tasks_.audit(Json{{"action", "revoke"}, {"grants", removed}}, at_);
  // Leases held under a revoked grant lapse with it.
  Outcome out;
  out.result = Json{{"revoked", removed}};
  return out;
}

Outcome Dispatcher::t_policy() {
  owner_only();
  Outcome out;
  out.result = to_json(e_.policy_);
  return out;
}

Outcome Dispatcher::t_disconnect() {
  owner_only();
  auto text = text_param(p_, "peer", cmd_.target.is_string() ? cmd_.target.get<std::string>() : "");
  for (auto& [k, l] : e_.links_) {
    if (k == text || l.address == text) {
      l.connected = false;
      Outcome out;
      out.result = Json{{"peer", k}, {"connected", false}};
      return out;
    }
  }
  fail(Errc::NotFound, "link " + text);
}

Outcome Dispatcher::t_links() {
  owner_only();
  Json list = Json::array();
  for (const auto& [k, l] : e_.links_)
    list.push_back(Json{{"peer", k}, {"address", l.address}, {"name", l.remote_card.sign.name},
                        {"connected", l.connected}});
  Outcome out;
  out.result = Json{{"links", list}, {"domain", e_.domain_id().str()}};
  return out;
}

Outcome Dispatcher::t_set_setting() {
  owner_only();
  auto key = text_param(p_, "key");
  if (key.empty()) fail(Errc::InvalidArgument, "setting key");
  auto stid = has_target() ? storage_for(target()) : cur_storage();
  if (const auto* site = has_target() ? e_.domain_.site(target()) : nullptr) stid = site->storage_ref;
  write("write", stid).set_setting(key, text_param(p_, "value"));
  Outcome out;
  out.result = Json{{"storage", stid}, {"key", key}};
  return out;
}

Outcome Dispatcher::t_peer_sites() {
  Outcome out;
  out.result = Json{{"sites", e_.peer_sites(s_.principal, at_)}, {"domain", e_.domain_id().str()},
                    {"card", e_.domain_.owner}};
  return out;
}

Outcome Dispatcher::t_autosave() {
  Json saved = Json::array();
  for (auto& [stid, st] : e_.storages_) {
    std::vector<std::string> leases;
    for (const auto& [lease, h] : st.handles())
      if (h.mode == LeaseMode::Edit && h.dirty) leases.push_back(lease);
    for (const auto& lease : leases) {
      st.save(lease, SaveMode::Overwrite, "autosave", at_);
      saved.push_back(lease);
    }
  }
  Outcome out;
  out.result = Json{{"saved", saved}};
  return out;
}

// Site tools from templates are handled by named in-process agents.
Outcome Dispatcher::t_site_tool(const Tool& tool) {
  owner_only();
  auto agent = tool.sign.agent_ref.value_or("");
  if (agent != "doc") fail(Errc::UnknownTool, tool.command_key + " has no agent");
  const auto* w = cur_workplace();
  auto stid = cur_storage();
  std::string lease = text_param(p_, "lease");
  if (lease.empty()) {
    for (const auto& [l, h] : e_.storages_.at(stid).handles())
      if (h.mode == LeaseMode::Edit && w && h.workplace == w->id) lease = l;
    if (lease.empty())
      for (const auto& [l, h] : e_.storages_.at(stid).handles())
        if (h.mode == LeaseMode::Edit) lease = l;
  }
  if (lease.empty()) fail(Errc::StaleHandle, "open an object for editing first");
  const auto* h = e_.storages_.at(stid).handle(lease);
  if (!h) fail(Errc::StaleHandle, lease);
  const auto& o = e_.storages_.at(stid).get_object(h->object);
  auto dot = tool.command_key.find('.');
  auto part = tool.command_key.substr(0, dot);
  auto verb = dot == std::string::npos ? "" : tool.command_key.substr(dot + 1);
  Outcome out;
  if (verb == "print") {
    std::string text;
    for (const auto& pt : o.parts) text += "[" + pt.name + "]\n" + to_string(pt.bytes) + "\n";
    out.result = Json{{"text", text}};
    return out;
  }
  auto text = text_param(p_, "text");
  std::string content = text;
  if (verb != "title" && verb != "format") {
    if (const auto* existing = o.part(part)) content = to_string(existing->bytes) + text + "\n";
    else content = text + "\n";
  }
  auto obj = h->object;
  write("write", stid, obj).edit(lease, part, to_bytes(content), "text/plain");
  out.result = Json{{"object", obj}, {"part", part}, {"size", content.size()}};
  return out;
}

// ---------------------------------------------------------------------------

Outcome Executive::dispatch(const std::string& token, const Command& cmd, std::int64_t at) {
  if (token.empty()) {
    SessionState internal;
    internal.location = SessionLocation(root_target());
    Dispatcher d(*this, internal, cmd, at);
    return d.run();
  }
  auto& s = session_mut(token);
  Dispatcher d(*this, s, cmd, at);
  return d.run();
}

std::optional<RemoteCall> Executive::remote_for(const std::string& token, const Command& cmd) const {
  const auto* s = session(token);
  if (!s || !s->principal.is_owner()) return std::nullopt;
  static const std::set<std::string> kLocal{"system", "site", "exit", "create_task", "complete_task",
                                            "switch_task", "cancel_task", "journal", "tasks", "map", "favorites",
                                            "history", "portal_ls", "portal_export", "portal_import",
                                            "mark_favorite", "portal_mk", "select", "links", "policy",
                                            "partitions", "templates", "disconnect", "federate",
                                            "snapshot", "grant", "revoke", "mount", "unmount",
                                            "install_site", "uninstall_site", "lint", "command",
                                            "set_setting", "return", "spawn_subtask"};
  auto remote_link = [&](const DomainId& peer, const std::string& fallback) -> std::string {
    const auto* l = link_for(peer);
    if (!l) fail(Errc::Unreachable, "no federation link to " + peer.str());
    if (!l->connected) fail(Errc::Unreachable, "link to " + peer.str() + " is disconnected");
    return l->address.empty() ? fallback : l->address;
  };
  std::optional<SignId> tid;
  if (cmd.target.is_string()) {
    try {
      tid = SignId::parse(cmd.target.get<std::string>());
    } catch (const Error&) {
    }
    if (!tid) {
      for (const auto* p : portals_.find_by_name(cmd.target.get<std::string>()))
        if (p->target.endpoint.remote) tid = p->sign.id;
    }
  }
  if (tid && (cmd.tool == "activate" || cmd.tool == "enter" || cmd.tool == "spawn_subtask")) {
    if (const auto* p = portals_.find(*tid); p && p->target.endpoint.remote) {
      if (p->comm_agent.protocol != "tcp" || p->comm_agent.address.empty()) fail(Errc::NoRoute, p->sign.name);
      auto addr = remote_link(p->target.target.domain, p->comm_agent.address);
      return RemoteCall{p->target.target.domain, addr, Command{"enter", Json(p->target.target.str()), Json::object()}, p->sign.id};
    }
  }
  if (kLocal.count(cmd.tool)) return std::nullopt;
  if (tid && tid->domain != domain_id() && !portals_.find(*tid)) {
    auto addr = remote_link(tid->domain, "");
    return RemoteCall{tid->domain, addr, cmd, std::nullopt};
  }
  const auto& space = s->location.current().space;
  if (space.endpoint.remote) {
    auto addr = remote_link(space.target.domain, space.endpoint.address);
    Command fwd = cmd;
    if (fwd.target.is_null()) fwd.target = space.target.str();
    return RemoteCall{space.target.domain, addr, fwd, std::nullopt};
  }
  return std::nullopt;
}

Json Executive::apply_effect(const Json& effect, std::int64_t at) {
  auto kind = effect.at("kind").get<std::string>();
  if (kind == "link_add") {
    FederationLink l = effect.at("link").get<FederationLink>();
    links_[l.peer.str()] = l;
    return Json{{"peer", l.peer.str()}, {"connected", l.connected}};
  }
  if (kind == "link_state") {
    auto it = links_.find(effect.at("peer").get<std::string>());
    if (it == links_.end()) fail(Errc::NotFound, "link");
    it->second.connected = effect.at("connected").get<bool>();
    if (effect.contains("address")) it->second.address = effect["address"].get<std::string>();
    return Json{{"peer", it->first}, {"connected", it->second.connected}};
  }
  if (kind == "mount_cloud") {
    auto address = effect.at("address").get<std::string>();
    auto& part = mount_partition(domain_, MountDescriptor{MountKind::CloudRemote, address}, ids_);
    auto part_id = part.id;
    std::set<std::string> keys = trusted_keys();
    std::vector<SignId> fresh;
    for (const auto& rec_text : effect.at("records")) {
      auto rec = parse_portal_record(rec_text.get<std::string>(), keys);
      auto portal = import_portal(rec, domain_id(), ids_);
      if (portal.comm_agent.address.empty()) portal.comm_agent = CommAgent{"tcp", address};
      if (!portal.target.endpoint.remote || portal.target.endpoint.address.empty())
        portal.target.endpoint = Endpoint::at(address);
      fresh.push_back(portals_.adopt(std::move(portal)).sign.id);
    }
    auto* p = domain_.partition(part_id);
    p->site_portals = fresh;
    return Json{{"partition", part_id}, {"sites", fresh.size()}};
  }
  if (kind == "remote_enter") {
    auto& s = session_mut(effect.at("session").get<std::string>());
    auto pid = effect.at("portal").get<SignId>();
    const auto& portal = portals_.get(pid);
    auto f = tasks_.focus();
    if (f && tasks_.get(*f).state == TaskState::Searching && portal.target.kind == TargetKind::Site) {
      SessionLocation loc(root_target());
      loc.push(Frame{portal.target, pid});
      tasks_.bind_task(*f, portal.target, portal.context_id, loc.frames(), at);
      s.location = loc;
    } else {
      s.location.push(Frame{portal.target, pid});
      if (f && is_open(tasks_.get(*f).state)) tasks_.space_entered(*f, portal.target, s.location.frames(), at);
    }
    push_history(pid);
    return Json{{"space", portal.target}, {"depth", s.location.depth()}};
  }
  fail(Errc::InvalidArgument, "effect " + kind);
}

}  // namespace uni
