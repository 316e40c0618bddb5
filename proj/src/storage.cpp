#include "unispace/storage/storage.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <fstream>
#include <sstream>

#include "unispace/error.hpp"

namespace uni {

std::string_view to_string(LeaseMode m) noexcept { return m == LeaseMode::Edit ? "Edit" : "View"; }

LeaseMode lease_mode_from(std::string_view text) {
  if (text == "Edit" || text == "edit") return LeaseMode::Edit;
  if (text == "View" || text == "view") return LeaseMode::View;
  fail(Errc::InvalidArgument, "lease mode " + std::string(text));
}

std::string_view to_string(SaveMode m) noexcept {
  return m == SaveMode::Overwrite ? "Overwrite" : "NewVersion";
}

SaveMode save_mode_from(std::string_view text) {
  if (text == "Overwrite" || text == "overwrite") return SaveMode::Overwrite;
  if (text == "NewVersion" || text == "new_version" || text == "version") return SaveMode::NewVersion;
  fail(Errc::InvalidArgument, "save mode " + std::string(text));
}

std::string parts_hash(const std::vector<ObjectPart>& parts) {
  Bytes buf;
  auto put = [&buf](std::string_view s) {
    auto n = s.size();
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<std::uint8_t>(n >> (56 - 8 * i)));
    buf.insert(buf.end(), s.begin(), s.end());
  };
  for (const auto& p : parts) {
    put(p.name);
    put(p.media_type);
    put(std::string_view(reinterpret_cast<const char*>(p.bytes.data()), p.bytes.size()));
  }
  return sha256_hex(buf);
}

const ObjectPart* DataObject::part(std::string_view name) const {
  for (const auto& p : parts)
    if (p.name == name) return &p;
  return nullptr;
}

void to_json(Json& j, const ObjectPart& p) {
  j = Json{{"name", p.name}, {"media", p.media_type}, {"bytes", base64_encode(p.bytes)}};
}

void from_json(const Json& j, ObjectPart& p) {
  p.name = j.at("name").get<std::string>();
  p.media_type = j.value("media", std::string("application/octet-stream"));
  p.bytes = base64_decode(j.at("bytes").get<std::string>());
}

void to_json(Json& j, const LogRecord& r) {
  j = Json{{"seq", r.seq}, {"op", r.op}, {"args", r.args}, {"inv", r.inv}, {"cp", r.checkpoint}};
}

std::string encode_log_line(const LogRecord& rec) {
  Json j = rec;
  auto body = j.dump();
  j["crc"] = crc32_hex(body);
  return j.dump() + "\n";
}

LogRecord decode_log_line(std::string_view line) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::exception&) {
    fail(Errc::LogCorrupt, "unparsable record");
  }
  if (!j.is_object() || !j.contains("crc") || !j["crc"].is_string())
    fail(Errc::LogCorrupt, "record without checksum");
  auto crc = j["crc"].get<std::string>();
  j.erase("crc");
  if (crc32_hex(j.dump()) != crc) fail(Errc::LogCorrupt, "checksum mismatch");
  try {
    LogRecord r;
    r.seq = j.at("seq").get<std::uint64_t>();
    r.op = j.at("op").get<std::string>();
    r.args = j.at("args");
    r.inv = j.at("inv");
    r.checkpoint = j.at("cp").get<bool>();
    return r;
  } catch (const Json::exception&) {
    fail(Errc::LogCorrupt, "record fields");
  }
}

namespace {

Json object_json(const DataObject& o) {
  Json versions = Json::array();
  for (const auto& v : o.versions)
    versions.push_back({{"vid", v.vid},
                        {"hash", v.hash},
                        {"at", v.created_at},
                        {"author", v.author},
                        {"snapshot", v.snapshot}});
  return Json{{"sign", o.sign},       {"parts", o.parts},  {"versions", versions},
              {"current", o.current}, {"order", o.order}};
}

DataObject object_from(const Json& j) {
  DataObject o;
  o.sign = j.at("sign").get<Sign>();
  o.parts = j.at("parts").get<std::vector<ObjectPart>>();
  for (const auto& v : j.at("versions")) {
    Version ver;
    ver.vid = v.at("vid").get<std::uint64_t>();
    ver.hash = v.at("hash").get<std::string>();
    ver.created_at = v.at("at").get<std::int64_t>();
    ver.author = v.at("author").get<std::string>();
    ver.snapshot = v.at("snapshot").get<std::vector<ObjectPart>>();
    o.versions.push_back(std::move(ver));
  }
  o.current = j.at("current").get<std::size_t>();
  o.order = j.at("order").get<std::uint64_t>();
  return o;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

Storage::Storage(SignId id, SignId owner_site, StorageConfig config)
    : id_(id), owner_site_(owner_site), config_(config) {}

Zone& Storage::zone_mut(const SignId& id) {
  auto it = zones_.find(id);
  if (it == zones_.end()) fail(Errc::NotFound, "zone " + id.str());
  return it->second;
}

DataObject& Storage::object_mut(const SignId& id) {
  auto it = objects_.find(id);
  if (it == objects_.end()) fail(Errc::NotFound, "object " + id.str());
  return it->second;
}

const DataObject* Storage::object(const SignId& id) const {
  auto it = objects_.find(id);
  return it == objects_.end() ? nullptr : &it->second;
}

const DataObject& Storage::get_object(const SignId& id) const {
  const auto* o = object(id);
  if (!o) fail(Errc::NotFound, "object " + id.str());
  return *o;
}

const Zone* Storage::zone(const SignId& id) const {
  auto it = zones_.find(id);
  return it == zones_.end() ? nullptr : &it->second;
}

bool Storage::contains(const SignId& item) const { return objects_.count(item) || zones_.count(item); }

bool Storage::in_trash(const SignId& item) const {
  return std::any_of(trash_.begin(), trash_.end(), [&](const TrashEntry& e) { return e.item == item; });
}

const DesktopHandle* Storage::handle(const std::string& lease) const {
  auto it = handles_.find(lease);
  return it == handles_.end() ? nullptr : &it->second;
}

bool Storage::has_edit_lease(const SignId& object) const {
  return std::any_of(handles_.begin(), handles_.end(), [&](const auto& kv) {
    return kv.second.object == object && kv.second.mode == LeaseMode::Edit;
  });
}

bool Storage::has_edit_leases() const {
  return std::any_of(handles_.begin(), handles_.end(),
                     [](const auto& kv) { return kv.second.mode == LeaseMode::Edit; });
}

std::size_t Storage::live_object_count() const { return objects_.size(); }

std::vector<const Zone*> Storage::sections() const {
  std::vector<const Zone*> out;
  for (const auto& [id, z] : zones_)
    if (z.kind == ZoneKind::Section) out.push_back(&z);
  std::sort(out.begin(), out.end(), [](const Zone* a, const Zone* b) { return a->order < b->order; });
  return out;
}

std::vector<SignId> Storage::zone_path(const SignId& item) const {
  std::vector<SignId> path;
  std::optional<SignId> cur;
  if (const auto* o = object(item)) {
    if (o->zone.is_nil()) return {};
    cur = o->zone;
  } else if (const auto* z = zone(item)) {
    cur = z->kind == ZoneKind::Section ? std::optional<SignId>(z->id) : z->parent;
    if (z->kind == ZoneKind::Container && !z->parent) return {};
  } else {
    return {};
  }
  while (cur) {
    path.push_back(*cur);
    const auto* z = zone(*cur);
    if (!z) return {};
    if (z->kind == ZoneKind::Container && !z->parent) return {};  // inside a trashed container
    cur = z->parent;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

std::vector<SignId> Storage::search(const SearchQuery& q) const {
  if (q.zone && !zone(*q.zone)) fail(Errc::NotFound, "zone " + q.zone->str());
  auto needle = lower(q.text);
  std::vector<const DataObject*> hits;
  for (const auto& [id, o] : objects_) {
    auto path = zone_path(id);
    if (path.empty()) continue;  // trash
    if (q.zone && std::find(path.begin(), path.end(), *q.zone) == path.end()) continue;
    bool tags_ok = std::all_of(q.tags.begin(), q.tags.end(),
                               [&](const std::string& t) { return o.sign.tags.count(t) > 0; });
    if (!tags_ok) continue;
    bool text_ok = needle.empty() || lower(o.sign.name).find(needle) != std::string::npos ||
                   std::any_of(o.sign.tags.begin(), o.sign.tags.end(),
                               [&](const std::string& t) { return lower(t) == needle; });
    if (text_ok) hits.push_back(&o);
  }
  std::sort(hits.begin(), hits.end(),
            [](const DataObject* a, const DataObject* b) { return a->order < b->order; });
  std::vector<SignId> out;
  for (const auto* o : hits) out.push_back(o->sign.id);
  return out;
}

// ---------------------------------------------------------------------------
// Mutators: validate, build a record carrying every generated value, commit.

void Storage::commit(LogRecord rec) {
  rec.seq = log_.empty() ? 1 : log_.back().seq + 1;
  apply(rec);
  log_.push_back(std::move(rec));
}

const Zone& Storage::create_section(const std::string& name, IdGenerator& ids) {
  auto id = ids.next();
  commit({0, "section_create", {{"id", id}, {"name", name}, {"order", next_order_}}, {}, false});
  return zones_.at(id);
}

const Zone& Storage::create_container(const SignId& parent, const std::string& name, IdGenerator& ids) {
  const auto* p = zone(parent);
  if (!p || zone_path(parent).empty()) fail(Errc::NotFound, "zone " + parent.str());
  if (p->depth + 1 > config_.max_container_depth)
    fail(Errc::DepthLimit, std::to_string(p->depth + 1) + " > " +
                               std::to_string(config_.max_container_depth));
  auto id = ids.next();
  commit({0,
          "container_create",
          {{"id", id}, {"parent", parent}, {"name", name}, {"order", next_order_}},
          {},
          false});
  return zones_.at(id);
}

SignId Storage::put_object(const SignId& dest, const NewObject& obj, const std::string& author,
                           std::int64_t at, IdGenerator& ids) {
  const auto* z = zone(dest);
  if (!z || zone_path(dest).empty()) fail(Errc::NotFound, "zone " + dest.str());
  if (z->depth > config_.max_container_depth) fail(Errc::DepthLimit);
  if (obj.parts.empty()) fail(Errc::InvalidArgument, "an object needs at least one part");
  std::set<std::string> names;
  for (const auto& p : obj.parts)
    if (!names.insert(p.name).second) fail(Errc::InvalidArgument, "duplicate part " + p.name);
  DataObject o;
  o.sign.id = ids.next();
  o.sign.name = obj.name;
  o.sign.ctype = ConceptualType::DataObject;
  o.sign.tags = obj.tags;
  o.sign.properties = obj.properties;
  o.parts = obj.parts;
  o.versions.push_back(Version{1, parts_hash(o.parts), at, author, o.parts});
  o.current = 0;
  o.order = next_order_;
  auto id = o.sign.id;
  commit({0, "object_put", {{"dest", dest}, {"object", object_json(o)}}, {}, false});
  return id;
}

const DesktopHandle& Storage::open(const SignId& object, const SignId& workplace, LeaseMode mode,
                                   IdGenerator& ids) {
  if (!this->object(object) || zone_path(object).empty()) fail(Errc::NotFound, "object");
  if (mode == LeaseMode::Edit && has_edit_lease(object)) fail(Errc::LeaseConflict);
  auto lease = ids.next_token();
  commit({0,
          "lease_open",
          {{"lease", lease}, {"object", object}, {"workplace", workplace}, {"mode", to_string(mode)}},
          {},
          false});
  return handles_.at(lease);
}

void Storage::close(const std::string& lease) {
  if (!handle(lease)) fail(Errc::StaleHandle, lease);
  commit({0, "lease_close", {{"lease", lease}}, {}, false});
}

void Storage::edit(const std::string& lease, const std::string& part, const Bytes& bytes,
                   const std::string& media_type) {
  const auto* h = handle(lease);
  if (!h) fail(Errc::StaleHandle, lease);
  if (h->mode != LeaseMode::Edit) fail(Errc::ViewOnly);
  const auto& o = get_object(h->object);
  Json inv{{"existed", false}};
  if (const auto* p = o.part(part))
    inv = Json{{"existed", true}, {"media", p->media_type}, {"bytes", base64_encode(p->bytes)}};
  commit({0,
          "edit",
          {{"lease", lease},
           {"object", h->object},
           {"part", part},
           {"media", media_type},
           {"bytes", base64_encode(bytes)}},
          inv,
          false});
}

const Version& Storage::save(const std::string& lease, SaveMode mode, const std::string& author,
                             std::int64_t at) {
  const auto* h = handle(lease);
  if (!h) fail(Errc::StaleHandle, lease);
  if (h->mode != LeaseMode::Edit) fail(Errc::ViewOnly);
  const auto& o = get_object(h->object);
  auto object_id = h->object;
  std::uint64_t vid = mode == SaveMode::NewVersion ? o.versions.back().vid + 1 : o.versions.back().vid;
  commit({0,
          "save",
          {{"lease", lease},
           {"object", object_id},
           {"mode", to_string(mode)},
           {"vid", vid},
           {"at", at},
           {"author", author}},
          {},
          true});
  return objects_.at(object_id).versions.back();
}

void Storage::restore_version(const SignId& object, std::uint64_t vid) {
  const auto& o = get_object(object);
  auto it = std::find_if(o.versions.begin(), o.versions.end(),
                         [&](const Version& v) { return v.vid == vid; });
  if (it == o.versions.end()) fail(Errc::NotFound, "version " + std::to_string(vid));
  if (has_edit_lease(object)) fail(Errc::LeaseConflict);
  commit({0,
          "restore_version",
          {{"object", object}, {"vid", vid}},
          {{"parts", o.parts}, {"current", o.current}},
          false});
}

void Storage::cut(const std::vector<SignId>& items) {
  if (items.empty()) fail(Errc::InvalidArgument, "empty selection");
  for (const auto& i : items)
    if (!contains(i) || zone_path(i).empty()) fail(Errc::NotFound, i.str());
  commit({0, "clip_cut", {{"items", items}}, {}, false});
}

void Storage::copy(const std::vector<SignId>& items) {
  if (items.empty()) fail(Errc::InvalidArgument, "empty selection");
  for (const auto& i : items)
    if (!contains(i) || zone_path(i).empty()) fail(Errc::NotFound, i.str());
  commit({0, "clip_copy", {{"items", items}}, {}, false});
}

std::uint32_t Storage::subtree_height(const SignId& zid) const {
  const auto* z = zone(zid);
  if (!z) return 0;
  std::uint32_t h = 0;
  for (const auto& c : z->children) h = std::max(h, subtree_height(c));
  return h + 1;
}

void Storage::check_dest_for(const SignId& item, const SignId& dest) const {
  const auto* d = zone(dest);
  if (!d || zone_path(dest).empty()) fail(Errc::NotFound, "zone " + dest.str());
  if (const auto* z = zone(item)) {
    if (z->kind == ZoneKind::Section) fail(Errc::InvalidArgument, "sections cannot move");
    auto dpath = zone_path(dest);
    if (dest == item || std::find(dpath.begin(), dpath.end(), item) != dpath.end())
      fail(Errc::InvalidArgument, "cannot move a container into itself");
    if (d->depth + subtree_height(item) > config_.max_container_depth) fail(Errc::DepthLimit);
  }
}

Json Storage::snapshot_item(const SignId& item) const {
  if (const auto* o = object(item)) return Json{{"type", "object"}, {"object", object_json(*o)}};
  const auto& z = zones_.at(item);
  Json children = Json::array();
  for (const auto& c : z.children) children.push_back(snapshot_item(c));
  return Json{{"type", "zone"},
              {"id", z.id},
              {"name", z.name},
              {"order", z.order},
              {"children", children}};
}

Json Storage::clone_item(const SignId& item, IdGenerator& ids, std::uint64_t& order) const {
  if (const auto* o = object(item)) {
    auto copy = *o;
    copy.sign.id = ids.next();
    copy.order = order++;
    return Json{{"type", "object"}, {"object", object_json(copy)}};
  }
  const auto& z = zones_.at(item);
  Json children = Json::array();
  auto id = ids.next();
  auto my_order = order++;
  for (const auto& c : z.children) children.push_back(clone_item(c, ids, order));
  return Json{{"type", "zone"}, {"id", id}, {"name", z.name}, {"order", my_order},
              {"children", children}};
}

std::vector<SignId> Storage::paste(const SignId& dest, IdGenerator& ids) {
  if (clipboard_.empty()) fail(Errc::EmptyClipboard);
  const auto* d = zone(dest);
  if (!d || zone_path(dest).empty()) fail(Errc::NotFound, "zone " + dest.str());
  Json moves = Json::array();
  Json created = Json::array();
  std::vector<SignId> out;
  std::uint64_t order = next_order_;
  bool was_cut = false;
  for (const auto& e : clipboard_) {
    if (!contains(e.item) || zone_path(e.item).empty()) continue;  // gone or trashed since
    check_dest_for(e.item, dest);
    if (e.cut) {
      was_cut = true;
      auto path = zone_path(e.item);
      SignId from = object(e.item) ? object(e.item)->zone : *zones_.at(e.item).parent;
      moves.push_back({{"item", e.item}, {"from", from}});
      out.push_back(e.item);
    } else {
      auto snap = clone_item(e.item, ids, order);
      out.push_back(snap["type"] == "object" ? snap["object"]["sign"]["id"].get<SignId>()
                                             : snap["id"].get<SignId>());
      created.push_back(std::move(snap));
    }
  }
  commit({0,
          "paste",
          {{"dest", dest}, {"moves", moves}, {"created", created}, {"clear", was_cut},
           {"order", order}},
          {{"clipboard", [&] {
              Json c = Json::array();
              for (const auto& e : clipboard_) c.push_back({{"item", e.item}, {"cut", e.cut}});
              return c;
            }()}},
          false});
  return out;
}

void Storage::move(const SignId& item, const SignId& dest) {
  if (!contains(item) || zone_path(item).empty()) fail(Errc::NotFound, item.str());
  check_dest_for(item, dest);
  SignId from = object(item) ? object(item)->zone : *zones_.at(item).parent;
  commit({0, "move", {{"item", item}, {"from", from}, {"to", dest}}, {}, false});
}

void Storage::delete_to_trash(const SignId& item) {
  if (!contains(item)) fail(Errc::NotFound, item.str());
  if (in_trash(item) || zone_path(item).empty()) fail(Errc::NotFound, "already in trash");
  if (const auto* z = zone(item); z && z->kind == ZoneKind::Section)
    fail(Errc::InvalidArgument, "sections cannot be trashed");
  std::function<bool(const SignId&)> leased = [&](const SignId& i) -> bool {
    if (object(i)) return has_edit_lease(i);
    for (const auto& c : zones_.at(i).children)
      if (leased(c)) return true;
    return false;
  };
  if (leased(item)) fail(Errc::LeaseConflict);
  SignId from = object(item) ? object(item)->zone : *zones_.at(item).parent;
  commit({0, "trash", {{"item", item}, {"from", from}}, {}, false});
}

void Storage::restore_from_trash(const SignId& item) {
  auto it = std::find_if(trash_.begin(), trash_.end(), [&](const TrashEntry& e) { return e.item == item; });
  if (it == trash_.end()) fail(Errc::NotInTrash, item.str());
  SignId to = it->origin;
  if (!zone(to) || zone_path(to).empty()) {
    auto secs = sections();
    if (secs.empty()) fail(Errc::NotFound, "no section to restore into");
    to = secs.front()->id;
  }
  if (const auto* z = zone(item))
    if (zones_.at(to).depth + subtree_height(item) > config_.max_container_depth) {
      auto secs = sections();
      to = secs.front()->id;
      (void)z;
    }
  commit({0, "restore", {{"item", item}, {"to", to}}, {{"origin", it->origin}}, false});
}

void Storage::set_setting(const std::string& key, const std::string& value) {
  auto it = settings_.find(key);
  Json inv = it == settings_.end() ? Json{{"existed", false}}
                                   : Json{{"existed", true}, {"value", it->second}};
  commit({0, "setting", {{"key", key}, {"value", value}}, inv, false});
}

void Storage::set_meta(const std::string& key, const std::string& value) {
  commit({0, "meta", {{"key", key}, {"value", value}}, {}, false});
}

bool Storage::undoable(const std::string& op) const {
  static const std::set<std::string> kOps{"section_create", "container_create", "object_put",
                                          "edit",           "restore_version",  "paste",
                                          "move",           "trash",            "restore",
                                          "setting"};
  return kOps.count(op) > 0;
}

bool Storage::undo() {
  if (undo_stack_.empty()) return false;
  auto target = undo_stack_.back();
  const auto& rec = *std::find_if(log_.begin(), log_.end(),
                                  [&](const LogRecord& r) { return r.seq == target; });
  auto probe = *this;
  try {
    probe.apply_inverse(rec.op, rec.args, rec.inv);
  } catch (const Error&) {
    return false;
  }
  commit({0, "undo", {{"target", target}}, {}, false});
  return true;
}

bool Storage::redo() {
  if (redo_stack_.empty()) return false;
  auto target = redo_stack_.back();
  const auto& rec = *std::find_if(log_.begin(), log_.end(),
                                  [&](const LogRecord& r) { return r.seq == target; });
  auto probe = *this;
  try {
    probe.apply_forward(rec.op, rec.args);
  } catch (const Error&) {
    return false;
  }
  commit({0, "redo", {{"target", target}}, {}, false});
  return true;
}

bool Storage::repeat(IdGenerator& ids, std::int64_t at) {
  for (auto it = log_.rbegin(); it != log_.rend(); ++it) {
    const auto& r = *it;
    if (r.op == "undo" || r.op == "redo" || r.op.rfind("lease_", 0) == 0 || r.op == "clip_cut" ||
        r.op == "clip_copy")
      continue;
    try {
      if (r.op == "section_create") {
        create_section(r.args["name"].get<std::string>(), ids);
      } else if (r.op == "container_create") {
        create_container(r.args["parent"].get<SignId>(), r.args["name"].get<std::string>(), ids);
      } else if (r.op == "object_put") {
        auto o = object_from(r.args["object"]);
        put_object(r.args["dest"].get<SignId>(), NewObject{o.sign.name, o.sign.tags, o.sign.properties, o.parts},
                   o.versions.front().author, at, ids);
      } else if (r.op == "edit") {
        edit(r.args["lease"].get<std::string>(), r.args["part"].get<std::string>(),
             base64_decode(r.args["bytes"].get<std::string>()), r.args["media"].get<std::string>());
      } else if (r.op == "paste") {
        paste(r.args["dest"].get<SignId>(), ids);
      } else if (r.op == "setting") {
        set_setting(r.args["key"].get<std::string>(), r.args["value"].get<std::string>());
      } else {
        return false;
      }
      return true;
    } catch (const Error&) {
      return false;
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// Record application. Everything here must be deterministic in the record.

void Storage::detach(const SignId& item) {
  SignId parent;
  if (auto* o = objects_.count(item) ? &objects_.at(item) : nullptr) {
    parent = o->zone;
    o->zone = SignId{};
  } else {
    auto& z = zone_mut(item);
    if (!z.parent) return;
    parent = *z.parent;
    z.parent.reset();
  }
  if (auto* p = zones_.count(parent) ? &zones_.at(parent) : nullptr)
    p->children.erase(std::remove(p->children.begin(), p->children.end(), item), p->children.end());
}

void Storage::set_depths(const SignId& zid, std::uint32_t depth) {
  auto& z = zones_.at(zid);
  z.depth = depth;
  for (const auto& c : z.children)
    if (zones_.count(c)) set_depths(c, depth + 1);
}

void Storage::attach(const SignId& item, const SignId& dest) {
  auto& d = zone_mut(dest);
  std::uint64_t order = 0;
  if (auto* o = objects_.count(item) ? &objects_.at(item) : nullptr) {
    o->zone = dest;
    order = o->order;
  } else {
    auto& z = zone_mut(item);
    z.parent = dest;
    order = z.order;
    set_depths(item, d.depth + 1);
  }
  auto pos = std::find_if(d.children.begin(), d.children.end(), [&](const SignId& c) {
    auto co = objects_.count(c) ? objects_.at(c).order : zones_.at(c).order;
    return co > order;
  });
  d.children.insert(pos, item);
}

void Storage::insert_snapshot(const Json& snap, const SignId& dest) {
  if (snap.at("type") == "object") {
    auto o = object_from(snap.at("object"));
    auto id = o.sign.id;
    next_order_ = std::max(next_order_, o.order + 1);
    objects_[id] = std::move(o);
    attach(id, dest);
    return;
  }
  Zone z;
  z.id = snap.at("id").get<SignId>();
  z.name = snap.at("name").get<std::string>();
  z.kind = ZoneKind::Container;
  z.order = snap.at("order").get<std::uint64_t>();
  next_order_ = std::max(next_order_, z.order + 1);
  zones_[z.id] = z;
  attach(z.id, dest);
  for (const auto& c : snap.at("children")) insert_snapshot(c, z.id);
}

void Storage::remove_item(const SignId& item) {
  detach(item);
  if (objects_.erase(item)) return;
  auto children = zones_.at(item).children;
  for (const auto& c : children) remove_item(c);
  zones_.erase(item);
}

void Storage::replay(const LogRecord& rec) {
  apply(rec);
  log_.push_back(rec);
}

void Storage::apply(const LogRecord& rec) {
  if (rec.op == "undo") {
    auto target = rec.args.at("target").get<std::uint64_t>();
    const auto& t = *std::find_if(log_.begin(), log_.end(),
                                  [&](const LogRecord& r) { return r.seq == target; });
    apply_inverse(t.op, t.args, t.inv);
    undo_stack_.pop_back();
    redo_stack_.push_back(target);
    return;
  }
  if (rec.op == "redo") {
    auto target = rec.args.at("target").get<std::uint64_t>();
    const auto& t = *std::find_if(log_.begin(), log_.end(),
                                  [&](const LogRecord& r) { return r.seq == target; });
    apply_forward(t.op, t.args);
    redo_stack_.pop_back();
    undo_stack_.push_back(target);
    return;
  }
  apply_forward(rec.op, rec.args);
  if (rec.checkpoint) {
    undo_stack_.clear();
    redo_stack_.clear();
  } else if (undoable(rec.op)) {
    undo_stack_.push_back(rec.seq);
    redo_stack_.clear();
  }
}

void Storage::apply_forward(const std::string& op, const Json& a) {
  if (op == "section_create") {
    Zone z;
    z.id = a.at("id").get<SignId>();
    z.name = a.at("name").get<std::string>();
    z.kind = ZoneKind::Section;
    z.order = a.at("order").get<std::uint64_t>();
    next_order_ = std::max(next_order_, z.order + 1);
    zones_[z.id] = std::move(z);
  } else if (op == "container_create") {
    Zone z;
    z.id = a.at("id").get<SignId>();
    z.name = a.at("name").get<std::string>();
    z.kind = ZoneKind::Container;
    z.order = a.at("order").get<std::uint64_t>();
    next_order_ = std::max(next_order_, z.order + 1);
    auto id = z.id;
    zones_[id] = std::move(z);
    attach(id, a.at("parent").get<SignId>());
  } else if (op == "object_put") {
    insert_snapshot(Json{{"type", "object"}, {"object", a.at("object")}}, a.at("dest").get<SignId>());
  } else if (op == "lease_open") {
    DesktopHandle h;
    h.lease = a.at("lease").get<std::string>();
    h.object = a.at("object").get<SignId>();
    h.workplace = a.at("workplace").get<SignId>();
    h.mode = lease_mode_from(a.at("mode").get<std::string>());
    handles_[h.lease] = std::move(h);
  } else if (op == "lease_close") {
    handles_.erase(a.at("lease").get<std::string>());
  } else if (op == "edit") {
    auto& o = object_mut(a.at("object").get<SignId>());
    auto name = a.at("part").get<std::string>();
    auto bytes = base64_decode(a.at("bytes").get<std::string>());
    auto media = a.at("media").get<std::string>();
    auto it = std::find_if(o.parts.begin(), o.parts.end(), [&](const ObjectPart& p) { return p.name == name; });
    if (it == o.parts.end()) {
      o.parts.push_back(ObjectPart{name, media, std::move(bytes)});
    } else {
      it->bytes = std::move(bytes);
      it->media_type = media;
    }
    if (auto h = handles_.find(a.value("lease", std::string{})); h != handles_.end()) h->second.dirty = true;
  } else if (op == "save") {
    auto& o = object_mut(a.at("object").get<SignId>());
    auto mode = save_mode_from(a.at("mode").get<std::string>());
    Version v{a.at("vid").get<std::uint64_t>(), parts_hash(o.parts), a.at("at").get<std::int64_t>(),
              a.at("author").get<std::string>(), o.parts};
    if (mode == SaveMode::NewVersion) {
      o.versions.push_back(std::move(v));
    } else {
      o.versions.back() = std::move(v);
    }
    o.current = o.versions.size() - 1;
    if (auto h = handles_.find(a.at("lease").get<std::string>()); h != handles_.end())
      h->second.dirty = false;
  } else if (op == "restore_version") {
    auto& o = object_mut(a.at("object").get<SignId>());
    auto vid = a.at("vid").get<std::uint64_t>();
    for (std::size_t i = 0; i < o.versions.size(); ++i) {
      if (o.versions[i].vid == vid) {
        o.current = i;
        o.parts = o.versions[i].snapshot;
      }
    }
  } else if (op == "clip_cut" || op == "clip_copy") {
    clipboard_.clear();
    for (const auto& i : a.at("items")) clipboard_.push_back({i.get<SignId>(), op == "clip_cut"});
  } else if (op == "paste") {
    auto dest = a.at("dest").get<SignId>();
    for (const auto& m : a.at("moves")) {
      auto item = m.at("item").get<SignId>();
      detach(item);
      attach(item, dest);
    }
    for (const auto& c : a.at("created")) insert_snapshot(c, dest);
    next_order_ = std::max(next_order_, a.at("order").get<std::uint64_t>());
    if (a.at("clear").get<bool>()) clipboard_.clear();
  } else if (op == "move") {
    auto item = a.at("item").get<SignId>();
    detach(item);
    attach(item, a.at("to").get<SignId>());
  } else if (op == "trash") {
    auto item = a.at("item").get<SignId>();
    detach(item);
    trash_.push_back({item, a.at("from").get<SignId>()});
    clipboard_.erase(std::remove_if(clipboard_.begin(), clipboard_.end(),
                                    [&](const ClipboardEntry& e) { return e.item == item; }),
                     clipboard_.end());
  } else if (op == "restore") {
    auto item = a.at("item").get<SignId>();
    trash_.erase(std::remove_if(trash_.begin(), trash_.end(),
                                [&](const TrashEntry& e) { return e.item == item; }),
                 trash_.end());
    attach(item, a.at("to").get<SignId>());
  } else if (op == "setting" || op == "meta") {
    settings_[a.at("key").get<std::string>()] = a.at("value").get<std::string>();
  } else {
    fail(Errc::LogCorrupt, "unknown op " + op);
  }
}

void Storage::apply_inverse(const std::string& op, const Json& a, const Json& inv) {
  auto require_live = [&](const SignId& item) {
    if (!contains(item) || zone_path(item).empty()) fail(Errc::NotFound, "undo target moved");
  };
  if (op == "section_create" || op == "container_create") {
    auto id = a.at("id").get<SignId>();
    require_live(id);
    if (!zones_.at(id).children.empty()) fail(Errc::InvalidArgument, "zone not empty");
    remove_item(id);
  } else if (op == "object_put") {
    auto id = a.at("object").at("sign").at("id").get<SignId>();
    require_live(id);
    if (std::any_of(handles_.begin(), handles_.end(), [&](const auto& kv) { return kv.second.object == id; }))
      fail(Errc::LeaseConflict);
    remove_item(id);
  } else if (op == "edit") {
    auto& o = object_mut(a.at("object").get<SignId>());
    auto name = a.at("part").get<std::string>();
    auto it = std::find_if(o.parts.begin(), o.parts.end(), [&](const ObjectPart& p) { return p.name == name; });
    if (it == o.parts.end()) fail(Errc::NotFound, "part");
    if (inv.at("existed").get<bool>()) {
      it->bytes = base64_decode(inv.at("bytes").get<std::string>());
      it->media_type = inv.at("media").get<std::string>();
    } else {
      if (o.parts.size() == 1) fail(Errc::InvalidArgument, "last part");
      o.parts.erase(it);
    }
  } else if (op == "restore_version") {
    auto& o = object_mut(a.at("object").get<SignId>());
    if (has_edit_lease(o.sign.id)) fail(Errc::LeaseConflict);
    o.parts = inv.at("parts").get<std::vector<ObjectPart>>();
    o.current = inv.at("current").get<std::size_t>();
  } else if (op == "paste") {
    auto dest = a.at("dest").get<SignId>();
    for (const auto& c : a.at("created")) {
      auto id = c.at("type") == "object" ? c["object"]["sign"]["id"].get<SignId>() : c["id"].get<SignId>();
      require_live(id);
      if (c.at("type") == "object" && std::any_of(handles_.begin(), handles_.end(),
                                                    [&](const auto& kv) { return kv.second.object == id; }))
        fail(Errc::LeaseConflict);
    }
    for (const auto& m : a.at("moves")) {
      auto item = m.at("item").get<SignId>();
      require_live(item);
      auto from = m.at("from").get<SignId>();
      if (!zone(from) || zone_path(from).empty()) fail(Errc::NotFound, "origin gone");
    }
    for (const auto& c : a.at("created"))
      remove_item(c.at("type") == "object" ? c["object"]["sign"]["id"].get<SignId>() : c["id"].get<SignId>());
    for (const auto& m : a.at("moves")) {
      auto item = m.at("item").get<SignId>();
      detach(item);
      attach(item, m.at("from").get<SignId>());
    }
    clipboard_.clear();
    for (const auto& e : inv.at("clipboard")) clipboard_.push_back({e.at("item").get<SignId>(), e.at("cut").get<bool>()});
    (void)dest;
  } else if (op == "move") {
    auto item = a.at("item").get<SignId>();
    require_live(item);
    auto from = a.at("from").get<SignId>();
    if (!zone(from) || zone_path(from).empty()) fail(Errc::NotFound, "origin gone");
    detach(item);
    attach(item, from);
  } else if (op == "trash") {
    auto item = a.at("item").get<SignId>();
    if (!in_trash(item)) fail(Errc::NotInTrash);
    auto from = a.at("from").get<SignId>();
    if (!zone(from) || zone_path(from).empty()) fail(Errc::NotFound, "origin gone");
    trash_.erase(std::remove_if(trash_.begin(), trash_.end(), [&](const TrashEntry& e) { return e.item == item; }),
                 trash_.end());
    attach(item, from);
  } else if (op == "restore") {
    auto item = a.at("item").get<SignId>();
    require_live(item);
    if (const auto* z = zone(item))
      for (const auto& c : z->children)
        if (objects_.count(c) && has_edit_lease(c)) fail(Errc::LeaseConflict);
    if (objects_.count(item) && has_edit_lease(item)) fail(Errc::LeaseConflict);
    detach(item);
    trash_.push_back({item, inv.at("origin").get<SignId>()});
  } else if (op == "setting") {
    auto key = a.at("key").get<std::string>();
    if (inv.at("existed").get<bool>())
      settings_[key] = inv.at("value").get<std::string>();
    else
      settings_.erase(key);
  } else {
    fail(Errc::InvalidArgument, "op " + op + " has no inverse");
  }
}

Json Storage::state_json() const {
  Json zones = Json::object();
  for (const auto& [id, z] : zones_)
    zones[id.str()] = Json{{"name", z.name},
                           {"kind", z.kind == ZoneKind::Section ? "section" : "container"},
                           {"depth", z.depth},
                           {"parent", z.parent ? Json(*z.parent) : Json(nullptr)},
                           {"children", z.children},
                           {"order", z.order}};
  Json objects = Json::object();
  for (const auto& [id, o] : objects_) {
    auto j = object_json(o);
    j["zone"] = o.zone.is_nil() ? Json(nullptr) : Json(o.zone);
    objects[id.str()] = std::move(j);
  }
  Json trash = Json::array();
  for (const auto& t : trash_) trash.push_back({{"item", t.item}, {"origin", t.origin}});
  Json clip = Json::array();
  for (const auto& c : clipboard_) clip.push_back({{"item", c.item}, {"cut", c.cut}});
  Json handles = Json::object();
  for (const auto& [lease, h] : handles_)
    handles[lease] = Json{{"object", h.object}, {"mode", to_string(h.mode)}, {"dirty", h.dirty},
                          {"workplace", h.workplace}};
  return Json{{"id", id_},         {"owner_site", owner_site_},
              {"zones", zones},    {"objects", objects},
              {"trash", trash},    {"clipboard", clip},
              {"handles", handles}, {"settings", settings_},
              {"undo", undo_stack_}, {"redo", redo_stack_},
              {"max_depth", config_.max_container_depth}};
}

// ---------------------------------------------------------------------------

namespace fs = std::filesystem;

StorageFiles::StorageFiles(fs::path dir, bool durable) : dir_(std::move(dir)), durable_(durable) {}

void StorageFiles::create(const Storage& storage) {
  fs::create_directories(dir_);
  Json meta{{"id", storage.id()},
            {"owner_site", storage.owner_site()},
            {"max_depth", storage.config().max_container_depth}};
  fsutil::write_atomic(dir_ / "storage.json", meta.dump(2) + "\n");
  if (!fs::exists(dir_ / "cmdlog.ndjson")) fsutil::write_atomic(dir_ / "cmdlog.ndjson", "");
  flushed_ = 0;
  flush(storage);
}

void StorageFiles::flush(const Storage& storage) {
  const auto& log = storage.log();
  if (flushed_ >= log.size()) return;
  if (!log_.is_open()) log_ = fsutil::AppendFile(dir_ / "cmdlog.ndjson", durable_);
  std::string chunk;
  for (std::size_t i = flushed_; i < log.size(); ++i) chunk += encode_log_line(log[i]);
  log_.append(chunk);
  flushed_ = log.size();
  write_layout(storage);
}

void StorageFiles::write_layout(const Storage& storage) const {
  std::map<std::string, std::string> files;
  files["settings.json"] = Json(storage.settings()).dump(2) + "\n";
  std::function<void(const SignId&, const fs::path&)> emit = [&](const SignId& item, const fs::path& at) {
    if (const auto* o = storage.object(item)) {
      auto dir = at / o->sign.id.local.hex();
      Json parts = Json::array();
      for (std::size_t i = 0; i < o->parts.size(); ++i) {
        auto file = "part-" + std::to_string(i);
        parts.push_back({{"name", o->parts[i].name}, {"media", o->parts[i].media_type}, {"file", file}});
        files[(dir / file).string()] = to_string(o->parts[i].bytes);
      }
      Json versions = Json::array();
      for (const auto& v : o->versions)
        versions.push_back({{"vid", v.vid}, {"hash", v.hash}, {"at", v.created_at}, {"author", v.author}});
      files[(dir / "meta.json").string()] =
          Json{{"id", o->sign.id}, {"name", o->sign.name}, {"tags", o->sign.tags}, {"parts", parts},
               {"versions", versions}, {"current", o->current_version().vid}}
              .dump(2) + "\n";
      return;
    }
    const auto* z = storage.zone(item);
    auto dir = at / z->id.local.hex();
    files[(dir / "zone.json").string()] =
        Json{{"id", z->id}, {"name", z->name}, {"kind", z->kind == ZoneKind::Section ? "section" : "container"}}
            .dump(2) + "\n";
    for (const auto& c : z->children) emit(c, dir);
  };
  for (const auto* s : storage.sections()) emit(s->id, "sections");
  Json trash = Json::array();
  for (const auto& t : storage.trash()) {
    trash.push_back({{"item", t.item}, {"origin", t.origin}});
    emit(t.item, "trash");
  }
  files["trash/index.json"] = trash.dump(2) + "\n";

  if (written_.empty()) {
    fs::remove_all(dir_ / "sections");
    fs::remove_all(dir_ / "trash");
  }
  for (auto it = written_.begin(); it != written_.end();) {
    if (!files.count(it->first)) {
      std::error_code ec;
      fs::remove(dir_ / it->first, ec);
      it = written_.erase(it);
    } else {
      ++it;
    }
  }
  for (const auto& [rel, content] : files) {
    auto w = written_.find(rel);
    if (w != written_.end() && w->second == content) continue;
    auto path = dir_ / rel;
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    written_[rel] = content;
  }
  // prune directories left empty by moves
  for (const char* top : {"sections", "trash"}) {
    if (!fs::exists(dir_ / top)) continue;
    std::vector<fs::path> dirs;
    for (const auto& e : fs::recursive_directory_iterator(dir_ / top))
      if (e.is_directory()) dirs.push_back(e.path());
    std::sort(dirs.rbegin(), dirs.rend());
    for (const auto& d : dirs)
      if (fs::is_empty(d)) fs::remove(d);
  }
}

std::vector<LogRecord> StorageFiles::read_log(const fs::path& file, bool trim) {
  std::vector<LogRecord> out;
  if (!fs::exists(file)) return out;
  auto text = fsutil::read_file(file);
  std::size_t pos = 0;
  std::optional<std::size_t> bad_at;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string::npos) {  // torn final line
      bad_at = pos;
      break;
    }
    try {
      auto rec = decode_log_line(std::string_view(text).substr(pos, nl - pos));
      if (!out.empty() && rec.seq != out.back().seq + 1) fail(Errc::LogCorrupt, "sequence gap");
      out.push_back(std::move(rec));
    } catch (const Error&) {
      bad_at = pos;
      break;
    }
    pos = nl + 1;
  }
  if (!bad_at) return out;
  // A damaged record is only tolerable as an unacknowledged tail: a valid
  // checkpoint after it means committed work would be lost.
  std::size_t scan = text.find('\n', *bad_at);
  while (scan != std::string::npos && scan + 1 < text.size()) {
    auto start = scan + 1;
    auto nl = text.find('\n', start);
    if (nl == std::string::npos) break;
    try {
      auto rec = decode_log_line(std::string_view(text).substr(start, nl - start));
      if (rec.checkpoint) fail(Errc::LogCorrupt, "damaged record before checkpoint " + std::to_string(rec.seq));
    } catch (const Error& e) {
      if (e.code() == Errc::LogCorrupt && e.detail().rfind("damaged", 0) == 0) throw;
    }
    scan = nl;
  }
  if (trim) {
    fsutil::write_atomic(file, text.substr(0, *bad_at));
  }
  return out;
}

Storage StorageFiles::recover(const fs::path& dir) {
  Json meta;
  try {
    meta = Json::parse(fsutil::read_file(dir / "storage.json"));
  } catch (const Json::exception&) {
    fail(Errc::LogCorrupt, "storage.json");
  }
  StorageConfig cfg;
  cfg.max_container_depth = meta.value("max_depth", 5u);
  Storage s(meta.at("id").get<SignId>(), meta.at("owner_site").get<SignId>(), cfg);
  for (const auto& rec : read_log(dir / "cmdlog.ndjson", true)) s.replay(rec);
  return s;
}

}  // namespace uni
