#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "unispace/core/model.hpp"

namespace uni {

enum class ZoneKind { Section, Container };
enum class LeaseMode { Edit, View };
enum class SaveMode { Overwrite, NewVersion };

std::string_view to_string(LeaseMode m) noexcept;
LeaseMode lease_mode_from(std::string_view text);
std::string_view to_string(SaveMode m) noexcept;
SaveMode save_mode_from(std::string_view text);

struct ObjectPart {
  std::string name;
  std::string media_type;
  Bytes bytes;
  bool operator==(const ObjectPart&) const = default;
};

std::string parts_hash(const std::vector<ObjectPart>& parts);

struct Version {
  std::uint64_t vid = 0;
  std::string hash;
  std::int64_t created_at = 0;
  std::string author;
  std::vector<ObjectPart> snapshot;
  bool operator==(const Version&) const = default;
};

struct DataObject {
  Sign sign;
  std::vector<ObjectPart> parts;  // working copy
  std::vector<Version> versions;
  std::size_t current = 0;        // index into versions
  SignId zone;                    // nil while in trash
  std::uint64_t order = 0;        // insertion order for deterministic listings

  const Version& current_version() const { return versions.at(current); }
  const ObjectPart* part(std::string_view name) const;
  bool operator==(const DataObject&) const = default;
};

/// A storage section (depth 0) or container (depth >= 1).
struct Zone {
  SignId id;
  std::string name;
  ZoneKind kind = ZoneKind::Section;
  std::uint32_t depth = 0;
  std::optional<SignId> parent;
  std::vector<SignId> children;  // containers and objects, in insertion order
  std::uint64_t order = 0;
  bool operator==(const Zone&) const = default;
};

struct DesktopHandle {
  std::string lease;
  SignId object;
  LeaseMode mode = LeaseMode::View;
  bool dirty = false;
  SignId workplace;
  bool operator==(const DesktopHandle&) const = default;
};

struct TrashEntry {
  SignId item;
  SignId origin;
  bool operator==(const TrashEntry&) const = default;
};

struct ClipboardEntry {
  SignId item;
  bool cut = false;
  bool operator==(const ClipboardEntry&) const = default;
};

/// One command-log line. Records carry every generated id so that replay is
/// exact without an id generator.
struct LogRecord {
  std::uint64_t seq = 0;
  std::string op;
  Json args = Json::object();
  Json inv = Json::object();
  bool checkpoint = false;
  bool operator==(const LogRecord&) const = default;
};

/// Serialised line (with trailing "\n") including the crc field.
std::string encode_log_line(const LogRecord& rec);
/// Throws LogCorrupt on checksum mismatch, Malformed on unparsable text.
LogRecord decode_log_line(std::string_view line);

struct StorageConfig {
  std::uint32_t max_container_depth = 5;
  bool operator==(const StorageConfig&) const = default;
};

struct NewObject {
  std::string name;
  std::set<std::string> tags;
  PropertyMap properties;
  std::vector<ObjectPart> parts;
};

struct SearchQuery {
  std::string text;
  std::optional<SignId> zone;
  std::set<std::string> tags;
};

/// Data site: sections, containers, versioned objects, desktop leases,
/// clipboard, trash, settings and the command log. A value type; files are
/// handled by StorageFiles.
class Storage {
 public:
  Storage() = default;
  Storage(SignId id, SignId owner_site, StorageConfig config = {});

  const SignId& id() const noexcept { return id_; }
  const SignId& owner_site() const noexcept { return owner_site_; }
  const StorageConfig& config() const noexcept { return config_; }

  // Structure
  const Zone& create_section(const std::string& name, IdGenerator& ids);
  const Zone& create_container(const SignId& parent, const std::string& name, IdGenerator& ids);
  SignId put_object(const SignId& dest, const NewObject& object, const std::string& author,
                    std::int64_t at, IdGenerator& ids);

  // Desktop
  const DesktopHandle& open(const SignId& object, const SignId& workplace, LeaseMode mode,
                            IdGenerator& ids);
  void close(const std::string& lease);
  void edit(const std::string& lease, const std::string& part, const Bytes& bytes,
            const std::string& media_type = "application/octet-stream");
  const Version& save(const std::string& lease, SaveMode mode, const std::string& author,
                      std::int64_t at);
  void restore_version(const SignId& object, std::uint64_t vid);

  // Logistics
  void cut(const std::vector<SignId>& items);
  void copy(const std::vector<SignId>& items);
  std::vector<SignId> paste(const SignId& dest, IdGenerator& ids);
  void move(const SignId& item, const SignId& dest);
  void delete_to_trash(const SignId& item);
  void restore_from_trash(const SignId& item);
  void set_setting(const std::string& key, const std::string& value);
  /// System-maintained setting (history, favorites); not undoable.
  void set_meta(const std::string& key, const std::string& value);

  // Command log cursor
  bool undo();
  bool redo();
  bool repeat(IdGenerator& ids, std::int64_t at);
  bool can_undo() const noexcept { return !undo_stack_.empty(); }
  bool can_redo() const noexcept { return !redo_stack_.empty(); }

  // Queries
  const DataObject* object(const SignId& id) const;
  const DataObject& get_object(const SignId& id) const;  // throws NotFound
  const Zone* zone(const SignId& id) const;
  bool contains(const SignId& item) const;
  bool in_trash(const SignId& item) const;
  std::vector<SignId> zone_path(const SignId& item) const;  // section first
  std::vector<SignId> search(const SearchQuery& query) const;
  std::vector<const Zone*> sections() const;
  const std::map<SignId, DataObject>& objects() const noexcept { return objects_; }
  const std::map<SignId, Zone>& zones() const noexcept { return zones_; }
  const std::vector<TrashEntry>& trash() const noexcept { return trash_; }
  const std::vector<ClipboardEntry>& clipboard() const noexcept { return clipboard_; }
  const std::map<std::string, DesktopHandle>& handles() const noexcept { return handles_; }
  const DesktopHandle* handle(const std::string& lease) const;
  bool has_edit_lease(const SignId& object) const;
  bool has_edit_leases() const;
  const PropertyMap& settings() const noexcept { return settings_; }
  std::size_t live_object_count() const;  // zones + trash, excluding nothing
  const std::vector<LogRecord>& log() const noexcept { return log_; }

  /// Applies a record produced by this class (replay path).
  void apply(const LogRecord& rec);
  /// apply + append to the in-memory log.
  void replay(const LogRecord& rec);
  /// Canonical digest of all durable state (for equivalence checks).
  Json state_json() const;

  bool operator==(const Storage&) const = default;

 private:
  void commit(LogRecord rec);  // apply + append
  void apply_forward(const std::string& op, const Json& args);
  void apply_inverse(const std::string& op, const Json& args, const Json& inv);
  bool undoable(const std::string& op) const;
  Zone& zone_mut(const SignId& id);
  DataObject& object_mut(const SignId& id);
  void detach(const SignId& item);
  void attach(const SignId& item, const SignId& dest);
  std::uint32_t subtree_height(const SignId& zone) const;
  void check_dest_for(const SignId& item, const SignId& dest) const;
  Json snapshot_item(const SignId& item) const;
  void remove_item(const SignId& item);
  void insert_snapshot(const Json& snap, const SignId& dest);
  Json clone_item(const SignId& item, IdGenerator& ids, std::uint64_t& order) const;
  void set_depths(const SignId& zone, std::uint32_t depth);

  SignId id_;
  SignId owner_site_;
  StorageConfig config_;
  std::map<SignId, Zone> zones_;
  std::map<SignId, DataObject> objects_;
  std::vector<TrashEntry> trash_;
  std::vector<ClipboardEntry> clipboard_;
  std::map<std::string, DesktopHandle> handles_;
  PropertyMap settings_;
  std::vector<LogRecord> log_;
  std::vector<std::uint64_t> undo_stack_;
  std::vector<std::uint64_t> redo_stack_;
  std::uint64_t next_order_ = 1;
};

/// Directory-backed persistence for a Storage:
///   storage.json  identity and config
///   cmdlog.ndjson one checksummed record per line
///   settings.json, sections/..., trash/...  derived layout
class StorageFiles {
 public:
  StorageFiles() = default;
  explicit StorageFiles(std::filesystem::path dir, bool durable = true);

  const std::filesystem::path& dir() const noexcept { return dir_; }
  /// Writes storage.json and an empty log for a new storage.
  void create(const Storage& storage);
  /// Appends records not yet written; the append is the acknowledgement point.
  void flush(const Storage& storage);
  void write_layout(const Storage& storage) const;

  /// Reads storage.json and replays the valid prefix of cmdlog.ndjson. A torn
  /// or corrupt tail after the last checkpoint is discarded and trimmed from
  /// the file; a checksum mismatch before a checkpoint throws LogCorrupt.
  static Storage recover(const std::filesystem::path& dir);
  /// Valid prefix of a log file's records (same rules as recover).
  static std::vector<LogRecord> read_log(const std::filesystem::path& file, bool trim);
  void set_flushed(std::size_t n) { flushed_ = n; }

 private:
  std::filesystem::path dir_;
  bool durable_ = true;
  std::size_t flushed_ = 0;
  fsutil::AppendFile log_;
  mutable std::map<std::string, std::string> written_;  // layout cache
};

void to_json(Json& j, const ObjectPart& p);
void from_json(const Json& j, ObjectPart& p);
void to_json(Json& j, const LogRecord& r);

}  // namespace uni
