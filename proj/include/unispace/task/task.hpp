#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "unispace/portal/portal.hpp"

namespace uni {

enum class TaskState { Searching, Bound, Active, Suspended, Completed, Cancelled };

std::string_view to_string(TaskState s) noexcept;
TaskState task_state_from(std::string_view text);
bool is_terminal(TaskState s) noexcept;
bool is_open(TaskState s) noexcept;
/// The legal transition relation; terminal states absorb.
bool legal_transition(TaskState from, TaskState to) noexcept;

struct Task {
  SignId id;
  SignId portal;
  std::string name;
  TaskState state = TaskState::Searching;
  std::optional<PortalTarget> site;
  std::optional<SignId> parent;
  PropertyMap params_in;
  std::optional<PropertyMap> results_out;
  /// Results handed back by completed subtasks.
  PropertyMap inbox;
  std::string context;
  std::uint64_t created_at = 0;  // journal seq
  std::optional<std::uint64_t> closed_at;
  /// Saved navigation stack of the task.
  std::vector<Frame> space;
  /// Stack depth at which exit returns from this subtask.
  std::size_t base_depth = 1;

  bool operator==(const Task&) const = default;
};

struct JournalEntry {
  std::uint64_t seq = 0;
  SignId task;
  std::string event;
  Json payload = Json::object();
  std::int64_t at = 0;  // wall clock ms, advisory

  bool operator==(const JournalEntry&) const = default;
};

struct JournalFilter {
  std::optional<SignId> task;
  std::optional<std::string> event;
  std::optional<std::int64_t> from_at;
  std::optional<std::int64_t> to_at;
  std::optional<std::uint64_t> after_seq;
};

/// Append-only, per-domain record of task events.
class TaskJournal {
 public:
  const JournalEntry& append(const SignId& task, std::string event, Json payload, std::int64_t at);
  std::vector<JournalEntry> query(const JournalFilter& filter) const;
  const std::vector<JournalEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  std::uint64_t last_seq() const noexcept { return entries_.empty() ? 0 : entries_.back().seq; }

  bool operator==(const TaskJournal&) const = default;

 private:
  std::vector<JournalEntry> entries_;
};

/// Task set plus the journal that records every transition. Focus is the
/// task the owner's desk is working on; at most one task is Active and, if
/// one is, it is the focus.
class TaskEngine {
 public:
  const Task& create_task(const SignId& id, const SignId& portal, std::string name,
                          std::vector<Frame> space, std::int64_t at);
  const Task& cancel_creation(const SignId& task, std::int64_t at);
  const Task& bind_task(const SignId& task, const PortalTarget& site, std::string context,
                        std::vector<Frame> space, std::int64_t at);
  const Task& switch_task(const SignId& task, std::int64_t at);
  const Task& spawn_subtask(const SignId& parent, const SignId& child_id, const SignId& portal,
                            PropertyMap params_in, std::vector<Frame> space, std::int64_t at);
  /// Returns the parent, now Active.
  const Task& return_from_subtask(const SignId& child, std::optional<PropertyMap> results,
                                  bool save, std::int64_t at);
  const Task& complete_task(const SignId& task, std::int64_t at);
  void space_entered(const SignId& task, const PortalTarget& space, std::vector<Frame> frames,
                     std::int64_t at);
  /// Context update without a journal entry (exit pops, workplace moves).
  void set_space(const SignId& task, std::vector<Frame> frames);
  void audit(Json payload, std::int64_t at);

  const Task* find(const SignId& id) const;
  const Task& get(const SignId& id) const;  // throws NotFound
  const std::map<SignId, Task>& tasks() const noexcept { return tasks_; }
  std::vector<const Task*> open_tasks() const;
  std::optional<SignId> focus() const noexcept { return focus_; }
  const Task* active() const;
  const TaskJournal& journal() const noexcept { return journal_; }

  /// Rebuilds the task set from journal entries alone.
  static std::map<SignId, Task> replay(const std::vector<JournalEntry>& entries);

  bool operator==(const TaskEngine&) const = default;

 private:
  Task& mut(const SignId& id);
  void transition(Task& t, TaskState to);
  /// Suspends the currently Active task (if other than `except`); returns its id.
  std::optional<SignId> suspend_active(const std::optional<SignId>& except);

  std::map<SignId, Task> tasks_;
  std::optional<SignId> focus_;
  TaskJournal journal_;
};

void to_json(Json& j, const Task& t);
void to_json(Json& j, const JournalEntry& e);
void from_json(const Json& j, JournalEntry& e);

}  // namespace uni
