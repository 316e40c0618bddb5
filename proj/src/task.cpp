#include "unispace/task/task.hpp"

#include <algorithm>
#include <array>

#include "unispace/error.hpp"

namespace uni {
namespace {

constexpr std::array<std::pair<TaskState, std::string_view>, 6> kStates{{
    {TaskState::Searching, "Searching"},
    {TaskState::Bound, "Bound"},
    {TaskState::Active, "Active"},
    {TaskState::Suspended, "Suspended"},
    {TaskState::Completed, "Completed"},
    {TaskState::Cancelled, "Cancelled"},
}};

Json props(const PropertyMap& m) { return Json(m); }

}  // namespace

std::string_view to_string(TaskState s) noexcept {
  for (const auto& [st, t] : kStates)
    if (st == s) return t;
  return "Searching";
}

TaskState task_state_from(std::string_view text) {
  for (const auto& [st, t] : kStates)
    if (t == text) return st;
  fail(Errc::Malformed, "task state " + std::string(text));
}

bool is_terminal(TaskState s) noexcept {
  return s == TaskState::Completed || s == TaskState::Cancelled;
}

bool is_open(TaskState s) noexcept { return !is_terminal(s); }

bool legal_transition(TaskState from, TaskState to) noexcept {
  using S = TaskState;
  switch (from) {
    case S::Searching: return to == S::Bound || to == S::Cancelled;
    case S::Bound: return to == S::Active;
    case S::Active: return to == S::Suspended || to == S::Completed || to == S::Cancelled;
    case S::Suspended: return to == S::Active || to == S::Completed || to == S::Cancelled;
    case S::Completed:
    case S::Cancelled: return false;
  }
  return false;
}

const JournalEntry& TaskJournal::append(const SignId& task, std::string event, Json payload,
                                        std::int64_t at) {
  entries_.push_back(JournalEntry{last_seq() + 1, task, std::move(event), std::move(payload), at});
  return entries_.back();
}

std::vector<JournalEntry> TaskJournal::query(const JournalFilter& f) const {
  std::vector<JournalEntry> out;
  for (const auto& e : entries_) {
    if (f.task && e.task != *f.task) continue;
    if (f.event && e.event != *f.event) continue;
    if (f.from_at && e.at < *f.from_at) continue;
    if (f.to_at && e.at > *f.to_at) continue;
    if (f.after_seq && e.seq <= *f.after_seq) continue;
    out.push_back(e);
  }
  return out;
}

Task& TaskEngine::mut(const SignId& id) {
  auto it = tasks_.find(id);
  if (it == tasks_.end()) fail(Errc::NotFound, "task " + id.str());
  return it->second;
}

const Task* TaskEngine::find(const SignId& id) const {
  auto it = tasks_.find(id);
  return it == tasks_.end() ? nullptr : &it->second;
}

const Task& TaskEngine::get(const SignId& id) const {
  const auto* t = find(id);
  if (!t) fail(Errc::NotFound, "task " + id.str());
  return *t;
}

std::vector<const Task*> TaskEngine::open_tasks() const {
  std::vector<const Task*> out;
  for (const auto& [id, t] : tasks_)
    if (is_open(t.state)) out.push_back(&t);
  std::sort(out.begin(), out.end(),
            [](const Task* a, const Task* b) { return a->created_at < b->created_at; });
  return out;
}

const Task* TaskEngine::active() const {
  for (const auto& [id, t] : tasks_)
    if (t.state == TaskState::Active) return &t;
  return nullptr;
}

void TaskEngine::transition(Task& t, TaskState to) {
  if (!legal_transition(t.state, to))
    fail(Errc::WrongState, std::string(to_string(t.state)) + " -> " + std::string(to_string(to)));
  t.state = to;
}

std::optional<SignId> TaskEngine::suspend_active(const std::optional<SignId>& except) {
  for (auto& [id, t] : tasks_) {
    if (t.state == TaskState::Active && (!except || id != *except)) {
      transition(t, TaskState::Suspended);
      return id;
    }
  }
  return std::nullopt;
}

const Task& TaskEngine::create_task(const SignId& id, const SignId& portal, std::string name,
                                    std::vector<Frame> space, std::int64_t at) {
  if (tasks_.count(id)) fail(Errc::InvalidArgument, "duplicate task id");
  auto suspended = suspend_active(std::nullopt);
  Task t;
  t.id = id;
  t.portal = portal;
  t.name = std::move(name);
  t.space = std::move(space);
  Json payload{{"portal", portal}, {"name", t.name}};
  if (suspended) payload["suspended"] = *suspended;
  t.created_at = journal_.append(id, "created", std::move(payload), at).seq;
  focus_ = id;
  return tasks_.emplace(id, std::move(t)).first->second;
}

const Task& TaskEngine::cancel_creation(const SignId& task, std::int64_t at) {
  auto& t = mut(task);
  if (t.state != TaskState::Searching) fail(Errc::WrongState, std::string(to_string(t.state)));
  transition(t, TaskState::Cancelled);
  t.closed_at = journal_.append(task, "cancelled", Json::object(), at).seq;
  if (focus_ == task) focus_.reset();
  return t;
}

const Task& TaskEngine::bind_task(const SignId& task, const PortalTarget& site, std::string context,
                                  std::vector<Frame> space, std::int64_t at) {
  auto& t = mut(task);
  if (t.state != TaskState::Searching) fail(Errc::WrongState, std::string(to_string(t.state)));
  if (site.kind != TargetKind::Site) fail(Errc::InvalidArgument, "bind target is not a site");
  auto suspended = suspend_active(task);
  transition(t, TaskState::Bound);
  transition(t, TaskState::Active);
  t.site = site;
  t.context = std::move(context);
  t.space = std::move(space);
  Json payload{{"site", site}, {"context", t.context}};
  if (suspended) payload["suspended"] = *suspended;
  journal_.append(task, "bound", std::move(payload), at);
  focus_ = task;
  return t;
}

const Task& TaskEngine::switch_task(const SignId& task, std::int64_t at) {
  auto& t = mut(task);
  if (is_terminal(t.state) || t.state == TaskState::Bound)
    fail(Errc::WrongState, std::string(to_string(t.state)));
  if (focus_ == task && t.state != TaskState::Suspended) return t;
  auto suspended = suspend_active(task);
  if (t.state == TaskState::Suspended) transition(t, TaskState::Active);
  Json payload = Json::object();
  if (suspended) payload["suspended"] = *suspended;
  if (focus_) payload["from"] = *focus_;
  journal_.append(task, "switched", std::move(payload), at);
  focus_ = task;
  return t;
}

const Task& TaskEngine::spawn_subtask(const SignId& parent, const SignId& child_id,
                                      const SignId& portal, PropertyMap params_in,
                                      std::vector<Frame> space, std::int64_t at) {
  auto& p = mut(parent);
  if (p.state != TaskState::Active) fail(Errc::WrongState, std::string(to_string(p.state)));
  if (tasks_.count(child_id)) fail(Errc::InvalidArgument, "duplicate task id");
  transition(p, TaskState::Suspended);
  Task c;
  c.id = child_id;
  c.portal = portal;
  c.name = p.name + " / subtask";
  c.parent = parent;
  c.params_in = std::move(params_in);
  c.site = p.site;
  c.context = p.context;
  c.space = std::move(space);
  c.base_depth = c.space.empty() ? 1 : c.space.size();
  c.state = TaskState::Active;
  c.created_at = journal_
                     .append(child_id, "spawned",
                             Json{{"parent", parent},
                                  {"portal", portal},
                                  {"params", props(c.params_in)},
                                  {"name", c.name}},
                             at)
                     .seq;
  focus_ = child_id;
  return tasks_.emplace(child_id, std::move(c)).first->second;
}

const Task& TaskEngine::return_from_subtask(const SignId& child, std::optional<PropertyMap> results,
                                            bool save, std::int64_t at) {
  auto& c = mut(child);
  if (!c.parent) fail(Errc::NoParent);
  if (c.state != TaskState::Active) fail(Errc::WrongState, std::string(to_string(c.state)));
  auto& p = mut(*c.parent);
  if (p.state != TaskState::Suspended) fail(Errc::WrongState, "parent " + std::string(to_string(p.state)));
  transition(c, save ? TaskState::Completed : TaskState::Cancelled);
  transition(p, TaskState::Active);
  Json payload{{"parent", *c.parent}, {"save", save}};
  if (save) {
    c.results_out = results.value_or(PropertyMap{});
    for (const auto& [k, v] : *c.results_out) p.inbox[k] = v;
    payload["results"] = props(*c.results_out);
  }
  c.closed_at = journal_.append(child, "returned", std::move(payload), at).seq;
  focus_ = p.id;
  return p;
}

const Task& TaskEngine::complete_task(const SignId& task, std::int64_t at) {
  auto& t = mut(task);
  if (t.state != TaskState::Active && t.state != TaskState::Suspended)
    fail(Errc::WrongState, std::string(to_string(t.state)));
  for (const auto& [id, other] : tasks_)
    if (other.parent == task && is_open(other.state)) fail(Errc::OpenChildren, other.name);
  transition(t, TaskState::Completed);
  t.results_out = t.inbox;
  t.closed_at = journal_.append(task, "completed", Json::object(), at).seq;
  if (focus_ == task) focus_.reset();
  return t;
}

void TaskEngine::space_entered(const SignId& task, const PortalTarget& space,
                               std::vector<Frame> frames, std::int64_t at) {
  auto& t = mut(task);
  t.space = std::move(frames);
  journal_.append(task, "space_entered", Json{{"space", space}}, at);
}

void TaskEngine::set_space(const SignId& task, std::vector<Frame> frames) {
  mut(task).space = std::move(frames);
}

void TaskEngine::audit(Json payload, std::int64_t at) {
  journal_.append(SignId{}, "access_audit", std::move(payload), at);
}

std::map<SignId, Task> TaskEngine::replay(const std::vector<JournalEntry>& entries) {
  std::map<SignId, Task> out;
  auto set_state = [&out](const SignId& id, TaskState s) {
    if (auto it = out.find(id); it != out.end()) it->second.state = s;
  };
  auto suspended = [&](const JournalEntry& e) {
    if (e.payload.contains("suspended"))
      set_state(e.payload["suspended"].get<SignId>(), TaskState::Suspended);
  };
  for (const auto& e : entries) {
    if (e.event == "created") {
      suspended(e);
      Task t;
      t.id = e.task;
      t.portal = e.payload.at("portal").get<SignId>();
      t.name = e.payload.value("name", std::string{});
      t.created_at = e.seq;
      out[e.task] = std::move(t);
    } else if (e.event == "cancelled") {
      set_state(e.task, TaskState::Cancelled);
      out[e.task].closed_at = e.seq;
    } else if (e.event == "bound") {
      suspended(e);
      auto& t = out[e.task];
      t.state = TaskState::Active;
      t.site = e.payload.at("site").get<PortalTarget>();
      t.context = e.payload.value("context", std::string{});
    } else if (e.event == "switched") {
      suspended(e);
      auto& t = out[e.task];
      if (t.state == TaskState::Suspended) t.state = TaskState::Active;
    } else if (e.event == "spawned") {
      auto parent = e.payload.at("parent").get<SignId>();
      set_state(parent, TaskState::Suspended);
      Task c;
      c.id = e.task;
      c.portal = e.payload.at("portal").get<SignId>();
      c.name = e.payload.value("name", std::string{});
      c.parent = parent;
      c.params_in = e.payload.at("params").get<PropertyMap>();
      c.state = TaskState::Active;
      c.created_at = e.seq;
      if (auto it = out.find(parent); it != out.end()) {
        c.site = it->second.site;
        c.context = it->second.context;
      }
      out[e.task] = std::move(c);
    } else if (e.event == "returned") {
      auto parent = e.payload.at("parent").get<SignId>();
      bool save = e.payload.at("save").get<bool>();
      auto& c = out[e.task];
      c.state = save ? TaskState::Completed : TaskState::Cancelled;
      c.closed_at = e.seq;
      if (save) {
        c.results_out = e.payload.value("results", PropertyMap{});
        for (const auto& [k, v] : *c.results_out) out[parent].inbox[k] = v;
      }
      set_state(parent, TaskState::Active);
    } else if (e.event == "completed") {
      auto& t = out[e.task];
      t.state = TaskState::Completed;
      t.results_out = t.inbox;
      t.closed_at = e.seq;
    }
  }
  return out;
}

void to_json(Json& j, const Task& t) {
  j = Json{{"id", t.id},
           {"portal", t.portal},
           {"name", t.name},
           {"state", to_string(t.state)},
           {"params_in", props(t.params_in)},
           {"inbox", props(t.inbox)},
           {"context", t.context},
           {"created_at", t.created_at},
           {"space", t.space}};
  if (t.site) j["site"] = *t.site;
  if (t.parent) j["parent"] = *t.parent;
  if (t.results_out) j["results_out"] = props(*t.results_out);
  if (t.closed_at) j["closed_at"] = *t.closed_at;
}

void to_json(Json& j, const JournalEntry& e) {
  j = Json{{"seq", e.seq}, {"event", e.event}, {"payload", e.payload}, {"at", e.at}};
  j["task"] = e.task.is_nil() ? Json(nullptr) : Json(e.task);
}

void from_json(const Json& j, JournalEntry& e) {
  e.seq = j.at("seq").get<std::uint64_t>();
  e.task = j.at("task").is_null() ? SignId{} : j["task"].get<SignId>();
  e.event = j.at("event").get<std::string>();
  e.payload = j.at("payload");
  e.at = j.at("at").get<std::int64_t>();
}

}  // namespace uni
