#include <gtest/gtest.h>

#include <random>

#include "support.hpp"
#include "unispace/error.hpp"
#include "unispace/task/task.hpp"

using namespace uni;
using uni::testing::seeded;

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

PortalTarget site_target(const SignId& id) { return {TargetKind::Site, id, {}, ""}; }

std::vector<std::string> events(const TaskEngine& e) {
  std::vector<std::string> out;
  for (const auto& j : e.journal().entries()) out.push_back(j.event);
  return out;
}

void expect_invariants(const TaskEngine& e) {
  int active = 0;
  for (const auto& [id, t] : e.tasks()) {
    if (t.state == TaskState::Active) {
      ++active;
      EXPECT_EQ(e.focus(), id);
    }
  }
  EXPECT_LE(active, 1);
  std::uint64_t prev = 0;
  for (const auto& j : e.journal().entries()) {
    EXPECT_EQ(j.seq, prev + 1);
    prev = j.seq;
  }
}

}  // namespace

TEST(TaskState, TransitionRelation) {
  using S = TaskState;
  EXPECT_TRUE(legal_transition(S::Searching, S::Bound));
  EXPECT_TRUE(legal_transition(S::Searching, S::Cancelled));
  EXPECT_FALSE(legal_transition(S::Searching, S::Active));
  EXPECT_TRUE(legal_transition(S::Suspended, S::Active));
  for (auto to : {S::Searching, S::Bound, S::Active, S::Suspended, S::Completed, S::Cancelled}) {
    EXPECT_FALSE(legal_transition(S::Completed, to));
    EXPECT_FALSE(legal_transition(S::Cancelled, to));
  }
  EXPECT_EQ(task_state_from(to_string(S::Suspended)), S::Suspended);
}

TEST(TaskEngine, FiveStepChain) {
  auto ids = seeded(1);
  TaskEngine e;
  auto t = ids.next();
  auto site = ids.next();
  e.create_task(t, ids.next(), "Report", {}, 1);
  EXPECT_EQ(e.get(t).state, TaskState::Searching);
  e.bind_task(t, site_target(site), "ctx", {}, 2);
  EXPECT_EQ(e.get(t).state, TaskState::Active);
  EXPECT_EQ(e.focus(), t);
  e.complete_task(t, 3);
  EXPECT_EQ(e.get(t).state, TaskState::Completed);
  EXPECT_FALSE(e.focus());
  EXPECT_EQ(events(e), (std::vector<std::string>{"created", "bound", "completed"}));
  EXPECT_EQ(code_of([&] { e.complete_task(t, 4); }), Errc::WrongState);
}

TEST(TaskEngine, BindRejectsNonSite) {
  auto ids = seeded(1);
  TaskEngine e;
  auto t = ids.next();
  e.create_task(t, ids.next(), "x", {}, 1);
  EXPECT_EQ(code_of([&] { e.bind_task(t, {TargetKind::Workplace, ids.next(), {}, ""}, "", {}, 2); }),
            Errc::InvalidArgument);
  EXPECT_EQ(code_of([&] { e.switch_task(ids.next(), 2); }), Errc::NotFound);
}

TEST(TaskEngine, SwitchSuspendsOther) {
  auto ids = seeded(1);
  TaskEngine e;
  auto a = ids.next(), b = ids.next(), site = ids.next();
  e.create_task(a, ids.next(), "a", {}, 1);
  e.bind_task(a, site_target(site), "", {}, 2);
  e.create_task(b, ids.next(), "b", {}, 3);
  e.bind_task(b, site_target(site), "", {}, 4);
  EXPECT_EQ(e.get(a).state, TaskState::Suspended);
  e.switch_task(a, 5);
  EXPECT_EQ(e.get(a).state, TaskState::Active);
  EXPECT_EQ(e.get(b).state, TaskState::Suspended);
  expect_invariants(e);
}

TEST(TaskEngine, SubtaskPassesParametersAndResults) {
  auto ids = seeded(1);
  TaskEngine e;
  auto parent = ids.next(), child = ids.next(), site = ids.next();
  e.create_task(parent, ids.next(), "p", {}, 1);
  e.bind_task(parent, site_target(site), "", {}, 2);
  e.spawn_subtask(parent, child, ids.next(), {{"q", "1"}}, {}, 3);
  EXPECT_EQ(e.get(parent).state, TaskState::Suspended);
  EXPECT_EQ(e.get(child).params_in.at("q"), "1");
  EXPECT_EQ(code_of([&] { e.complete_task(parent, 4); }), Errc::OpenChildren);
  e.return_from_subtask(child, PropertyMap{{"answer", "42"}}, true, 5);
  EXPECT_EQ(e.get(parent).inbox.at("answer"), "42");
  EXPECT_EQ(e.get(parent).state, TaskState::Active);
  EXPECT_EQ(e.get(child).state, TaskState::Completed);
  EXPECT_EQ(code_of([&] { e.return_from_subtask(parent, {}, true, 6); }), Errc::NoParent);
}

TEST(TaskEngine, ReturnWithoutSaveCancels) {
  auto ids = seeded(1);
  TaskEngine e;
  auto parent = ids.next(), child = ids.next();
  e.create_task(parent, ids.next(), "p", {}, 1);
  e.bind_task(parent, site_target(ids.next()), "", {}, 2);
  e.spawn_subtask(parent, child, ids.next(), {}, {}, 3);
  e.return_from_subtask(child, PropertyMap{{"k", "v"}}, false, 4);
  EXPECT_EQ(e.get(child).state, TaskState::Cancelled);
  EXPECT_TRUE(e.get(parent).inbox.empty());
}

TEST(TaskJournal, QueryFilters) {
  auto ids = seeded(1);
  TaskEngine e;
  auto a = ids.next(), b = ids.next();
  e.create_task(a, ids.next(), "a", {}, 10);
  e.create_task(b, ids.next(), "b", {}, 20);
  e.cancel_creation(a, 30);
  JournalFilter by_task;
  by_task.task = a;
  EXPECT_EQ(e.journal().query(by_task).size(), 2u);
  JournalFilter by_event;
  by_event.event = "created";
  EXPECT_EQ(e.journal().query(by_event).size(), 2u);
  JournalFilter window;
  window.from_at = 15;
  window.to_at = 25;
  EXPECT_EQ(e.journal().query(window).size(), 1u);
  JournalFilter after;
  after.after_seq = 1;
  EXPECT_EQ(e.journal().query(after).size(), 2u);
}

// Property: random legal and illegal operations keep at most one task Active,
// keep the journal gapless, and the journal alone rebuilds the task states.
TEST(TaskEngine, RandomOperationsProperty) {
  std::mt19937 rng(11);
  for (int round = 0; round < 30; ++round) {
    auto ids = seeded(static_cast<std::uint8_t>(round + 1));
    TaskEngine e;
    std::vector<SignId> all;
    std::int64_t at = 0;
    for (int step = 0; step < 150; ++step) {
      auto pick = [&]() -> SignId {
        if (all.empty()) return ids.next();
        return all[std::uniform_int_distribution<std::size_t>(0, all.size() - 1)(rng)];
      };
      try {
        switch (std::uniform_int_distribution<int>(0, 6)(rng)) {
          case 0: {
            auto id = ids.next();
            e.create_task(id, ids.next(), "t", {}, ++at);
            all.push_back(id);
            break;
          }
          case 1: e.bind_task(pick(), site_target(ids.next()), "", {}, ++at); break;
          case 2: e.switch_task(pick(), ++at); break;
          case 3: e.complete_task(pick(), ++at); break;
          case 4: e.cancel_creation(pick(), ++at); break;
          case 5: {
            auto id = ids.next();
            e.spawn_subtask(pick(), id, ids.next(), {}, {}, ++at);
            all.push_back(id);
            break;
          }
          case 6: e.return_from_subtask(pick(), PropertyMap{}, rng() % 2 == 0, ++at); break;
        }
      } catch (const Error&) {
      }
      expect_invariants(e);
    }
    auto rebuilt = TaskEngine::replay(e.journal().entries());
    ASSERT_EQ(rebuilt.size(), e.tasks().size());
    for (const auto& [id, t] : e.tasks()) EXPECT_EQ(rebuilt.at(id).state, t.state);
  }
}
