#include <gtest/gtest.h>

#include "unispace/error.hpp"
#include "unispace/server/executive.hpp"

using namespace uni;

namespace {

IdGenerator seeded(std::uint8_t n) {
  std::array<std::uint8_t, 32> seed{};
  seed.fill(n);
  Uuid u{};
  u.hi = 0x1000 + n;
  u.lo = 0x8000000000000000ull + n;
  return IdGenerator(DomainId{u}, seed);
}

PersonCard card(const std::string& name) {
  PersonCard c;
  c.sign.name = name;
  c.sign.ctype = ConceptualType::Person;
  return c;
}

struct Desk {
  Executive ex = Executive::create(card("Ada"), seeded(1), {});
  std::string tok = ex.open_session(Principal::owner(), "test", 0);
  std::int64_t now = 0;

  Json run(const std::string& tool, Json target = nullptr, Json params = Json::object()) {
    auto out = ex.dispatch(tok, Command{tool, std::move(target), std::move(params)}, ++now);
    auto tree = to_json(ex.render(tok));
    auto problem = validate_tree(tree);
    EXPECT_FALSE(problem) << tool << ": " << problem.value_or("");
    return out.result;
  }
  Json tree() const { return to_json(ex.render(tok)); }
};

}  // namespace

TEST(Executive, RootRenderHasTabsAndNoExit) {
  Desk d;
  auto t = d.tree();
  EXPECT_FALSE(validate_tree(t));
  EXPECT_EQ(t["depth"], 1);
  EXPECT_EQ(count_nodes(t, "tool", "create_task"), 1u);
  EXPECT_EQ(count_nodes(t, "tool", "exit"), 0u);
}

TEST(Executive, TaskWorkflow) {
  Desk d;
  auto inst = d.run("install_site", nullptr, {{"template", "document-editor"}, {"name", "Reports"}});
  EXPECT_EQ(inst["workplaces"].size(), 8u);
  auto before = count_nodes(d.tree(), "task_tab");
  auto task = d.run("create_task", nullptr, {{"name", "Quarterly report"}});
  EXPECT_EQ(count_nodes(d.tree(), "task_tab"), before + 1);
  auto hits = d.run("find", nullptr, {{"q", "report"}});
  ASSERT_GE(hits["count"].get<int>(), 1);
  EXPECT_GE(count_nodes(d.tree(), "portal"), 1u);
  auto portal = hits["hits"][0]["portal"].get<std::string>();
  auto bound = d.run("activate", portal);
  EXPECT_EQ(bound["bound"], task["task"]);
  EXPECT_EQ(d.ex.tasks().get(task["task"].get<SignId>()).state, TaskState::Active);
  EXPECT_EQ(count_nodes(d.tree(), "tool", "exit"), 1u);

  auto listing = d.run("listing", "Documents");
  auto obj = d.run("create_object", "Documents", {{"name", "Q3"}, {"text", "draft"}});
  auto lease = d.run("open", obj["id"]);
  d.run("edit", nullptr, {{"lease", lease["lease"]}, {"text", "final"}});
  d.run("complete_task");
  const auto& st = d.ex.storages().at(inst["storage"].get<SignId>());
  const auto& o = st.get_object(obj["id"].get<SignId>());
  EXPECT_EQ(to_string(o.current_version().snapshot.at(0).bytes), "final");
  EXPECT_EQ(d.ex.tasks().get(task["task"].get<SignId>()).state, TaskState::Completed);
  EXPECT_EQ(d.tree()["depth"], 1);
}

TEST(Executive, UndoOfCreateTaskInSearchCancels) {
  Desk d;
  auto task = d.run("create_task");
  d.run("undo");
  EXPECT_EQ(d.ex.tasks().get(task["task"].get<SignId>()).state, TaskState::Cancelled);
}

TEST(Executive, ExitAtRootFails) {
  Desk d;
  try {
    d.run("exit");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::AtRoot);
  }
}
