#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "support.hpp"
#include "unispace/error.hpp"
#include "unispace/storage/storage.hpp"
#include "unispace/util.hpp"

using namespace uni;
using uni::testing::seeded;
using uni::testing::TempDir;

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

NewObject doc(const std::string& name, const std::string& text = "body") {
  return NewObject{name, {}, {}, {ObjectPart{"text", "text/plain", to_bytes(text)}}};
}

struct Fixture {
  IdGenerator ids = seeded(1);
  Storage s{ids.next(), ids.next()};
  SignId section = s.create_section("Docs", ids).id;
};

}  // namespace

TEST(Storage, DepthLimitAtSix) {
  Fixture f;
  SignId z = f.section;
  for (int d = 1; d <= 5; ++d) {
    z = f.s.create_container(z, "c" + std::to_string(d), f.ids).id;
    EXPECT_EQ(f.s.zone(z)->depth, static_cast<std::uint32_t>(d));
  }
  EXPECT_EQ(code_of([&] { f.s.create_container(z, "c6", f.ids); }), Errc::DepthLimit);
  // An object may live at the deepest container.
  EXPECT_NO_THROW(f.s.put_object(z, doc("deep"), "a", 0, f.ids));
}

TEST(Storage, MoveRespectsDepth) {
  Fixture f;
  SignId a = f.s.create_container(f.section, "a", f.ids).id;
  SignId deep = a;
  for (int d = 2; d <= 5; ++d) deep = f.s.create_container(deep, "d", f.ids).id;
  auto b = f.s.create_container(f.section, "b", f.ids).id;
  f.s.create_container(b, "b2", f.ids);
  EXPECT_EQ(code_of([&] { f.s.move(b, deep); }), Errc::DepthLimit);
}

TEST(Storage, NoMoveIntoSelfOrBelow) {
  Fixture f;
  auto a = f.s.create_container(f.section, "a", f.ids).id;
  auto b = f.s.create_container(a, "b", f.ids).id;
  EXPECT_EQ(code_of([&] { f.s.move(a, a); }), Errc::InvalidArgument);
  EXPECT_EQ(code_of([&] { f.s.move(a, b); }), Errc::InvalidArgument);
  f.s.cut({a});
  EXPECT_EQ(code_of([&] { f.s.paste(a, f.ids); }), Errc::InvalidArgument);
  EXPECT_EQ(f.s.zone_path(b), (std::vector<SignId>{f.section, a}));
}

TEST(Storage, VersionsAndLeases) {
  Fixture f;
  auto obj = f.s.put_object(f.section, doc("note", "v1"), "ada", 1, f.ids);
  auto wp = f.ids.next();
  auto lease = f.s.open(obj, wp, LeaseMode::Edit, f.ids).lease;
  EXPECT_EQ(code_of([&] { f.s.open(obj, wp, LeaseMode::Edit, f.ids); }), Errc::LeaseConflict);
  auto view = f.s.open(obj, wp, LeaseMode::View, f.ids).lease;
  EXPECT_EQ(code_of([&] { f.s.edit(view, "text", to_bytes("x")); }), Errc::ViewOnly);
  f.s.edit(lease, "text", to_bytes("v2"), "text/plain");
  const auto& v = f.s.save(lease, SaveMode::NewVersion, "ada", 2);
  EXPECT_EQ(v.vid, 2u);
  EXPECT_EQ(v.hash, parts_hash(f.s.get_object(obj).parts));
  EXPECT_EQ(code_of([&] { f.s.delete_to_trash(obj); }), Errc::LeaseConflict);
  f.s.close(lease);
  f.s.close(view);
  EXPECT_EQ(code_of([&] { f.s.close(lease); }), Errc::StaleHandle);
  f.s.restore_version(obj, 1);
  EXPECT_EQ(to_string(f.s.get_object(obj).part("text")->bytes), "v1");
  EXPECT_EQ(f.s.get_object(obj).versions.size(), 2u);
}

TEST(Storage, TrashRestoreReturnsToOrigin) {
  Fixture f;
  auto c = f.s.create_container(f.section, "c", f.ids).id;
  auto obj = f.s.put_object(c, doc("x"), "a", 0, f.ids);
  f.s.delete_to_trash(obj);
  EXPECT_TRUE(f.s.in_trash(obj));
  EXPECT_TRUE(f.s.zone_path(obj).empty());
  f.s.restore_from_trash(obj);
  EXPECT_EQ(f.s.get_object(obj).zone, c);
  EXPECT_EQ(code_of([&] { f.s.restore_from_trash(obj); }), Errc::NotInTrash);
}

TEST(Storage, CopyPasteClonesCutPasteMoves) {
  Fixture f;
  auto other = f.s.create_section("Other", f.ids).id;
  auto obj = f.s.put_object(f.section, doc("x"), "a", 0, f.ids);
  EXPECT_EQ(code_of([&] { f.s.paste(other, f.ids); }), Errc::EmptyClipboard);
  f.s.copy({obj});
  auto copies = f.s.paste(other, f.ids);
  ASSERT_EQ(copies.size(), 1u);
  EXPECT_NE(copies[0], obj);
  EXPECT_EQ(f.s.live_object_count(), 2u);
  f.s.cut({obj});
  auto moved = f.s.paste(other, f.ids);
  EXPECT_EQ(moved, std::vector<SignId>{obj});
  EXPECT_EQ(f.s.get_object(obj).zone, other);
  EXPECT_EQ(f.s.live_object_count(), 2u);
}

TEST(Storage, UndoRedo) {
  Fixture f;
  auto before = f.s.state_json();
  auto obj = f.s.put_object(f.section, doc("x"), "a", 0, f.ids);
  auto after = f.s.state_json();
  EXPECT_TRUE(f.s.undo());
  EXPECT_EQ(f.s.object(obj), nullptr);
  EXPECT_TRUE(f.s.redo());
  EXPECT_EQ(f.s.state_json(), after);
  EXPECT_TRUE(f.s.undo());
  EXPECT_TRUE(f.s.undo());  // section
  EXPECT_FALSE(f.s.undo());
  (void)before;
}

TEST(Storage, SearchByTextZoneTags) {
  Fixture f;
  auto c = f.s.create_container(f.section, "c", f.ids).id;
  auto n = doc("Quarterly report");
  n.tags = {"q3"};
  auto a = f.s.put_object(c, n, "a", 0, f.ids);
  f.s.put_object(f.section, doc("shopping list"), "a", 0, f.ids);
  EXPECT_EQ(f.s.search({"report", std::nullopt, {}}), std::vector<SignId>{a});
  EXPECT_EQ(f.s.search({"", std::nullopt, {"q3"}}), std::vector<SignId>{a});
  EXPECT_EQ(f.s.search({"", c, {}}).size(), 1u);
}

TEST(LogLine, ChecksumRoundTrip) {
  LogRecord r{7, "section_create", Json{{"name", "x"}}, Json::object(), false};
  auto line = encode_log_line(r);
  ASSERT_EQ(line.back(), '\n');
  auto back = decode_log_line(std::string_view(line).substr(0, line.size() - 1));
  EXPECT_EQ(back, r);
  auto bad = line;
  bad[bad.find("\"x\"") + 1] = 'y';
  EXPECT_EQ(code_of([&] { decode_log_line(bad.substr(0, bad.size() - 1)); }), Errc::LogCorrupt);
}

// Property: random move/cut/paste/delete/restore never changes the number of
// objects, and every record replays to the same state.
TEST(Storage, ConservationProperty) {
  std::mt19937 rng(3);
  Fixture f;
  std::vector<SignId> zones{f.section};
  std::vector<SignId> objects;
  for (int i = 0; i < 6; ++i)
    zones.push_back(f.s.create_container(zones[rng() % zones.size()], "c", f.ids).id);
  for (int i = 0; i < 30; ++i) objects.push_back(f.s.put_object(zones[rng() % zones.size()], doc("o"), "a", 0, f.ids));
  auto total = f.s.live_object_count();
  std::vector<SignId> items = objects;
  items.insert(items.end(), zones.begin() + 1, zones.end());
  for (int op = 0; op < 500; ++op) {
    auto item = items[rng() % items.size()];
    auto dest = zones[rng() % zones.size()];
    try {
      switch (rng() % 5) {
        case 0: f.s.move(item, dest); break;
        case 1: f.s.cut({item}); break;
        case 2: f.s.paste(dest, f.ids); break;
        case 3: f.s.delete_to_trash(item); break;
        case 4: f.s.restore_from_trash(item); break;
      }
    } catch (const Error&) {
    }
    ASSERT_EQ(f.s.live_object_count(), total) << "op " << op;
  }
  Storage replayed(f.s.id(), f.s.owner_site());
  for (const auto& rec : f.s.log()) replayed.replay(rec);
  EXPECT_EQ(replayed.state_json(), f.s.state_json());
}

TEST(StorageFiles, RecoverTrimsTornTail) {
  TempDir tmp;
  Fixture f;
  StorageFiles files(tmp.path / "st", false);
  files.create(f.s);
  f.s.put_object(f.section, doc("a"), "x", 0, f.ids);
  files.flush(f.s);
  auto good = f.s.state_json();
  {
    std::ofstream out(tmp.path / "st" / "cmdlog.ndjson", std::ios::app);
    out << "{\"seq\":99,\"op\":\"pa";  // torn write
  }
  auto back = StorageFiles::recover(tmp.path / "st");
  EXPECT_EQ(back.state_json(), good);
  auto text = fsutil::read_file(tmp.path / "st" / "cmdlog.ndjson");
  EXPECT_EQ(text.back(), '\n');
}

TEST(StorageFiles, DamageBeforeCheckpointIsFatal) {
  TempDir tmp;
  Fixture f;
  StorageFiles files(tmp.path / "st", false);
  files.create(f.s);
  auto obj = f.s.put_object(f.section, doc("a"), "x", 0, f.ids);
  auto lease = f.s.open(obj, f.ids.next(), LeaseMode::Edit, f.ids).lease;
  f.s.edit(lease, "text", to_bytes("b"));
  f.s.save(lease, SaveMode::NewVersion, "x", 1);
  files.flush(f.s);
  auto path = tmp.path / "st" / "cmdlog.ndjson";
  auto text = fsutil::read_file(path);
  auto pos = text.find("object_put");
  ASSERT_NE(pos, std::string::npos);
  text[pos] = 'O';
  fsutil::write_atomic(path, text);
  EXPECT_EQ(code_of([&] { StorageFiles::recover(tmp.path / "st"); }), Errc::LogCorrupt);
}
