#include <gtest/gtest.h>
#include <openssl/sha.h>

#include <set>

#include "support.hpp"
#include "unispace/core/catalog.hpp"
#include "unispace/core/domain.hpp"
#include "unispace/core/lint.hpp"
#include "unispace/error.hpp"
#include "unispace/util.hpp"

using namespace uni;
using uni::testing::card;
using uni::testing::seeded;

namespace {

// Independent computation of the id stream: SHA-256 over seed and a
// big-endian counter, then the version 4 / variant 10 bits.
Uuid oracle_id(const std::array<std::uint8_t, 32>& seed, std::uint64_t counter) {
  unsigned char buf[40];
  std::copy(seed.begin(), seed.end(), buf);
  for (int i = 0; i < 8; ++i) buf[32 + i] = static_cast<unsigned char>(counter >> (56 - 8 * i));
  unsigned char d[32];
  SHA256(buf, sizeof buf, d);
  std::uint64_t hi = 0, lo = 0;
  for (int i = 0; i < 8; ++i) hi = hi << 8 | d[i];
  for (int i = 8; i < 16; ++i) lo = lo << 8 | d[i];
  hi = (hi & ~0xf000ull) | 0x4000ull;
  lo = (lo & ~(3ull << 62)) | (2ull << 62);
  return {hi, lo};
}

Error catch_error(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "no error thrown";
  return Error(Errc::Malformed, "none");
}

}  // namespace

TEST(Ids, StreamMatchesOracle) {
  auto g = seeded(7);
  for (std::uint64_t i = 0; i < 50; ++i) {
    auto id = g.next();
    EXPECT_EQ(id.local, oracle_id(g.seed(), i)) << i;
  }
  EXPECT_EQ(g.counter(), 50u);
}

TEST(Ids, SameSeedSameStream) {
  auto a = seeded(3), b = seeded(3);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(a.next(), b.next());
  auto c = IdGenerator(a.domain(), a.seed(), 5);
  auto d = seeded(3);
  for (int i = 0; i < 5; ++i) d.next();
  EXPECT_EQ(c.next(), d.next());
}

TEST(Ids, TextRoundTrip) {
  auto g = seeded(1);
  for (int i = 0; i < 10; ++i) {
    auto id = g.next();
    EXPECT_EQ(SignId::parse(id.str()), id);
    EXPECT_EQ(id.str().size(), 65u);
  }
  EXPECT_EQ(catch_error([] { SignId::parse("nothex"); }).code(), Errc::Malformed);
  EXPECT_EQ(catch_error([] { Uuid::parse("zz"); }).code(), Errc::Malformed);
}

TEST(Ids, RandomUuidsDiffer) {
  std::set<std::pair<std::uint64_t, std::uint64_t>> seen;
  for (int i = 0; i < 100; ++i) {
    auto u = Uuid::random();
    EXPECT_EQ((u.hi >> 12) & 0xf, 4u);
    seen.insert({u.hi, u.lo});
  }
  EXPECT_EQ(seen.size(), 100u);
}

TEST(Util, HexAndBase64) {
  Bytes b{0, 1, 0xfe, 0xff};
  EXPECT_EQ(to_hex(b), "0001feff");
  EXPECT_EQ(from_hex("0001feff"), b);
  EXPECT_EQ(base64_encode(to_bytes("hello")), "aGVsbG8=");
  EXPECT_EQ(to_string(base64_decode("aGVsbG8=")), "hello");
  EXPECT_THROW(base64_decode("a*=="), Error);
  EXPECT_EQ(sha256_hex(std::string_view("abc")),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(crc32_hex("123456789"), "cbf43926");
}

TEST(Errors, TokensRoundTrip) {
  for (auto c : {Errc::NotFound, Errc::AccessDenied, Errc::LogCorrupt, Errc::ScriptParse,
                 Errc::ArchiveCorrupt, Errc::LeasesOpen, Errc::BindFailed}) {
    EXPECT_EQ(errc_from_token(to_token(c)), c);
  }
  EXPECT_EQ(to_token(Errc::NotFound), "NOT_FOUND");
  EXPECT_EQ(errc_from_token("NO_SUCH_THING"), Errc::Malformed);
  Error e(Errc::DepthLimit, "6 > 5");
  EXPECT_EQ(e.detail(), "6 > 5");
}

TEST(Domain, CreateHasSystemSite) {
  auto ids = seeded(2);
  auto d = create_domain(card("Ada"), ids);
  ASSERT_EQ(d.partitions.size(), 1u);
  EXPECT_EQ(d.partitions[0].mount.kind, MountKind::Resident);
  auto* sys = d.site(d.system_site);
  ASSERT_NE(sys, nullptr);
  EXPECT_EQ(sys->kind, SiteKind::System);
  std::vector<std::string> names;
  for (auto& w : sys->workplaces) names.push_back(w.name);
  EXPECT_EQ(names, (std::vector<std::string>{"TaskMgmt", "DataMgmt", "Search", "Install",
                                             "Devices", "Settings"}));
  EXPECT_NE(sys->workplace("TaskMgmt")->find_tool("create_task"), nullptr);
}

TEST(Domain, MountRemountRevivesId) {
  auto ids = seeded(2);
  auto d = create_domain(card("Ada"), ids);
  MountDescriptor usb{MountKind::MountedDevice, "usb-1"};
  auto id = mount_partition(d, usb, ids).id;
  EXPECT_EQ(catch_error([&] { mount_partition(d, usb, ids); }).code(), Errc::AlreadyMounted);
  EXPECT_EQ(d.visible_partitions().size(), 2u);
  unmount_partition(d, id);
  EXPECT_EQ(d.visible_partitions().size(), 1u);
  EXPECT_EQ(catch_error([&] { unmount_partition(d, id); }).code(), Errc::NotMounted);
  EXPECT_EQ(mount_partition(d, usb, ids).id, id);
  EXPECT_EQ(catch_error([&] { unmount_partition(d, ids.next()); }).code(), Errc::NotFound);
}

TEST(Domain, DescribeNeverShowsId) {
  Sign s;
  s.id = seeded(4).next();
  s.name = "Draft";
  s.properties["purpose"] = "notes";
  auto d = describe(s);
  EXPECT_EQ(d.name, "Draft");
  EXPECT_EQ(d.purpose, "notes");
  EXPECT_EQ(d.type.find(s.id.str()), std::string::npos);
  EXPECT_EQ(d.name.find(s.id.str()), std::string::npos);
}

TEST(Domain, InstallSiteFromTemplate) {
  auto ids = seeded(2);
  auto d = create_domain(card("Ada"), ids);
  auto tmpl = builtin_template("document-editor");
  auto& site = install_site(d, d.partitions[0].id, tmpl, "Reports", ids);
  EXPECT_EQ(site.workplaces.size(), 2 + tmpl.workplaces.size());
  EXPECT_NE(site.workplace("TaskMgmt"), nullptr);
  EXPECT_NE(site.workplace("DataMgmt"), nullptr);
  auto empty = install_site(d, d.partitions[0].id, builtin_template("empty"), "Bare", ids);
  EXPECT_EQ(empty.workplaces.size(), 2u);
}

TEST(Catalog, TemplatesRoundTrip) {
  for (auto& name : builtin_template_names()) {
    auto t = builtin_template(name);
    auto again = parse_template(template_to_json(t));
    EXPECT_EQ(template_to_json(again), template_to_json(t)) << name;
  }
  EXPECT_EQ(catch_error([] { builtin_template("nope"); }).code(), Errc::InvalidTemplate);
  EXPECT_EQ(catch_error([] { parse_template(Json{{"workplaces", 3}}); }).code(),
            Errc::InvalidTemplate);
}

TEST(Catalog, SystemToolbarsWithinPerceptualLimit) {
  for (auto span : {task_tools(), selection_tools(), desk_tools(), search_tools(), data_tools(),
                    install_tools(), device_tools(), settings_tools(), peer_tools()})
    EXPECT_LE(span.size(), 20u);
  EXPECT_TRUE(is_system_tool("create_task"));
  EXPECT_FALSE(is_system_tool("bold"));
}

namespace {

LintGraph flat_graph(std::size_t tools) {
  LintGraph g;
  g.root = g.add("bar", LintKind::Flat);
  for (std::size_t i = 0; i < tools; ++i) g.link(g.root, g.add("t" + std::to_string(i), LintKind::Leaf));
  return g;
}

LintGraph group_graph(std::size_t members) {
  LintGraph g;
  g.root = g.add("menu", LintKind::Group);
  for (std::size_t i = 0; i < members; ++i) g.link(g.root, g.add("m" + std::to_string(i), LintKind::Leaf));
  return g;
}

}  // namespace

TEST(Lint, PerceptualBoundary) {
  ComplexityLimits lim;
  EXPECT_TRUE(validate_complexity(flat_graph(20), lim).passed());
  auto r = validate_complexity(flat_graph(21), lim);
  ASSERT_EQ(r.violations.size(), 1u);
  EXPECT_EQ(r.violations[0].rule, LintRule::PerceptualElements);
  EXPECT_EQ(r.violations[0].observed, 21u);
  EXPECT_EQ(r.violations[0].limit, 20u);
}

TEST(Lint, MentalBoundary) {
  ComplexityLimits lim;
  EXPECT_TRUE(validate_complexity(group_graph(7), lim).passed());
  auto r = validate_complexity(group_graph(8), lim);
  ASSERT_EQ(r.violations.size(), 1u);
  EXPECT_EQ(r.violations[0].rule, LintRule::MentalElements);
}

TEST(Lint, DepthLimits) {
  ComplexityLimits lim;
  LintGraph g;
  std::size_t prev = g.root = g.add("g0", LintKind::Group);
  for (int i = 1; i < 4; ++i) {
    auto n = g.add("g" + std::to_string(i), LintKind::Group);
    g.link(prev, n);
    prev = n;
  }
  auto r = validate_complexity(g, lim);
  ASSERT_EQ(r.violations.size(), 1u);
  EXPECT_EQ(r.violations[0].rule, LintRule::MentalDepth);

  LintGraph chain;
  prev = chain.root = chain.add("f0", LintKind::Flat);
  for (int i = 1; i < 8; ++i) {
    auto n = chain.add("f" + std::to_string(i), LintKind::Flat);
    chain.link(prev, n);
    prev = n;
  }
  r = validate_complexity(chain, lim);
  ASSERT_EQ(r.violations.size(), 1u);
  EXPECT_EQ(r.violations[0].rule, LintRule::PerceptualDepth);
}

TEST(Lint, CycleDetected) {
  Json doc = {{"root", "a"},
              {"nodes",
               {{"a", {{"name", "A"}, {"children", {"b"}}}}, {"b", {{"name", "B"}, {"children", {"a"}}}}}}};
  auto g = parse_lint_document(doc);
  EXPECT_EQ(catch_error([&] { validate_complexity(g, {}); }).code(), Errc::CycleDetected);
}

TEST(Lint, Fixtures) {
  auto load = [](const char* name) {
    return parse_lint_document(Json::parse(fsutil::read_file(std::filesystem::path(UNI_FIXTURES) / name)));
  };
  ComplexityLimits lim;
  auto ribbon = validate_complexity(load("word-ribbon.json"), lim);
  ASSERT_EQ(ribbon.violations.size(), 1u);
  EXPECT_EQ(ribbon.violations[0].rule, LintRule::MentalElements);
  EXPECT_EQ(ribbon.violations[0].observed, 10u);
  EXPECT_TRUE(validate_complexity(load("technological.json"), lim).passed());
  auto bar = validate_complexity(load("toolbar-21.json"), lim);
  ASSERT_EQ(bar.violations.size(), 1u);
  EXPECT_EQ(bar.violations[0].rule, LintRule::PerceptualElements);
}

// Property: random trees with fan-out within the limits and shallow depth
// never report a violation; bumping one group over the limit reports exactly one.
TEST(Lint, RandomTreesProperty) {
  std::mt19937 rng(42);
  ComplexityLimits lim;
  for (int round = 0; round < 200; ++round) {
    LintGraph g;
    g.root = g.add("root", LintKind::Group);
    std::vector<std::size_t> groups{g.root};
    std::uniform_int_distribution<int> fan(1, 7);
    int kids = fan(rng);
    for (int i = 0; i < kids; ++i) {
      auto bar = g.add("bar", LintKind::Flat);
      g.link(g.root, bar);
      int tools = std::uniform_int_distribution<int>(0, 20)(rng);
      for (int k = 0; k < tools; ++k) g.link(bar, g.add("tool", LintKind::Leaf));
    }
    EXPECT_TRUE(validate_complexity(g, lim).passed());
    for (int i = kids; i < 8; ++i) g.link(g.root, g.add("extra", LintKind::Leaf));
    EXPECT_EQ(validate_complexity(g, lim).violations.size(), 1u);
  }
}
