#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "newsrec/ctr.hpp"
#include "newsrec/events.hpp"
#include "newsrec/pipeline.hpp"
#include "newsrec/rng.hpp"
#include "newsrec/vecmath.hpp"

using namespace newsrec;

namespace {

std::string fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "newsrec_pipeline_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

ArticleIndex axis_articles() {
  ArticleIndex index;
  ArticleRecord x;
  x.article_id = "ax";
  x.published_at = 100;
  x.vector = Vec{1.0, 0.0};
  index.add(x);
  ArticleRecord y;
  y.article_id = "ay";
  y.published_at = 200;
  y.vector = Vec{0.0, 1.0};
  index.add(y);
  return index;
}

BehaviorEvent click(const std::string& user, const std::string& article, Timestamp ts) {
  BehaviorEvent e;
  e.kind = EventKind::click;
  e.user_id = user;
  e.article_id = article;
  e.ts = ts;
  return e;
}

BehaviorEvent visit(const std::string& user, Timestamp ts) {
  BehaviorEvent e;
  e.kind = EventKind::access;
  e.user_id = user;
  e.ts = ts;
  return e;
}

}  // namespace

TEST_CASE("events serialize with a fixed field order and parse back") {
  BehaviorEvent e = click("u1", "a1", 100);
  e.seq = 7;
  CHECK(format_event(e) == R"({"kind":"click","user_id":"u1","article_id":"a1","ts":100,"seq":7})");

  BehaviorEvent a = visit("u9", 555);
  a.seq = 3;
  CHECK(format_event(a) == R"({"kind":"access","user_id":"u9","ts":555,"seq":3})");

  auto back = parse_event(format_event(e));
  REQUIRE(back.has_value());
  CHECK(back->kind == EventKind::click);
  CHECK(back->user_id == "u1");
  CHECK(back->article_id == "a1");
  CHECK(back->ts == 100);
  CHECK(back->seq == 7);

  auto back_a = parse_event(format_event(a));
  REQUIRE(back_a.has_value());
  CHECK(back_a->kind == EventKind::access);
  CHECK(back_a->article_id.empty());
}

TEST_CASE("event parsing is lenient to extras and strict about requirements") {
  CHECK(parse_event(R"({"kind":"click","user_id":"u","article_id":"a","ts":1,"seq":0,"extra":9})")
            .has_value());
  CHECK_FALSE(parse_event("not json").has_value());
  CHECK_FALSE(parse_event(R"({"kind":"hover","user_id":"u","article_id":"a","ts":1,"seq":0})")
                  .has_value());
  CHECK_FALSE(parse_event(R"({"kind":"click","article_id":"a","ts":1,"seq":0})").has_value());
  // impressions and clicks must name an article; accesses must not need one
  CHECK_FALSE(parse_event(R"({"kind":"click","user_id":"u","ts":1,"seq":0})").has_value());
  CHECK(parse_event(R"({"kind":"access","user_id":"u","ts":1,"seq":0})").has_value());
  // ts and seq are required
  CHECK_FALSE(parse_event(R"({"kind":"access","user_id":"u","seq":0})").has_value());
  CHECK_FALSE(parse_event(R"({"kind":"access","user_id":"u","ts":1})").has_value());
}

TEST_CASE("clicks extend history and rebuild the user vector") {
  ArticleIndex index = axis_articles();
  MemoryProfileStore store;
  EventPipeline pipeline(store, index);

  pipeline.handle_click(click("u1", "ax", 100));
  UserProfile p = pipeline.handle_click(click("u1", "ay", 200));
  REQUIRE(p.history.size() == 2);
  CHECK(p.history[0] == "ax");
  CHECK(p.history[1] == "ay");
  REQUIRE(p.vector.has_value());
  CHECK((*p.vector)[0] == doctest::Approx(0.7071067811865475).epsilon(1e-15));
  CHECK((*p.vector)[1] == doctest::Approx(0.7071067811865475).epsilon(1e-15));
  REQUIRE(p.last_access_at.has_value());
  CHECK(*p.last_access_at == 200);

  // The store holds the same profile the handler returned.
  auto stored = store.get("u1");
  REQUIRE(stored.has_value());
  CHECK(stored->history == p.history);
}

TEST_CASE("history is bounded and drops the oldest click") {
  ArticleIndex index;
  for (int i = 0; i < 10; ++i) {
    ArticleRecord a;
    a.article_id = "a" + std::to_string(i);
    a.published_at = i;
    a.vector = Vec{1.0, 0.0};
    index.add(a);
  }
  MemoryProfileStore store;
  PipelineOptions opts;
  opts.history_len = 3;
  EventPipeline pipeline(store, index, opts);
  for (int i = 0; i < 5; ++i) pipeline.handle_click(click("u1", "a" + std::to_string(i), i));
  auto p = store.get("u1");
  REQUIRE(p.has_value());
  REQUIRE(p->history.size() == 3);
  CHECK(p->history[0] == "a2");
  CHECK(p->history[1] == "a3");
  CHECK(p->history[2] == "a4");
}

TEST_CASE("history dedup moves a re-click to the end") {
  ArticleIndex index = axis_articles();
  MemoryProfileStore store;
  PipelineOptions opts;
  opts.dedup_history = true;
  EventPipeline pipeline(store, index, opts);
  pipeline.handle_click(click("u1", "ax", 1));
  pipeline.handle_click(click("u1", "ay", 2));
  pipeline.handle_click(click("u1", "ax", 3));
  auto p = store.get("u1");
  REQUIRE(p.has_value());
  REQUIRE(p->history.size() == 2);
  CHECK(p->history[0] == "ay");
  CHECK(p->history[1] == "ax");

  // Without dedup the duplicate stays.
  MemoryProfileStore store2;
  EventPipeline plain(store2, index);
  plain.handle_click(click("u1", "ax", 1));
  plain.handle_click(click("u1", "ay", 2));
  plain.handle_click(click("u1", "ax", 3));
  CHECK(store2.get("u1")->history.size() == 3);
}

TEST_CASE("unknown clicked articles stay in history but not in the vector") {
  ArticleIndex index = axis_articles();
  MemoryProfileStore store;
  EventPipeline pipeline(store, index);
  pipeline.handle_click(click("u1", "mystery", 1));
  pipeline.handle_click(click("u1", "ax", 2));
  CHECK(pipeline.unknown_article_count() >= 1);
  auto p = store.get("u1");
  REQUIRE(p.has_value());
  CHECK(p->history.size() == 2);
  REQUIRE(p->vector.has_value());
  CHECK((*p->vector)[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("accesses advance the last visit monotonically") {
  ArticleIndex index = axis_articles();
  MemoryProfileStore store;
  EventPipeline pipeline(store, index);
  pipeline.handle_access(visit("u1", 500));
  pipeline.handle_access(visit("u1", 300));  // out of order: ignored
  auto p = store.get("u1");
  REQUIRE(p.has_value());
  CHECK(*p->last_access_at == 500);
  CHECK_FALSE(p->vector.has_value());
  pipeline.handle_access(visit("u1", 900));
  CHECK(*store.get("u1")->last_access_at == 900);
}

TEST_CASE("streamed profile equals a from-scratch recompute") {
  Rng rng(606);
  const int num_articles = 200;
  ArticleIndex index;
  for (int i = 0; i < num_articles; ++i) {
    ArticleRecord a;
    a.article_id = "a" + std::to_string(i);
    a.published_at = i;
    Vec v(8);
    for (auto& x : v) x = rng.normal();
    a.vector = normalized(v);
    index.add(a);
  }

  MemoryProfileStore store;
  PipelineOptions opts;
  opts.history_len = 50;
  EventPipeline pipeline(store, index, opts);

  std::vector<std::string> all_clicks;
  for (int i = 0; i < 5000; ++i) {
    std::string id = "a" + std::to_string(rng.below(num_articles));
    all_clicks.push_back(id);
    pipeline.handle_click(click("u1", id, 1000 + i));
  }

  auto p = store.get("u1");
  REQUIRE(p.has_value());
  REQUIRE(p->history.size() == 50);
  std::vector<std::string> expected(all_clicks.end() - 50, all_clicks.end());
  CHECK(p->history == expected);

  Vec sum(8, 0.0);
  for (const auto& id : expected) add_into(sum, *index.find(id)->vector);
  auto unit = normalized(sum);
  REQUIRE(unit.has_value());
  REQUIRE(p->vector.has_value());
  for (std::size_t j = 0; j < unit->size(); ++j)
    CHECK((*p->vector)[j] == doctest::Approx((*unit)[j]).epsilon(1e-12));
  CHECK(*p->last_access_at == 1000 + 4999);
}

TEST_CASE("interleaving across users does not change per-user profiles") {
  ArticleIndex index = axis_articles();
  std::vector<BehaviorEvent> u1 = {click("u1", "ax", 10), visit("u1", 20),
                                   click("u1", "ay", 30)};
  std::vector<BehaviorEvent> u2 = {visit("u2", 5), click("u2", "ay", 15),
                                   click("u2", "ay", 25), click("u2", "ax", 35)};

  auto run = [&](const std::vector<BehaviorEvent>& log) {
    auto store = std::make_unique<MemoryProfileStore>();
    EventPipeline pipeline(*store, index);
    ReplayReport report;
    for (const auto& ev : log) pipeline.dispatch(ev, report);
    return store;
  };

  std::vector<BehaviorEvent> merged_a;  // u1 block then u2 block
  merged_a.insert(merged_a.end(), u1.begin(), u1.end());
  merged_a.insert(merged_a.end(), u2.begin(), u2.end());
  std::vector<BehaviorEvent> merged_b;  // alternating
  merged_b = {u2[0], u1[0], u2[1], u1[1], u2[2], u1[2], u2[3]};

  auto sa = run(merged_a);
  auto sb = run(merged_b);
  for (const std::string uid : {"u1", "u2"}) {
    auto pa = sa->get(uid);
    auto pb = sb->get(uid);
    REQUIRE(pa.has_value());
    REQUIRE(pb.has_value());
    CHECK(pa->history == pb->history);
    CHECK(pa->last_access_at == pb->last_access_at);
    CHECK(pa->vector.has_value() == pb->vector.has_value());
    if (pa->vector)
      for (std::size_t j = 0; j < pa->vector->size(); ++j)
        CHECK((*pa->vector)[j] == (*pb->vector)[j]);
  }
}

TEST_CASE("profile records round-trip through their text form") {
  UserProfile p;
  p.user_id = "u42";
  p.history = {"a1", "a9", "a4"};
  Rng rng(9);
  Vec v(6);
  for (auto& x : v) x = rng.normal();
  p.vector = normalized(v);
  p.last_access_at = 1700000123;

  auto back = parse_profile(format_profile(p));
  REQUIRE(back.has_value());
  CHECK(back->user_id == p.user_id);
  CHECK(back->history == p.history);
  REQUIRE(back->vector.has_value());
  for (std::size_t j = 0; j < p.vector->size(); ++j)
    CHECK((*back->vector)[j] == (*p.vector)[j]);  // %.17g is exact
  CHECK(back->last_access_at == p.last_access_at);

  UserProfile bare;
  bare.user_id = "u0";
  auto bare_back = parse_profile(format_profile(bare));
  REQUIRE(bare_back.has_value());
  CHECK(bare_back->history.empty());
  CHECK_FALSE(bare_back->vector.has_value());
  CHECK_FALSE(bare_back->last_access_at.has_value());

  CHECK_FALSE(parse_profile("garbage line").has_value());
}

TEST_CASE("profile store contract") {
  auto exercise = [](ProfileStore& store) {
    CHECK_FALSE(store.get("nobody").has_value());
    UserProfile p;
    p.user_id = "u2";
    p.history = {"a1"};
    store.put(p);
    UserProfile q;
    q.user_id = "u1";
    q.last_access_at = 77;
    store.put(q);
    CHECK(store.size() == 2);
    auto ids = store.user_ids();
    REQUIRE(ids.size() == 2);
    CHECK(ids[0] == "u1");  // sorted
    CHECK(ids[1] == "u2");
    p.history.push_back("a2");
    store.put(p);  // overwrite
    CHECK(store.size() == 2);
    CHECK(store.get("u2")->history.size() == 2);
  };

  MemoryProfileStore mem;
  exercise(mem);
  FileProfileStore file(fresh_dir("contract"));
  exercise(file);
}

TEST_CASE("file store survives reopen, journals writes, and compacts") {
  std::string dir = fresh_dir("durability");
  UserProfile p;
  p.user_id = "u1";
  p.history = {"a1", "a2"};
  p.vector = Vec{0.6, 0.8};
  p.last_access_at = 1234;

  {
    FileProfileStore store(dir);
    store.put(p);
    UserProfile p2 = p;
    p2.history.push_back("a3");
    store.put(p2);  // journal now holds both versions
  }
  {
    FileProfileStore store(dir);
    REQUIRE(store.size() == 1);
    auto got = store.get("u1");
    REQUIRE(got.has_value());
    CHECK(got->history.size() == 3);  // last write wins on replay

    store.compact();
    std::ifstream journal(dir + "/journal.txt");
    std::string rest((std::istreambuf_iterator<char>(journal)),
                     std::istreambuf_iterator<char>());
    CHECK(rest.empty());
  }
  {
    FileProfileStore store(dir);
    REQUIRE(store.size() == 1);
    CHECK(store.get("u1")->history.size() == 3);
  }
}

TEST_CASE("a corrupt journal line fails loudly on reopen") {
  std::string dir = fresh_dir("corrupt");
  {
    FileProfileStore store(dir);
    UserProfile p;
    p.user_id = "u1";
    store.put(p);
  }
  {
    std::ofstream journal(dir + "/journal.txt", std::ios::app);
    journal << "}{ definitely not a profile\n";
  }
  CHECK_THROWS_WITH_AS(FileProfileStore{dir},
                       ("corrupt profile record in " + dir + "/journal.txt").c_str(),
                       std::runtime_error);
}

TEST_CASE("replay counts lines, skips malformed ones, and attributes ctr") {
  ArticleIndex index = axis_articles();
  MemoryProfileStore store;
  EventPipeline pipeline(store, index);

  CtrAccumulator acc(0, 1000, 4, 2, 0);
  pipeline.attach_ctr(&acc, [](const std::string& user_id) -> std::optional<int> {
    if (user_id == "u1") return 0;
    return std::nullopt;  // u2 has no cluster yet
  });

  std::ostringstream log;
  log << format_event(click("u1", "ax", 10)) << "\n";
  log << "this line is noise\n";
  log << format_event(visit("u1", 20)) << "\n";
  BehaviorEvent imp;
  imp.kind = EventKind::impression;
  imp.user_id = "u1";
  imp.article_id = "ay";
  imp.ts = 30;
  log << format_event(imp) << "\n";
  imp.user_id = "u2";
  log << format_event(imp) << "\n";
  log << "\n";  // blank lines are counted but not malformed

  std::istringstream in(log.str());
  ReplayReport report = pipeline.replay(in);
  CHECK(report.lines == 6);
  CHECK(report.malformed == 1);
  REQUIRE(report.malformed_line_numbers.size() == 1);
  CHECK(report.malformed_line_numbers[0] == 2);
  CHECK(report.clicks == 1);
  CHECK(report.accesses == 1);
  CHECK(report.impressions == 2);
  CHECK(report.unattributed == 1);  // u2's impression had no cluster
  CHECK(report.events_per_second > 0.0);

  // u1's click and impression reached the accumulator, u2's did not.
  const CtrCell* clicked = acc.open_window().find(0, "ax");
  REQUIRE(clicked != nullptr);
  CHECK(clicked->clicks == 1);
  const CtrCell* shown = acc.open_window().find(0, "ay");
  REQUIRE(shown != nullptr);
  CHECK(shown->impressions == 1);
}
