#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "newsrec/ctr.hpp"
#include "newsrec/rng.hpp"

using namespace newsrec;

namespace {

std::string tmp_dir() {
  auto dir = std::filesystem::temp_directory_path() / "newsrec_ctr_tests";
  std::filesystem::create_directories(dir);
  return dir.string();
}

std::string slurp(const std::string& path) {
  FILE* f = std::fopen(path.c_str(), "rb");
  REQUIRE(f != nullptr);
  std::string out;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), f)) > 0) out.append(buf, n);
  std::fclose(f);
  return out;
}

BehaviorEvent ev(EventKind kind, const std::string& user, const std::string& article,
                 Timestamp ts) {
  BehaviorEvent e;
  e.kind = kind;
  e.user_id = user;
  e.article_id = article;
  e.ts = ts;
  return e;
}

}  // namespace

TEST_CASE("ctr arithmetic with and without smoothing") {
  CtrTable t;
  t.num_clusters = 2;
  t.cells[{0, "a1"}] = CtrCell{19, 1};
  t.cells[{1, "a2"}] = CtrCell{0, 0};

  CHECK(t.ctr(0, "a1") == doctest::Approx(1.0 / 19.0).epsilon(1e-15));
  CHECK(t.ctr(0, "a1", Smoothing{0.0, 1.0}) == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(t.ctr(0, "a1", Smoothing{1.0, 2.0}) == doctest::Approx(2.0 / 21.0).epsilon(1e-15));

  // Zero impressions score zero unless alpha injects a prior.
  CHECK(t.ctr(1, "a2") == 0.0);
  CHECK(t.ctr(1, "a2", Smoothing{0.0, 1.0}) == 0.0);
  CHECK(t.ctr(1, "a2", Smoothing{0.5, 1.0}) == doctest::Approx(0.5).epsilon(1e-15));
  // Missing cells contribute nothing regardless of smoothing.
  CHECK(t.ctr(0, "missing") == 0.0);
  CHECK(t.ctr(1, "missing", Smoothing{0.5, 1.0}) == 0.0);

  CHECK(t.clicks(0, "a1") == 1);
  CHECK(t.clicks(0, "missing") == 0);
  CHECK(t.find(0, "a1") != nullptr);
  CHECK(t.find(0, "nope") == nullptr);
}

TEST_CASE("recording validates clusters and skips accesses") {
  CtrAccumulator acc(1000, 100, 4, 3, 11);
  CHECK_THROWS_WITH_AS(acc.record(ev(EventKind::impression, "u1", "a1", 1000), -1),
                       "unknown cluster", std::invalid_argument);
  CHECK_THROWS_WITH_AS(acc.record(ev(EventKind::impression, "u1", "a1", 1000), 3),
                       "unknown cluster", std::invalid_argument);

  acc.record(ev(EventKind::access, "u1", "", 1001), 0);
  CHECK(acc.open_window().cells.empty());

  acc.record(ev(EventKind::impression, "u1", "a1", 1002), 0);
  acc.record(ev(EventKind::click, "u1", "a1", 1003), 0);
  const CtrCell* cell = acc.open_window().find(0, "a1");
  REQUIRE(cell != nullptr);
  CHECK(cell->impressions == 1);
  CHECK(cell->clicks == 1);
  CHECK(acc.open_window().anomalies == 0);
}

TEST_CASE("clicks arriving before any impression count as anomalies") {
  CtrAccumulator acc(0, 100, 4, 2, 1);
  acc.record(ev(EventKind::click, "u1", "a9", 5), 1);
  CHECK(acc.open_window().anomalies == 1);
  const CtrCell* cell = acc.open_window().find(1, "a9");
  REQUIRE(cell != nullptr);
  CHECK(cell->clicks == 1);
  CHECK(cell->impressions == 0);

  // Once an impression exists, further clicks are normal.
  acc.record(ev(EventKind::impression, "u2", "a9", 6), 1);
  acc.record(ev(EventKind::click, "u2", "a9", 7), 1);
  CHECK(acc.open_window().anomalies == 1);
}

TEST_CASE("windows roll on aligned boundaries") {
  CtrAccumulator acc(1000, 100, 8, 1, 3);
  CHECK(acc.open_window().window_start == 1000);
  CHECK(acc.open_end() == 1100);

  acc.ingest(ev(EventKind::impression, "u1", "a1", 1050), 0);
  // ts 1205 forces two rolls: [1000,1100) and [1100,1200) freeze.
  acc.ingest(ev(EventKind::impression, "u1", "a2", 1205), 0);
  CHECK(acc.frozen_count() == 2);
  CHECK(acc.open_window().window_start == 1200);

  CtrTable merged = acc.merged();
  CHECK(merged.window_start == 1000);
  CHECK(merged.window_end == 1200);
  REQUIRE(merged.find(0, "a1") != nullptr);
  CHECK(merged.find(0, "a1")->impressions == 1);
  // The open window's a2 impression is not part of the merge.
  CHECK(merged.find(0, "a2") == nullptr);

  // Late events are tolerated and land in the open window.
  acc.ingest(ev(EventKind::impression, "u1", "a3", 1100), 0);
  CHECK(acc.open_window().window_start == 1200);
  REQUIRE(acc.open_window().find(0, "a3") != nullptr);

  // roll_until is idempotent within the open window.
  acc.roll_until(1299);
  CHECK(acc.open_window().window_start == 1200);
  acc.roll_until(1300);
  CHECK(acc.open_window().window_start == 1300);
}

TEST_CASE("merged keeps only the most recent windows") {
  CtrAccumulator acc(0, 10, 3, 1, 1);
  for (int w = 0; w < 6; ++w) {
    acc.ingest(ev(EventKind::impression, "u", "w" + std::to_string(w), w * 10), 0);
  }
  acc.roll_until(60);
  CHECK(acc.frozen_count() == 3);  // eviction keeps the merge horizon only
  CtrTable merged = acc.merged();
  CHECK(merged.window_start == 30);
  CHECK(merged.window_end == 60);
  CHECK(merged.find(0, "w0") == nullptr);
  CHECK(merged.find(0, "w2") == nullptr);
  CHECK(merged.find(0, "w3") != nullptr);
  CHECK(merged.find(0, "w5") != nullptr);
}

TEST_CASE("merged counts match a brute-force recount of the raw log") {
  const Timestamp start = 0;
  const Timestamp window_len = 100;
  const int merge_windows = 24;
  const int num_clusters = 5;
  const Timestamp log_end = 5000;

  Rng rng(2024);
  CtrAccumulator acc(start, window_len, merge_windows, num_clusters, 77);
  std::vector<std::pair<BehaviorEvent, int>> log;
  Timestamp ts = start;
  for (int i = 0; i < 10000; ++i) {
    ts = std::min<Timestamp>(log_end - 1, ts + static_cast<Timestamp>(rng.below(2)));
    EventKind kind = rng.below(10) < 5   ? EventKind::impression
                     : rng.below(10) < 7 ? EventKind::click
                                         : EventKind::access;
    std::string article = "a" + std::to_string(rng.below(30));
    int cluster = static_cast<int>(rng.below(num_clusters));
    log.emplace_back(ev(kind, "u" + std::to_string(rng.below(40)), article, ts), cluster);
  }
  for (const auto& [e, cluster] : log) acc.ingest(e, cluster);
  acc.roll_until(log_end);

  CtrTable merged = acc.merged();
  Timestamp merged_start = log_end - static_cast<Timestamp>(merge_windows) * window_len;
  CHECK(merged.window_start == merged_start);
  CHECK(merged.window_end == log_end);

  std::map<std::pair<int, std::string>, CtrCell> brute;
  std::int64_t brute_impressions = 0;
  for (const auto& [e, cluster] : log) {
    if (e.ts < merged_start || e.ts >= log_end) continue;
    if (e.kind == EventKind::access) continue;
    CtrCell& cell = brute[{cluster, e.article_id}];
    if (e.kind == EventKind::impression) {
      ++cell.impressions;
      ++brute_impressions;
    } else {
      ++cell.clicks;
    }
  }

  REQUIRE(merged.cells.size() == brute.size());
  std::int64_t merged_impressions = 0;
  for (const auto& [key, cell] : merged.cells) {
    auto it = brute.find(key);
    REQUIRE(it != brute.end());
    CHECK(cell.impressions == it->second.impressions);
    CHECK(cell.clicks == it->second.clicks);
    merged_impressions += cell.impressions;
  }
  CHECK(merged_impressions == brute_impressions);
}

TEST_CASE("ctr snapshots round-trip byte-identically") {
  CtrAccumulator acc(500, 50, 4, 3, 21);
  Rng rng(8);
  for (int i = 0; i < 400; ++i) {
    Timestamp ts = 500 + static_cast<Timestamp>(i);
    EventKind kind = rng.below(4) == 0 ? EventKind::click : EventKind::impression;
    acc.ingest(ev(kind, "u", "a" + std::to_string(rng.below(12)), ts),
               static_cast<int>(rng.below(3)));
  }
  acc.roll_until(900);
  CtrTable merged = acc.merged();

  auto dir = tmp_dir();
  auto path = dir + "/ctr.snapshot";
  merged.save(path);
  CtrTable back = CtrTable::load(path);
  CHECK(back.window_start == merged.window_start);
  CHECK(back.window_end == merged.window_end);
  CHECK(back.model_version == merged.model_version);
  CHECK(back.num_clusters == merged.num_clusters);
  CHECK(back.anomalies == merged.anomalies);
  REQUIRE(back.cells.size() == merged.cells.size());
  for (const auto& [key, cell] : merged.cells) {
    auto it = back.cells.find(key);
    REQUIRE(it != back.cells.end());
    CHECK(it->second.impressions == cell.impressions);
    CHECK(it->second.clicks == cell.clicks);
  }
  auto path2 = dir + "/ctr2.snapshot";
  back.save(path2);
  CHECK(slurp(path) == slurp(path2));
}
