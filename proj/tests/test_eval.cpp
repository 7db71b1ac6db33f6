#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "newsrec/datagen.hpp"
#include "newsrec/eval.hpp"
#include "newsrec/rng.hpp"

using namespace newsrec;

namespace {

std::string fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "newsrec_eval_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

struct MetricCase {
  std::vector<std::string> ranked;
  std::set<std::string> relevant;
  std::optional<int> k;
  double ap;
  double ndcg;
};

}  // namespace

TEST_CASE("average precision and ndcg match a hand-checked fixture") {
  // Values frozen from independent hand computation; the binary-gain DCG
  // discounts are 1/log2(rank+1).
  const std::vector<MetricCase> cases = {
      {{"a", "b", "c"}, {"a"}, std::nullopt, 1.0, 1.0},
      {{"a", "b"}, {"b"}, std::nullopt, 0.5, 0.6309297535714575},
      {{"a", "b", "c", "d"}, {"a", "c"}, std::nullopt, 0.8333333333333333, 0.9197207891481876},
      {{"a", "b", "c"}, {"c"}, std::nullopt, 0.3333333333333333, 0.5},
      // k=2 cuts the list before the only hit.
      {{"a", "b", "c"}, {"c"}, 2, 0.0, 0.0},
      // k=2 also caps the normalizers, so a perfect prefix scores 1.
      {{"a", "b"}, {"a", "b", "c"}, 2, 1.0, 1.0},
      // Hits at ranks 1 and 3 with a third relevant item never retrieved.
      {{"a", "b", "c"}, {"a", "c", "x"}, 3, 0.5555555555555555, 0.7039180890341347},
      {{"a", "b"}, {"z"}, std::nullopt, 0.0, 0.0},
      {{"a", "b"}, {"a", "b"}, std::nullopt, 1.0, 1.0},
      // k beyond the list length is a no-op cutoff.
      {{"a", "b"}, {"b"}, 10, 0.5, 0.6309297535714575},
      {{"r1", "r2", "x", "r3", "y"},
       {"r1", "r2", "r3"},
       std::nullopt,
       0.9166666666666666,
       0.9674679834891693},
      // Without a cutoff the AP denominator stays |relevant|, so truncated
      // retrieval is penalized; ndcg only normalizes over retrievable hits.
      {{"r1"}, {"r1", "r2"}, std::nullopt, 0.5, 1.0},
  };
  for (std::size_t i = 0; i < cases.size(); ++i) {
    CAPTURE(i);
    const auto& c = cases[i];
    CHECK(average_precision(c.ranked, c.relevant, c.k) ==
          doctest::Approx(c.ap).epsilon(1e-12));
    CHECK(ndcg(c.ranked, c.relevant, c.k) == doctest::Approx(c.ndcg).epsilon(1e-12));
  }
}

TEST_CASE("metrics reject an empty relevant set") {
  CHECK_THROWS_WITH_AS(average_precision({"a"}, {}, std::nullopt), "empty relevant set",
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(ndcg({"a"}, {}, std::nullopt), "empty relevant set",
                       std::invalid_argument);
}

TEST_CASE("metrics ignore everything below the last hit") {
  std::vector<std::string> ranked = {"a", "x", "b"};
  std::set<std::string> rel = {"a", "b"};
  double ap = average_precision(ranked, rel, std::nullopt);
  double nd = ndcg(ranked, rel, std::nullopt);
  std::vector<std::string> padded = ranked;
  for (int i = 0; i < 20; ++i) padded.push_back("junk" + std::to_string(i));
  CHECK(average_precision(padded, rel, std::nullopt) == ap);
  CHECK(ndcg(padded, rel, std::nullopt) == nd);
  // Shuffling the irrelevant tail changes nothing either.
  std::swap(padded[5], padded[17]);
  CHECK(average_precision(padded, rel, std::nullopt) == ap);
  CHECK(ndcg(padded, rel, std::nullopt) == nd);
}

TEST_CASE("random rankings keep both metrics inside the unit interval") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    CAPTURE(trial);
    int n = 1 + static_cast<int>(rng.below(30));
    std::vector<std::string> ranked;
    for (int i = 0; i < n; ++i) ranked.push_back("i" + std::to_string(i));
    std::set<std::string> rel;
    int picks = 1 + static_cast<int>(rng.below(8));
    for (int i = 0; i < picks; ++i) rel.insert("i" + std::to_string(rng.below(40)));
    std::optional<int> k;
    if (rng.below(2)) k = 1 + static_cast<int>(rng.below(12));
    double ap = average_precision(ranked, rel, k);
    double nd = ndcg(ranked, rel, k);
    CHECK(ap >= 0.0);
    CHECK(ap <= 1.0 + 1e-12);
    CHECK(nd >= 0.0);
    CHECK(nd <= 1.0 + 1e-12);
    // Moving a hit to the front can only help.
    auto hit = std::find_if(ranked.begin(), ranked.end(),
                            [&](const std::string& id) { return rel.count(id) > 0; });
    if (hit != ranked.end() && hit != ranked.begin()) {
      std::vector<std::string> promoted = ranked;
      std::rotate(promoted.begin(), promoted.begin() + (hit - ranked.begin()),
                  promoted.begin() + (hit - ranked.begin()) + 1);
      CHECK(average_precision(promoted, rel, k) >= ap - 1e-12);
      CHECK(ndcg(promoted, rel, k) >= nd - 1e-12);
    }
  }
}

TEST_CASE("method specs parse into the known set") {
  CHECK(all_eval_methods().size() == 7);
  CHECK(parse_methods("all").size() == 7);
  CHECK(parse_methods("").size() == 7);
  auto subset = parse_methods("kmeans-ctr,content");
  REQUIRE(subset.size() == 2);
  CHECK(subset[0] == EvalMethod::kmeans_ctr);
  CHECK(subset[1] == EvalMethod::content);
  for (EvalMethod m : all_eval_methods()) {
    auto round = parse_methods(to_string(m));
    REQUIRE(round.size() == 1);
    CHECK(round[0] == m);
  }
  CHECK_THROWS_WITH_AS(parse_methods("kmeanz"), "unknown method: kmeanz",
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_methods(",content"), "unknown method: ", std::invalid_argument);
  // A trailing comma leaves no token behind the delimiter, so it is tolerated.
  CHECK(parse_methods("content,").size() == 1);
}

TEST_CASE("report lookups and renderings") {
  EvalReport report;
  report.rows.push_back({"content", "all", "overall", "-", 0.25, 0.5});
  report.rows.push_back({"content", "all", "day", "0", 0.2, 0.4});
  report.rows.push_back({"kmeans-ctr", "user", "overall", "-", 0.75, 0.8});
  CHECK(report.overall("content", "all").map == 0.25);
  CHECK(report.overall("kmeans-ctr", "user").ndcg == 0.8);
  CHECK_THROWS_WITH_AS(report.overall("content", "user"),
                       "no overall row for content/user", std::out_of_range);
  std::string csv = report.to_csv();
  CHECK(csv.rfind("method,mode,scope,segment,map,ndcg\n", 0) == 0);
  CHECK(csv.find("content,all,day,0,0.20000000000000001,0.40000000000000002\n") !=
        std::string::npos);
  std::string text = report.summary();
  CHECK(text.find("mode all") != std::string::npos);
  CHECK(text.find("mode user") != std::string::npos);
  CHECK(text.find("kmeans-ctr") != std::string::npos);
}

TEST_CASE("a miniature experiment runs end to end deterministically") {
  std::string dir = fresh_dir("mini_experiment");
  WorldSpec spec;
  spec.seed = 11;
  spec.num_topics = 4;
  spec.vocab_size = 200;
  spec.d = 8;
  spec.num_users = 40;
  spec.num_articles = 150;
  spec.days = 2;
  spec.slate_size = 5;
  World world = generate_world(spec);
  std::string events = dir + "/events.ndjson";
  SimulationStats stats = simulate_logs(world, events);
  REQUIRE(stats.sessions > 0);
  REQUIRE(stats.clicks > 0);
  auto segments = export_segments(world, events);
  REQUIRE(segments.size() == 48);

  EvalOptions opts;
  opts.k = 4;
  opts.train_hours = 24;
  opts.cutoff = 3;
  std::vector<EvalMethod> methods = {EvalMethod::content, EvalMethod::kmeans_ctr};
  std::vector<std::string> modes = {"all", "user"};

  EvalReport report = run_experiment(world, segments, events, methods, modes, opts);
  CHECK(report.evaluated_users > 0);
  CHECK(report.wall_seconds >= 0.0);
  for (const char* method : {"content", "kmeans-ctr"}) {
    for (const char* mode : {"all", "user"}) {
      const EvalRow& row = report.overall(method, mode);
      CHECK(row.map >= 0.0);
      CHECK(row.map <= 1.0);
      CHECK(row.ndcg >= row.map - 1e-12);  // binary-gain ndcg dominates AP here
      CHECK(row.ndcg <= 1.0);
    }
  }
  // Day and hour scopes exist for the evaluated suffix.
  bool has_day = false, has_hour = false;
  for (const auto& r : report.rows) {
    if (r.scope == "day") has_day = true;
    if (r.scope == "hour") has_hour = true;
  }
  CHECK(has_day);
  CHECK(has_hour);

  EvalReport again = run_experiment(world, segments, events, methods, modes, opts);
  CHECK(report.to_csv() == again.to_csv());

  CHECK_THROWS_WITH_AS(
      run_experiment(world, segments, events, methods, {"all", "weird"}, opts),
      "unknown mode: weird", std::invalid_argument);
  EvalOptions too_long = opts;
  too_long.train_hours = 48;
  CHECK_THROWS_WITH_AS(run_experiment(world, segments, events, methods, modes, too_long),
                       "training window leaves no hours to evaluate", std::invalid_argument);
}
