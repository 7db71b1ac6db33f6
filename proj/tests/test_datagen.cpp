#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "newsrec/datagen.hpp"
#include "newsrec/events.hpp"
#include "newsrec/rng.hpp"
#include "newsrec/vecmath.hpp"

using namespace newsrec;

namespace {

std::string fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "newsrec_datagen_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

WorldSpec mini_spec(std::uint64_t seed) {
  WorldSpec spec;
  spec.seed = seed;
  spec.num_topics = 4;
  spec.vocab_size = 200;
  spec.d = 8;
  spec.num_users = 25;
  spec.num_articles = 120;
  spec.days = 2;
  spec.slate_size = 5;
  return spec;
}

}  // namespace

TEST_CASE("generated worlds are deterministic and internally consistent") {
  WorldSpec spec = mini_spec(7);
  World w1 = generate_world(spec);
  World w2 = generate_world(spec);

  CHECK(w1.topic_vectors.size() == 4);
  for (const auto& t : w1.topic_vectors) CHECK(is_unit(t));
  REQUIRE(w1.articles.size() == 120);
  REQUIRE(w1.user_ids.size() == 25);

  const auto& all = w1.articles.all();
  for (std::size_t i = 0; i < all.size(); ++i) {
    CAPTURE(i);
    REQUIRE(all[i].vector.has_value());
    CHECK(is_unit(*all[i].vector));
    CHECK(all[i].tokens.size() >= static_cast<std::size_t>(spec.tokens_min));
    CHECK(all[i].tokens.size() <= static_cast<std::size_t>(spec.tokens_max));
    if (i) CHECK(all[i].published_at >= all[i - 1].published_at);
    CHECK(all[i].published_at >= spec.t0 - spec.horizon);
    CHECK(all[i].published_at < w1.t_end());
    CHECK(w1.article_topic[i] >= 0);
    CHECK(w1.article_topic[i] < spec.num_topics);
  }
  for (std::size_t u = 0; u < w1.user_ids.size(); ++u) {
    CAPTURE(u);
    CHECK(is_unit(w1.user_pref[u]));
    CHECK(w1.user_rate[u] > 0.0);
    double sum = 0.0;
    for (double m : w1.user_mix[u]) {
      CHECK(m >= 0.0);
      sum += m;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }

  // Same spec, same world — bit for bit.
  for (std::size_t i = 0; i < all.size(); ++i) {
    CHECK(all[i].article_id == w2.articles.all()[i].article_id);
    CHECK(all[i].published_at == w2.articles.all()[i].published_at);
    CHECK(all[i].tokens == w2.articles.all()[i].tokens);
    CHECK(*all[i].vector == *w2.articles.all()[i].vector);
  }
  CHECK(w1.user_pref == w2.user_pref);
  CHECK(w1.user_rate == w2.user_rate);

  // A different seed moves at least the preferences.
  World w3 = generate_world(mini_spec(8));
  CHECK(w1.user_pref[0] != w3.user_pref[0]);
}

TEST_CASE("click probability is a freshness-damped affinity curve") {
  // With the interest waves switched off the preference vector is static and
  // the curve must match the closed form exactly.
  WorldSpec still = mini_spec(7);
  still.trend_amp = 0.0;
  World world = generate_world(still);
  const auto& all = world.articles.all();

  for (std::size_t a = 0; a < 10; ++a) {
    CAPTURE(a);
    double affinity = dot(world.user_pref[0], *all[a].vector);
    double factor = 2.0 / (1.0 + std::exp(-world.spec.affinity_weight * affinity));
    Timestamp at = all[a].published_at + 3000;
    double expected = world.spec.base_rate * factor * std::exp(-3000.0 / world.spec.freshness_half_life);
    CHECK(world.click_probability(0, a, at) == doctest::Approx(expected).epsilon(1e-15));
    // Age never goes negative: an unborn article scores like a brand-new one.
    CHECK(world.click_probability(0, a, all[a].published_at - 500) ==
          world.click_probability(0, a, all[a].published_at));
    // Freshness decays by 1/e per half-life parameter (it is an e-folding
    // time in the exponent, not a halving time).
    CHECK(world.click_probability(
              0, a, all[a].published_at + static_cast<Timestamp>(world.spec.freshness_half_life)) ==
          doctest::Approx(std::exp(-1.0) * world.click_probability(0, a, all[a].published_at))
              .epsilon(1e-12));
  }

  // With the affinity weight off, the doubled sigmoid is exactly 1 and only
  // freshness matters.
  WorldSpec flat = mini_spec(7);
  flat.affinity_weight = 0.0;
  World indifferent = generate_world(flat);
  for (std::size_t a = 0; a < 10; ++a) {
    CHECK(indifferent.click_probability(3, a, indifferent.articles.all()[a].published_at) ==
          flat.base_rate);
  }

  // Probabilities clamp to 1 when the base rate is absurd.
  WorldSpec hot = mini_spec(7);
  hot.base_rate = 50.0;
  World eager = generate_world(hot);
  bool saturated = false;
  for (std::size_t a = 0; a < eager.articles.size(); ++a) {
    double p = eager.click_probability(0, a, eager.articles.all()[a].published_at);
    CHECK(p <= 1.0);
    if (p == 1.0) saturated = true;
  }
  CHECK(saturated);
}

TEST_CASE("population interest waves modulate preferences over time") {
  World world = generate_world(mini_spec(7));
  REQUIRE(world.spec.trend_amp > 0.0);
  const auto& all = world.articles.all();

  // Switching the amplitude off silences the wave entirely.
  WorldSpec calm = mini_spec(7);
  calm.trend_amp = 0.0;
  World still = generate_world(calm);
  for (double v : still.trend_shift(0, still.spec.t0 + 12345)) CHECK(v == 0.0);

  // With waves on, the click probability matches the time-varying closed
  // form: the user's base preference plus their wave share, renormalized.
  for (int step = 0; step < 8; ++step) {
    CAPTURE(step);
    Timestamp at = all[5].published_at + step * 9000;
    Vec pref = world.trend_shift(2, at);
    add_into(pref, world.user_pref[2]);
    auto unit = normalized(pref);
    REQUIRE(unit);
    double affinity = dot(*unit, *all[5].vector);
    double factor = 2.0 / (1.0 + std::exp(-world.spec.affinity_weight * affinity));
    double age = static_cast<double>(at - all[5].published_at);
    double expected = std::min(
        1.0, world.spec.base_rate * factor * std::exp(-age / world.spec.freshness_half_life));
    CHECK(world.click_probability(2, 5, at) == doctest::Approx(expected).epsilon(1e-12));
  }

  // The wave genuinely moves: the freshness-discounted affinity of a fixed
  // user/article pair drifts over the course of a day.
  double lo = 1e300;
  double hi = -1e300;
  for (int step = 0; step < 48; ++step) {
    Vec pref = world.trend_shift(0, world.spec.t0 + step * 1800);
    add_into(pref, world.user_pref[0]);
    auto unit = normalized(pref);
    REQUIRE(unit);
    double affinity = dot(*unit, *all[0].vector);
    lo = std::min(lo, affinity);
    hi = std::max(hi, affinity);
  }
  CHECK(hi - lo > 1e-3);
}

TEST_CASE("live range matches a brute force scan") {
  World world = generate_world(mini_spec(9));
  const auto& all = world.articles.all();
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    Timestamp at = world.spec.t0 + static_cast<Timestamp>(rng.below(
                                       static_cast<std::uint64_t>(world.t_end() - world.spec.t0)));
    auto [lo, hi] = world.live_range(at);
    CAPTURE(at);
    for (std::size_t i = 0; i < all.size(); ++i) {
      bool live = all[i].published_at > at - world.spec.horizon && all[i].published_at <= at;
      bool in_range = i >= lo && i < hi;
      CHECK(live == in_range);
    }
  }
}

TEST_CASE("simulated logs are well formed and reproduce their click draws") {
  std::string dir = fresh_dir("logs");
  World world = generate_world(mini_spec(13));
  std::string events_path = dir + "/events.ndjson";
  SimulationStats stats = simulate_logs(world, events_path);
  REQUIRE(stats.sessions > 0);
  REQUIRE(stats.impressions > 0);
  REQUIRE(stats.clicks > 0);
  CHECK(stats.clicks <= stats.impressions);

  std::unordered_map<std::string, std::size_t> article_idx;
  for (std::size_t i = 0; i < world.articles.size(); ++i)
    article_idx[world.articles.all()[i].article_id] = i;
  std::unordered_map<std::string, std::size_t> user_idx;
  for (std::size_t u = 0; u < world.user_ids.size(); ++u) user_idx[world.user_ids[u]] = u;

  std::vector<BehaviorEvent> events;
  {
    std::ifstream in(events_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto ev = parse_event(line);
      REQUIRE(ev.has_value());
      events.push_back(*ev);
    }
  }
  REQUIRE(static_cast<std::int64_t>(events.size()) ==
          stats.sessions + stats.impressions + stats.clicks);

  std::map<std::string, std::int64_t> next_ordinal, last_seq;
  std::map<std::string, std::int64_t> session_ordinal;
  std::map<std::string, std::set<std::string>> clicked_before;
  std::int64_t impressions_seen = 0, clicks_seen = 0, sessions_seen = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const BehaviorEvent& ev = events[i];
    CAPTURE(i);
    if (i) CHECK(ev.ts >= events[i - 1].ts);  // log is time-ordered
    CHECK(ev.ts >= world.spec.t0);
    CHECK(ev.ts < world.t_end());
    // Sequence numbers count up per user without gaps.
    auto seq_it = last_seq.find(ev.user_id);
    std::int64_t expected_seq = seq_it == last_seq.end() ? 0 : seq_it->second + 1;
    CHECK(ev.seq == expected_seq);
    last_seq[ev.user_id] = ev.seq;

    if (ev.kind == EventKind::access) {
      ++sessions_seen;
      session_ordinal[ev.user_id] = next_ordinal[ev.user_id]++;
      continue;
    }
    REQUIRE(article_idx.count(ev.article_id));
    std::size_t a = article_idx[ev.article_id];
    std::size_t u = user_idx.at(ev.user_id);
    if (ev.kind == EventKind::impression) {
      ++impressions_seen;
      // The policy never re-shows an article this user already clicked.
      CHECK_FALSE(clicked_before[ev.user_id].count(ev.article_id));
      // Only live articles are shown.
      auto [lo, hi] = world.live_range(ev.ts);
      CHECK(a >= lo);
      CHECK(a < hi);
      // The logged click outcome is exactly the deterministic draw.
      bool clicked = i + 1 < events.size() && events[i + 1].kind == EventKind::click &&
                     events[i + 1].user_id == ev.user_id &&
                     events[i + 1].article_id == ev.article_id;
      CHECK(world.click_draw(u, a, session_ordinal.at(ev.user_id), ev.ts) == clicked);
    } else {
      ++clicks_seen;
      CHECK(i > 0);
      CHECK(events[i - 1].kind == EventKind::impression);
      CHECK(events[i - 1].user_id == ev.user_id);
      CHECK(events[i - 1].article_id == ev.article_id);
      clicked_before[ev.user_id].insert(ev.article_id);
    }
  }
  CHECK(impressions_seen == stats.impressions);
  CHECK(clicks_seen == stats.clicks);
  CHECK(sessions_seen == stats.sessions);

  // Byte-for-byte determinism of the whole log.
  std::string again_path = dir + "/events_again.ndjson";
  simulate_logs(world, again_path);
  CHECK(slurp(events_path) == slurp(again_path));
}

TEST_CASE("hourly segments faithfully partition the log") {
  std::string dir = fresh_dir("segments");
  World world = generate_world(mini_spec(17));
  std::string events_path = dir + "/events.ndjson";
  SimulationStats stats = simulate_logs(world, events_path);
  auto segments = export_segments(world, events_path);
  REQUIRE(segments.size() == static_cast<std::size_t>(world.spec.days * 24));

  const auto& all = world.articles.all();
  std::int64_t clicks_total = 0;
  for (std::size_t h = 0; h < segments.size(); ++h) {
    CAPTURE(h);
    const HourSegment& seg = segments[h];
    CHECK(seg.hour_start == world.spec.t0 + static_cast<Timestamp>(h) * 3600);
    CHECK(std::is_sorted(seg.candidates_all.begin(), seg.candidates_all.end()));
    CHECK(std::adjacent_find(seg.candidates_all.begin(), seg.candidates_all.end()) ==
          seg.candidates_all.end());

    // Candidates are exactly the articles live at some instant of the hour.
    std::set<std::string> expected;
    for (const auto& a : all) {
      if (a.published_at > seg.hour_start - world.spec.horizon &&
          a.published_at < seg.hour_start + 3600)
        expected.insert(a.article_id);
    }
    CHECK(std::set<std::string>(seg.candidates_all.begin(), seg.candidates_all.end()) ==
          expected);

    std::set<std::string> candidates(seg.candidates_all.begin(), seg.candidates_all.end());
    for (const auto& [user, shown] : seg.displayed) {
      CHECK_FALSE(shown.empty());
      std::set<std::string> unique(shown.begin(), shown.end());
      CHECK(unique.size() == shown.size());
      for (const auto& id : shown) CHECK(candidates.count(id));
      auto it = seg.clicked.find(user);
      if (it != seg.clicked.end())
        for (const auto& id : it->second) CHECK(unique.count(id));
    }
    for (const auto& [user, clicked] : seg.clicked) {
      CHECK_FALSE(clicked.empty());
      clicks_total += static_cast<std::int64_t>(clicked.size());
    }
  }
  CHECK(clicks_total == stats.clicks);

  // Segment files round-trip byte-identically.
  std::string seg_path = dir + "/segments.ndjson";
  save_segments(segments, seg_path);
  auto loaded = load_segments(seg_path);
  REQUIRE(loaded.size() == segments.size());
  std::string seg_path2 = dir + "/segments2.ndjson";
  save_segments(loaded, seg_path2);
  CHECK(slurp(seg_path) == slurp(seg_path2));
  for (std::size_t h = 0; h < segments.size(); ++h) {
    CHECK(loaded[h].hour_start == segments[h].hour_start);
    CHECK(loaded[h].candidates_all == segments[h].candidates_all);
    CHECK(loaded[h].displayed == segments[h].displayed);
    CHECK(loaded[h].clicked == segments[h].clicked);
  }
}

TEST_CASE("worlds round-trip through their directory form") {
  std::string dir1 = fresh_dir("world_a");
  std::string dir2 = fresh_dir("world_b");
  World world = generate_world(mini_spec(23));
  world.save(dir1);
  World loaded = World::load(dir1);
  loaded.save(dir2);

  for (const char* name : {"world.txt", "topic_vectors.txt", "embeddings.txt", "idf.txt",
                           "articles.txt", "topics.txt"}) {
    CAPTURE(name);
    CHECK(slurp(dir1 + "/" + name) == slurp(dir2 + "/" + name));
  }
  CHECK(loaded.user_ids == world.user_ids);
  CHECK(loaded.user_rate == world.user_rate);
  CHECK(loaded.user_pref == world.user_pref);
  CHECK(loaded.user_mix == world.user_mix);
  CHECK(loaded.article_topic == world.article_topic);
  CHECK(loaded.spec.seed == world.spec.seed);
  CHECK(loaded.articles.size() == world.articles.size());

  // The loaded world answers counterfactuals identically.
  for (std::size_t a = 0; a < 20; ++a) {
    Timestamp at = world.articles.all()[a].published_at + 1234;
    CHECK(loaded.click_probability(2, a, at) == world.click_probability(2, a, at));
    CHECK(loaded.click_draw(2, a, 5, at) == world.click_draw(2, a, 5, at));
  }
}
