#include "newsrec/ab.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <unordered_map>

#include "newsrec/cluster.hpp"
#include "newsrec/events.hpp"
#include "newsrec/pipeline.hpp"
#include "newsrec/rng.hpp"
#include "newsrec/textio.hpp"
#include "newsrec/vecmath.hpp"

namespace newsrec {

namespace {

constexpr std::uint64_t kSaltSplit = 0x73706c6974616230ULL;
constexpr std::uint64_t kSaltArm = 0x61726d73656c6563ULL;
constexpr std::uint64_t kSaltShuffle = 0x73687566666c6531ULL;

enum class ArmKind { random_order, control, tdf, utdf };

ArmKind parse_arm(const std::string& desc) {
  if (desc == "random") return ArmKind::random_order;
  if (desc == "control") return ArmKind::control;
  if (desc == "tdf") return ArmKind::tdf;
  if (desc == "utdf") return ArmKind::utdf;
  throw std::invalid_argument("unknown arm: " + desc);
}

double stateless_unit(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
  return u64_to_unit(splitmix64(hash_combine(hash_combine(hash_combine(a, b), c), d)));
}

double dot_n(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

AbOptions AbOptions::from_config(const RunConfig& cfg) {
  AbOptions o;
  o.fit_seed = cfg.seed;
  o.k = cfg.k;
  o.history_len = cfg.history_len;
  o.weight_exponent = cfg.weight_exponent;
  o.eps = cfg.eps;
  o.kmeans_max_iters = cfg.kmeans_max_iters;
  o.kmeans_tol = cfg.kmeans_tol;
  o.window_len = cfg.eval_window_len;
  o.merge_windows = cfg.eval_merge_windows;
  o.smoothing = Smoothing{cfg.eval_smoothing_alpha, cfg.eval_smoothing_beta};
  o.warmup_hours = cfg.ab_warmup_hours;
  o.experiment_traffic = cfg.ab_experiment_traffic;
  o.tdf = DecayConfig{DecayMode::tdf, cfg.t_tdf, cfg.sigma, false};
  o.utdf = DecayConfig{DecayMode::utdf, cfg.t_utdf, cfg.sigma, false};
  return o;
}

double AbArmStats::ctr() const {
  return impressions > 0 ? static_cast<double>(clicks) / static_cast<double>(impressions) : 0.0;
}
double AbArmStats::clicks_per_session() const {
  return sessions > 0 ? static_cast<double>(clicks) / static_cast<double>(sessions) : 0.0;
}
double AbArmStats::click_users_per_session() const {
  return sessions > 0 ? static_cast<double>(click_sessions) / static_cast<double>(sessions)
                      : 0.0;
}

namespace {
double safe_ratio(double num, double den) { return den != 0.0 ? num / den : 0.0; }
}  // namespace

double AbReport::ctr_ratio(std::size_t arm) const {
  return safe_ratio(arms.at(arm).ctr(), arms.at(0).ctr());
}
double AbReport::clicks_ratio(std::size_t arm) const {
  return safe_ratio(arms.at(arm).clicks_per_session(), arms.at(0).clicks_per_session());
}
double AbReport::click_users_ratio(std::size_t arm) const {
  return safe_ratio(arms.at(arm).click_users_per_session(),
                    arms.at(0).click_users_per_session());
}

std::string AbReport::to_csv() const {
  std::string out =
      "arm,descriptor,sessions,impressions,clicks,click_sessions,ctr,clicks_per_session,"
      "click_users_per_session,ctr_ratio,clicks_ratio,click_users_ratio\n";
  for (std::size_t i = 0; i < arms.size(); ++i) {
    const AbArmStats& a = arms[i];
    out += std::to_string(i);
    out += ',';
    out += a.descriptor;
    out += ',';
    out += std::to_string(a.sessions);
    out += ',';
    out += std::to_string(a.impressions);
    out += ',';
    out += std::to_string(a.clicks);
    out += ',';
    out += std::to_string(a.click_sessions);
    out += ',';
    out += fmt_double(a.ctr());
    out += ',';
    out += fmt_double(a.clicks_per_session());
    out += ',';
    out += fmt_double(a.click_users_per_session());
    out += ',';
    out += fmt_double(ctr_ratio(i));
    out += ',';
    out += fmt_double(clicks_ratio(i));
    out += ',';
    out += fmt_double(click_users_ratio(i));
    out += '\n';
  }
  return out;
}

std::string AbReport::summary() const {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-10s %9s %11s %8s %8s %9s %9s\n", "arm", "sessions",
                "impressions", "clicks", "ctr", "clk/sess", "users/s");
  out += buf;
  for (const AbArmStats& a : arms) {
    std::snprintf(buf, sizeof(buf), "%-10s %9lld %11lld %8lld %8.5f %9.5f %9.5f\n",
                  a.descriptor.c_str(), static_cast<long long>(a.sessions),
                  static_cast<long long>(a.impressions), static_cast<long long>(a.clicks),
                  a.ctr(), a.clicks_per_session(), a.click_users_per_session());
    out += buf;
  }
  out += "ratios vs arm 0:\n";
  for (std::size_t i = 0; i < arms.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%-10s ctr %.5f  clicks %.5f  click-users %.5f\n",
                  arms[i].descriptor.c_str(), ctr_ratio(i), clicks_ratio(i),
                  click_users_ratio(i));
    out += buf;
  }
  return out;
}

AbReport ab_replay(const World& world, const std::string& events_path,
                   const std::vector<std::string>& arms, std::uint64_t assignment_seed,
                   const AbOptions& opts) {
  auto clock_start = std::chrono::steady_clock::now();
  if (arms.size() < 2) throw std::invalid_argument("need at least two arms");
  std::vector<ArmKind> kinds;
  for (const auto& a : arms) kinds.push_back(parse_arm(a));

  const Timestamp t0 = world.spec.t0;
  const Timestamp warmup_end = t0 + static_cast<Timestamp>(opts.warmup_hours) * 3600;
  const std::size_t num_users = world.user_ids.size();
  const std::vector<ArticleRecord>& all_articles = world.articles.all();

  std::unordered_map<std::string, std::size_t> user_pos;
  user_pos.reserve(num_users * 2);
  for (std::size_t i = 0; i < num_users; ++i) user_pos.emplace(world.user_ids[i], i);
  std::unordered_map<std::string, std::size_t> article_pos;
  article_pos.reserve(all_articles.size() * 2);
  for (std::size_t i = 0; i < all_articles.size(); ++i)
    article_pos.emplace(all_articles[i].article_id, i);

  // Per-user arm assignment, fixed for the whole replay.
  //   lane < 0: background (stays on the logged policy)
  //   lane >= 0: experiment arm index
  std::vector<int> lane(num_users);
  for (std::size_t i = 0; i < num_users; ++i) {
    std::uint64_t uh = fnv1a64(world.user_ids[i]);
    double pick = u64_to_unit(splitmix64(hash_combine(hash_combine(assignment_seed, kSaltSplit), uh)));
    if (pick < opts.experiment_traffic) {
      lane[i] = static_cast<int>(
          splitmix64(hash_combine(hash_combine(assignment_seed, kSaltArm), uh)) % kinds.size());
    } else {
      lane[i] = -1;
    }
  }

  MemoryProfileStore store;
  EventPipeline pipeline(store, world.articles, PipelineOptions{opts.history_len, false});
  std::vector<std::int64_t> session_ord(num_users, 0);
  std::vector<std::vector<std::uint32_t>> clicked(num_users);  // global article positions

  auto mark_clicked = [&](std::size_t uidx, std::size_t aidx) {
    clicked[uidx].push_back(static_cast<std::uint32_t>(aidx));
  };

  // Pass 1: warmup — profiles, clicked sets, and session ordinals.
  {
    std::ifstream in(events_path);
    if (!in) throw std::runtime_error("cannot open events: " + events_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto ev = parse_event(line);
      if (!ev) continue;
      if (ev->ts >= warmup_end) break;
      auto up = user_pos.find(ev->user_id);
      if (up == user_pos.end()) continue;
      if (ev->kind == EventKind::access) {
        ++session_ord[up->second];
        pipeline.handle_access(*ev);
      } else if (ev->kind == EventKind::click) {
        pipeline.handle_click(*ev);
        auto ap = article_pos.find(ev->article_id);
        if (ap != article_pos.end()) mark_clicked(up->second, ap->second);
      }
    }
  }
  AbReport report;
  for (std::size_t i = 0; i < num_users; ++i) report.warmup_sessions += session_ord[i];

  // Fit the serving model on warmup profiles.
  std::vector<std::pair<std::string, Vec>> user_vectors;
  for (const auto& id : store.user_ids()) {
    auto p = store.get(id);
    if (p && p->vector) user_vectors.emplace_back(id, *p->vector);
  }
  KmeansOptions ko;
  ko.k = opts.k;
  ko.seed = opts.fit_seed;
  ko.max_iters = opts.kmeans_max_iters;
  ko.tol = opts.kmeans_tol;
  ClusterModel model = kmeans_fit(user_vectors, ko);
  model.version = 1;

  CtrAccumulator acc_cluster(t0, opts.window_len, opts.merge_windows, model.num_clusters,
                             model.version);
  CtrAccumulator acc_pooled(t0, opts.window_len, opts.merge_windows, 1, model.version);

  // Cluster attribution from the user's current vector, cached until the
  // profile changes on a click.
  constexpr int kStale = -2;
  std::vector<int> cluster_of(num_users, kStale);
  auto resolve_cluster = [&](std::size_t uidx) -> int {
    int c = cluster_of[uidx];
    if (c != kStale) return c;
    auto p = store.get(world.user_ids[uidx]);
    c = -1;
    if (p && p->vector) {
      double best = 0.0;
      for (int j = 0; j < model.num_clusters; ++j) {
        double d2 = squared_distance(*p->vector, model.centroids[j]);
        if (c < 0 || d2 < best) {
          best = d2;
          c = j;
        }
      }
    }
    cluster_of[uidx] = c;
    return c;
  };

  auto feed_ctr = [&](const BehaviorEvent& ev, std::size_t uidx) {
    acc_pooled.ingest(ev, 0);
    int c = resolve_cluster(uidx);
    if (c >= 0) acc_cluster.ingest(ev, c);
  };

  // Serving snapshot: dense per-candidate cluster CTR rows plus pooled CTR,
  // rebuilt once per aggregation window. Includes every article that can be
  // live at some instant of the window; per-session liveness is re-checked.
  struct Snapshot {
    Timestamp valid_until = std::numeric_limits<Timestamp>::min();
    std::size_t first_article = 0;  // global position of candidates[0]
    std::vector<Timestamp> published;
    std::vector<double> rows;    // n x K cluster CTR
    std::vector<double> pooled;  // n
  } snap;

  auto rebuild_snapshot = [&](Timestamp ts) {
    acc_cluster.roll_until(ts);
    acc_pooled.roll_until(ts);
    snap.valid_until = t0 + ((ts - t0) / opts.window_len + 1) * opts.window_len;
    const Timestamp lower = ts - world.spec.horizon;  // earliest instant of the window
    auto lo = std::lower_bound(all_articles.begin(), all_articles.end(), lower,
                               [](const ArticleRecord& a, Timestamp t) {
                                 return a.published_at <= t;
                               });
    auto hi = std::lower_bound(all_articles.begin(), all_articles.end(), snap.valid_until,
                               [](const ArticleRecord& a, Timestamp t) {
                                 return a.published_at < t;
                               });
    snap.first_article = static_cast<std::size_t>(lo - all_articles.begin());
    const std::size_t n = static_cast<std::size_t>(hi - lo);
    snap.published.resize(n);
    for (std::size_t i = 0; i < n; ++i) snap.published[i] = lo[i].published_at;
    const std::size_t k = static_cast<std::size_t>(model.num_clusters);
    snap.rows.assign(n * k, 0.0);
    snap.pooled.assign(n, 0.0);
    CtrTable merged_c = acc_cluster.merged();
    for (const auto& [key, cell] : merged_c.cells) {
      auto ap = article_pos.find(key.second);
      if (ap == article_pos.end()) continue;
      if (ap->second < snap.first_article || ap->second >= snap.first_article + n) continue;
      double denom = static_cast<double>(cell.impressions) + opts.smoothing.beta;
      if (denom <= 0.0) continue;
      snap.rows[(ap->second - snap.first_article) * k + key.first] =
          (static_cast<double>(cell.clicks) + opts.smoothing.alpha) / denom;
    }
    CtrTable merged_p = acc_pooled.merged();
    for (const auto& [key, cell] : merged_p.cells) {
      auto ap = article_pos.find(key.second);
      if (ap == article_pos.end()) continue;
      if (ap->second < snap.first_article || ap->second >= snap.first_article + n) continue;
      double denom = static_cast<double>(cell.impressions) + opts.smoothing.beta;
      if (denom <= 0.0) continue;
      snap.pooled[ap->second - snap.first_article] =
          (static_cast<double>(cell.clicks) + opts.smoothing.alpha) / denom;
    }
  };

  report.arms.resize(arms.size());
  for (std::size_t i = 0; i < arms.size(); ++i) report.arms[i].descriptor = arms[i];

  std::vector<double> weight_dense(static_cast<std::size_t>(model.num_clusters));
  std::vector<double> scores;
  std::vector<std::uint32_t> order;
  std::vector<char> excluded;

  auto serve_session = [&](const BehaviorEvent& ev, std::size_t uidx, std::int64_t ordinal,
                           int arm) {
    if (ev.ts >= snap.valid_until) rebuild_snapshot(ev.ts);
    AbArmStats& stats = report.arms[static_cast<std::size_t>(arm)];
    ++stats.sessions;
    const ArmKind kind = kinds[static_cast<std::size_t>(arm)];

    auto profile = store.get(world.user_ids[uidx]);
    const std::size_t k = static_cast<std::size_t>(model.num_clusters);
    bool personalized = false;
    if ((kind == ArmKind::tdf || kind == ArmKind::utdf) && profile && profile->vector) {
      ClusterWeights w =
          kmeans_weights(*profile->vector, model, opts.weight_exponent, opts.eps);
      std::fill(weight_dense.begin(), weight_dense.end(), 0.0);
      for (const auto& [c, wv] : w.weights) weight_dense[static_cast<std::size_t>(c)] = wv;
      personalized = true;
    }
    std::optional<Timestamp> last_access;
    if (profile) last_access = profile->last_access_at;

    const std::size_t n = snap.published.size();
    excluded.assign(n, 0);
    for (std::uint32_t aidx : clicked[uidx]) {
      if (aidx >= snap.first_article && aidx < snap.first_article + n)
        excluded[aidx - snap.first_article] = 1;
    }

    scores.resize(n);
    order.clear();
    for (std::size_t i = 0; i < n; ++i) {
      Timestamp pub = snap.published[i];
      if (pub > ev.ts || pub <= ev.ts - world.spec.horizon || excluded[i]) continue;
      double s;
      switch (kind) {
        case ArmKind::random_order:
          s = stateless_unit(hash_combine(assignment_seed, kSaltShuffle), uidx,
                             snap.first_article + i, static_cast<std::uint64_t>(ordinal));
          break;
        case ArmKind::control:
          s = snap.pooled[i];
          break;
        case ArmKind::tdf: {
          double base = personalized
                            ? dot_n(snap.rows.data() + i * k, weight_dense.data(), k)
                            : snap.pooled[i];
          s = base * decay_tdf(ev.ts, pub, opts.tdf);
          break;
        }
        case ArmKind::utdf: {
          double base = personalized
                            ? dot_n(snap.rows.data() + i * k, weight_dense.data(), k)
                            : snap.pooled[i];
          s = base * decay_utdf(last_access, pub, ev.ts, opts.utdf);
          break;
        }
        default:
          s = 0.0;
      }
      scores[i] = s;
      order.push_back(static_cast<std::uint32_t>(i));
    }

    const std::size_t slate =
        std::min<std::size_t>(order.size(), static_cast<std::size_t>(world.spec.slate_size));
    std::partial_sort(order.begin(), order.begin() + slate, order.end(),
                      [&](std::uint32_t a, std::uint32_t b) {
                        if (scores[a] != scores[b]) return scores[a] > scores[b];
                        if (snap.published[a] != snap.published[b])
                          return snap.published[a] > snap.published[b];
                        return a < b;  // chronological ids: position order == id order
                      });

    bool any_click = false;
    for (std::size_t s = 0; s < slate; ++s) {
      const std::size_t gidx = snap.first_article + order[s];
      const ArticleRecord& art = all_articles[gidx];
      BehaviorEvent shown{EventKind::impression, world.user_ids[uidx], art.article_id, ev.ts, ev.seq};
      ++stats.impressions;
      feed_ctr(shown, uidx);
      if (world.click_draw(uidx, gidx, ordinal, ev.ts)) {
        BehaviorEvent click{EventKind::click, world.user_ids[uidx], art.article_id, ev.ts, ev.seq};
        ++stats.clicks;
        any_click = true;
        feed_ctr(click, uidx);
        pipeline.handle_click(click);
        mark_clicked(uidx, gidx);
        cluster_of[uidx] = kStale;
      }
    }
    if (any_click) ++stats.click_sessions;
  };

  // Pass 2: backfill warmup CTR under the fitted model, then replay the
  // experiment span with diverted users served by their arm.
  {
    std::ifstream in(events_path);
    if (!in) throw std::runtime_error("cannot open events: " + events_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto ev = parse_event(line);
      if (!ev) continue;
      auto up = user_pos.find(ev->user_id);
      if (up == user_pos.end()) continue;
      const std::size_t uidx = up->second;
      if (ev->ts < warmup_end) {
        if (ev->kind != EventKind::access) feed_ctr(*ev, uidx);
        continue;
      }
      const int user_lane = lane[uidx];
      if (ev->kind == EventKind::access) {
        const std::int64_t ordinal = session_ord[uidx]++;
        if (user_lane >= 0) {
          serve_session(*ev, uidx, ordinal, user_lane);
        } else {
          ++report.background_sessions;
        }
        pipeline.handle_access(*ev);  // after serving: "previous access" semantics
      } else if (user_lane < 0) {
        feed_ctr(*ev, uidx);
        if (ev->kind == EventKind::click) {
          pipeline.handle_click(*ev);
          auto ap = article_pos.find(ev->article_id);
          if (ap != article_pos.end()) mark_clicked(uidx, ap->second);
          cluster_of[uidx] = kStale;
        }
      }
      // Diverted users' logged impressions and clicks are dropped.
    }
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
  return report;
}

}  // namespace newsrec
