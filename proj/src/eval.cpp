#include "newsrec/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "newsrec/pipeline.hpp"
#include "newsrec/scorer.hpp"
#include "newsrec/textio.hpp"

namespace newsrec {

double average_precision(const std::vector<std::string>& ranked,
                         const std::set<std::string>& relevant, std::optional<int> k) {
  if (relevant.empty()) throw std::invalid_argument("empty relevant set");
  std::size_t limit = ranked.size();
  if (k) limit = std::min(limit, static_cast<std::size_t>(*k));
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < limit; ++i) {
    if (relevant.count(ranked[i])) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  std::size_t denom = relevant.size();
  if (k) denom = std::min(denom, static_cast<std::size_t>(*k));
  return sum / static_cast<double>(denom);
}

double ndcg(const std::vector<std::string>& ranked, const std::set<std::string>& relevant,
            std::optional<int> k) {
  if (relevant.empty()) throw std::invalid_argument("empty relevant set");
  std::size_t limit = ranked.size();
  if (k) limit = std::min(limit, static_cast<std::size_t>(*k));
  if (limit == 0) return 0.0;
  double dcg = 0.0;
  for (std::size_t i = 0; i < limit; ++i) {
    if (relevant.count(ranked[i])) dcg += 1.0 / std::log2(static_cast<double>(i + 2));
  }
  std::size_t ideal_hits = std::min(relevant.size(), limit);
  double idcg = 0.0;
  for (std::size_t i = 0; i < ideal_hits; ++i) idcg += 1.0 / std::log2(static_cast<double>(i + 2));
  return idcg > 0.0 ? dcg / idcg : 0.0;
}

const char* to_string(EvalMethod m) {
  switch (m) {
    case EvalMethod::content: return "content";
    case EvalMethod::minhash_clicks: return "minhash-clicks";
    case EvalMethod::minhash_ctr: return "minhash-ctr";
    case EvalMethod::nmf_clicks: return "nmf-clicks";
    case EvalMethod::nmf_ctr: return "nmf-ctr";
    case EvalMethod::kmeans_clicks: return "kmeans-clicks";
    case EvalMethod::kmeans_ctr: return "kmeans-ctr";
  }
  return "?";
}

std::vector<EvalMethod> all_eval_methods() {
  return {EvalMethod::content,    EvalMethod::minhash_clicks, EvalMethod::minhash_ctr,
          EvalMethod::nmf_clicks, EvalMethod::nmf_ctr,        EvalMethod::kmeans_clicks,
          EvalMethod::kmeans_ctr};
}

std::vector<EvalMethod> parse_methods(const std::string& spec) {
  if (spec == "all" || spec.empty()) return all_eval_methods();
  std::vector<EvalMethod> out;
  std::istringstream ss(spec);
  std::string name;
  while (std::getline(ss, name, ',')) {
    bool found = false;
    for (EvalMethod m : all_eval_methods()) {
      if (name == to_string(m)) {
        out.push_back(m);
        found = true;
        break;
      }
    }
    if (!found) throw std::invalid_argument("unknown method: " + name);
  }
  if (out.empty()) throw std::invalid_argument("no methods selected");
  return out;
}

EvalOptions EvalOptions::from_config(const RunConfig& cfg) {
  EvalOptions o;
  o.fit_seed = cfg.seed;
  o.k = cfg.k;
  o.history_len = cfg.history_len;
  o.weight_exponent = cfg.weight_exponent;
  o.eps = cfg.eps;
  o.nmf_soft = cfg.nmf_soft;
  o.nmf_iters = cfg.nmf_iters;
  o.kmeans_max_iters = cfg.kmeans_max_iters;
  o.kmeans_tol = cfg.kmeans_tol;
  o.minhash = MinHashParams{cfg.minhash_num_hashes, cfg.minhash_key_len, cfg.seed};
  o.train_hours = cfg.eval_train_hours;
  o.cutoff = cfg.eval_cutoff;
  o.window_len = cfg.eval_window_len;
  o.merge_windows = cfg.eval_merge_windows;
  o.smoothing = Smoothing{cfg.eval_smoothing_alpha, cfg.eval_smoothing_beta};
  return o;
}

namespace {

struct Agg {
  double ap = 0.0;
  double ndcg = 0.0;
  std::int64_t n = 0;
};

// One clustering family shared by its -clicks and -ctr methods.
struct Family {
  bool used = false;
  ClusterModel model;
  std::optional<CtrAccumulator> acc;
  std::map<std::string, ClusterAssignment> cache;  // affiliation resolved at first use
};

struct HourRows {
  // Per-candidate dense cluster rows for the kmeans family (and nmf when
  // soft weights are on); lazy per-cluster rows for hard-assignment families.
  std::vector<double> dense_ctr;
  std::vector<double> dense_clicks;
  std::unordered_map<int, std::vector<double>> by_cluster_ctr;
  std::unordered_map<int, std::vector<double>> by_cluster_clicks;
};

}  // namespace

std::string EvalReport::to_csv() const {
  std::string out = "method,mode,scope,segment,map,ndcg\n";
  for (const auto& r : rows) {
    out += r.method;
    out += ',';
    out += r.mode;
    out += ',';
    out += r.scope;
    out += ',';
    out += r.segment;
    out += ',';
    out += fmt_double(r.map);
    out += ',';
    out += fmt_double(r.ndcg);
    out += '\n';
  }
  return out;
}

std::string EvalReport::summary() const {
  std::string out;
  for (const char* mode : {"all", "user"}) {
    bool header = false;
    for (const auto& r : rows) {
      if (r.scope != "overall" || r.mode != mode) continue;
      if (!header) {
        out += "mode ";
        out += mode;
        out += "  (overall means)\n";
        out += "  method          MAP       NDCG\n";
        header = true;
      }
      char buf[96];
      std::snprintf(buf, sizeof(buf), "  %-14s %9.6f %9.6f\n", r.method.c_str(), r.map, r.ndcg);
      out += buf;
    }
  }
  return out;
}

const EvalRow& EvalReport::overall(const std::string& method, const std::string& mode) const {
  for (const auto& r : rows) {
    if (r.scope == "overall" && r.method == method && r.mode == mode) return r;
  }
  throw std::out_of_range("no overall row for " + method + "/" + mode);
}

EvalReport run_experiment(const World& world, const std::vector<HourSegment>& segments,
                          const std::string& events_path,
                          const std::vector<EvalMethod>& methods,
                          const std::vector<std::string>& modes, const EvalOptions& opts) {
  auto clock_start = std::chrono::steady_clock::now();
  const Timestamp t0 = world.spec.t0;
  const Timestamp train_end = t0 + static_cast<Timestamp>(opts.train_hours) * 3600;
  const int total_hours = static_cast<int>(segments.size());
  if (opts.train_hours >= total_hours)
    throw std::invalid_argument("training window leaves no hours to evaluate");
  for (const auto& mode : modes) {
    if (mode != "all" && mode != "user") throw std::invalid_argument("unknown mode: " + mode);
  }

  auto uses = [&](EvalMethod m) {
    return std::find(methods.begin(), methods.end(), m) != methods.end();
  };
  const bool need_kmeans = uses(EvalMethod::kmeans_clicks) || uses(EvalMethod::kmeans_ctr);
  const bool need_minhash = uses(EvalMethod::minhash_clicks) || uses(EvalMethod::minhash_ctr);
  const bool need_nmf = uses(EvalMethod::nmf_clicks) || uses(EvalMethod::nmf_ctr);

  MemoryProfileStore store;
  EventPipeline pipeline(store, world.articles, PipelineOptions{opts.history_len, false});
  std::map<std::string, std::set<std::string>> click_sets;
  std::map<std::string, std::map<std::string, double>> click_counts;

  // Pass 1: training prefix builds profiles and click summaries.
  {
    std::ifstream in(events_path);
    if (!in) throw std::runtime_error("cannot open events: " + events_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto ev = parse_event(line);
      if (!ev) continue;
      if (ev->ts >= train_end) break;  // log is time-ordered
      if (ev->kind == EventKind::click) {
        pipeline.handle_click(*ev);
        click_sets[ev->user_id].insert(ev->article_id);
        click_counts[ev->user_id][ev->article_id] += 1.0;
      } else if (ev->kind == EventKind::access) {
        pipeline.handle_access(*ev);
      }
    }
  }

  Family kmeans_family, minhash_family, nmf_family;
  if (need_kmeans) {
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
    kmeans_family.model = kmeans_fit(user_vectors, ko);
    kmeans_family.model.version = 101;
    kmeans_family.used = true;
  }
  if (need_minhash) {
    minhash_family.model = minhash_fit(click_sets, opts.minhash);
    minhash_family.model.version = 102;
    minhash_family.used = true;
  }
  if (need_nmf) {
    NmfOptions no;
    no.k = opts.k;
    no.seed = opts.fit_seed;
    no.iters = opts.nmf_iters;
    nmf_family.model = nmf_fit(ClickMatrix::from_counts(click_counts), no);
    nmf_family.model.version = 103;
    nmf_family.used = true;
  }

  std::vector<Family*> families;
  if (kmeans_family.used) families.push_back(&kmeans_family);
  if (minhash_family.used) families.push_back(&minhash_family);
  if (nmf_family.used) families.push_back(&nmf_family);
  for (Family* f : families)
    f->acc.emplace(t0, opts.window_len, opts.merge_windows, f->model.num_clusters,
                   f->model.version);

  EvalReport report;

  // Affiliation of a user within one family, resolved once and cached; null
  // when the user cannot be assigned yet.
  auto affiliation = [&](Family& f, const std::string& user) -> const ClusterAssignment* {
    auto it = f.cache.find(user);
    if (it != f.cache.end()) return &it->second;
    auto ma = f.model.assignments.find(user);
    if (ma != f.model.assignments.end())
      return &f.cache.emplace(user, ma->second).first->second;
    try {
      ClusterAssignment a;
      switch (f.model.algorithm) {
        case ClusterAlgorithm::kmeans: {
          auto p = store.get(user);
          if (!p || !p->vector) return nullptr;
          a = assign(f.model, &*p->vector, nullptr, nullptr);
          break;
        }
        case ClusterAlgorithm::minhash: {
          auto cs = click_sets.find(user);
          if (cs == click_sets.end() || cs->second.empty()) return nullptr;
          a = assign(f.model, nullptr, &cs->second, nullptr);
          break;
        }
        case ClusterAlgorithm::nmf: {
          auto cc = click_counts.find(user);
          if (cc == click_counts.end() || cc->second.empty()) return nullptr;
          a = assign(f.model, nullptr, nullptr, &cc->second);
          break;
        }
      }
      return &f.cache.emplace(user, std::move(a)).first->second;
    } catch (const std::invalid_argument&) {
      return nullptr;
    }
  };

  const std::size_t n_methods = methods.size();
  const std::size_t n_modes = modes.size();
  std::vector<std::vector<std::vector<Agg>>> agg(
      n_methods, std::vector<std::vector<Agg>>(n_modes, std::vector<Agg>(total_hours)));

  // Scores one candidate list for one user/method; `dense` rows belong to the
  // hour and the all-mode candidate indexing.
  struct UserState {
    const UserProfile* profile;
    const ClusterWeights* kmeans_weights;
    const ClusterAssignment* minhash_assignment;
    const ClusterAssignment* nmf_assignment;
  };

  auto evaluate_hour = [&](int h) {
    for (Family* f : families) f->acc->roll_until(segments[h].hour_start);
    const HourSegment& seg = segments[h];
    if (seg.clicked.empty()) return;

    CtrTable merged_k, merged_m, merged_n;
    if (kmeans_family.used) merged_k = kmeans_family.acc->merged();
    if (minhash_family.used) merged_m = minhash_family.acc->merged();
    if (nmf_family.used) merged_n = nmf_family.acc->merged();

    // Candidate indexing for the all mode.
    const std::vector<std::string>& cands = seg.candidates_all;
    const std::size_t n = cands.size();
    std::unordered_map<std::string, std::size_t> cand_pos;
    cand_pos.reserve(n * 2);
    std::vector<Timestamp> published(n, 0);
    std::vector<const Vec*> avec(n, nullptr);
    for (std::size_t i = 0; i < n; ++i) {
      cand_pos.emplace(cands[i], i);
      const ArticleRecord* a = world.articles.find(cands[i]);
      if (a) {
        published[i] = a->published_at;
        if (a->vector) avec[i] = &*a->vector;
      }
    }

    const int k_clusters = opts.k;
    HourRows rows_k, rows_m, rows_n;
    auto build_dense = [&](const CtrTable& t, HourRows& rows) {
      rows.dense_ctr.assign(n * static_cast<std::size_t>(t.num_clusters), 0.0);
      rows.dense_clicks.assign(n * static_cast<std::size_t>(t.num_clusters), 0.0);
      for (const auto& [key, cell] : t.cells) {
        auto it = cand_pos.find(key.second);
        if (it == cand_pos.end()) continue;
        std::size_t base = it->second * static_cast<std::size_t>(t.num_clusters);
        double denom = static_cast<double>(cell.impressions) + opts.smoothing.beta;
        if (denom > 0.0)
          rows.dense_ctr[base + key.first] =
              (static_cast<double>(cell.clicks) + opts.smoothing.alpha) / denom;
        rows.dense_clicks[base + key.first] = static_cast<double>(cell.clicks);
      }
    };
    if (kmeans_family.used) build_dense(merged_k, rows_k);
    if (nmf_family.used && opts.nmf_soft) build_dense(merged_n, rows_n);

    // Lazy per-cluster rows for hard-affiliation families.
    auto cluster_row = [&](const CtrTable& t, HourRows& rows, int cluster, bool want_ctr)
        -> const std::vector<double>& {
      auto& cache = want_ctr ? rows.by_cluster_ctr : rows.by_cluster_clicks;
      auto it = cache.find(cluster);
      if (it != cache.end()) return it->second;
      std::vector<double> row(n, 0.0);
      auto cell_it = t.cells.lower_bound({cluster, std::string()});
      for (; cell_it != t.cells.end() && cell_it->first.first == cluster; ++cell_it) {
        auto pos = cand_pos.find(cell_it->first.second);
        if (pos == cand_pos.end()) continue;
        if (want_ctr) {
          double denom = static_cast<double>(cell_it->second.impressions) + opts.smoothing.beta;
          if (denom > 0.0)
            row[pos->second] =
                (static_cast<double>(cell_it->second.clicks) + opts.smoothing.alpha) / denom;
        } else {
          row[pos->second] = static_cast<double>(cell_it->second.clicks);
        }
      }
      return cache.emplace(cluster, std::move(row)).first->second;
    };

    std::vector<double> scores(n);
    std::vector<std::size_t> order(n);
    std::vector<std::string> ranked;

    auto score_all_mode = [&](EvalMethod m, const UserState& u, std::vector<double>& s) -> bool {
      switch (m) {
        case EvalMethod::content: {
          for (std::size_t i = 0; i < n; ++i)
            s[i] = avec[i] ? score_content_baseline(*u.profile->vector, *avec[i]) : 0.0;
          return true;
        }
        case EvalMethod::kmeans_clicks:
        case EvalMethod::kmeans_ctr: {
          const std::vector<double>& rows =
              m == EvalMethod::kmeans_ctr ? rows_k.dense_ctr : rows_k.dense_clicks;
          std::fill(s.begin(), s.end(), 0.0);
          for (const auto& [cluster, w] : u.kmeans_weights->weights) {
            const double* col = rows.data() + cluster;
            for (std::size_t i = 0; i < n; ++i)
              s[i] += w * col[i * static_cast<std::size_t>(k_clusters)];
          }
          return true;
        }
        case EvalMethod::minhash_clicks:
        case EvalMethod::minhash_ctr: {
          if (!u.minhash_assignment) return false;
          const auto& row = cluster_row(merged_m, rows_m, u.minhash_assignment->cluster,
                                        m == EvalMethod::minhash_ctr);
          std::copy(row.begin(), row.end(), s.begin());
          return true;
        }
        case EvalMethod::nmf_clicks:
        case EvalMethod::nmf_ctr: {
          if (!u.nmf_assignment) return false;
          if (opts.nmf_soft) {
            const std::vector<double>& rows =
                m == EvalMethod::nmf_ctr ? rows_n.dense_ctr : rows_n.dense_clicks;
            std::fill(s.begin(), s.end(), 0.0);
            const auto& soft = u.nmf_assignment->soft;
            for (int c = 0; c < static_cast<int>(soft.size()); ++c) {
              if (soft[c] <= 0.0) continue;
              const double* col = rows.data() + c;
              for (std::size_t i = 0; i < n; ++i)
                s[i] += soft[c] * col[i * static_cast<std::size_t>(k_clusters)];
            }
          } else {
            const auto& row = cluster_row(merged_n, rows_n, u.nmf_assignment->cluster,
                                          m == EvalMethod::nmf_ctr);
            std::copy(row.begin(), row.end(), s.begin());
          }
          return true;
        }
      }
      return false;
    };

    auto score_one = [&](EvalMethod m, const UserState& u, const std::string& id) -> double {
      switch (m) {
        case EvalMethod::content: {
          const ArticleRecord* a = world.articles.find(id);
          return a && a->vector ? score_content_baseline(*u.profile->vector, *a->vector) : 0.0;
        }
        case EvalMethod::kmeans_clicks:
        case EvalMethod::kmeans_ctr: {
          double s = 0.0;
          for (const auto& [cluster, w] : u.kmeans_weights->weights) {
            if (m == EvalMethod::kmeans_ctr)
              s += w * merged_k.ctr(cluster, id, opts.smoothing);
            else
              s += w * static_cast<double>(merged_k.clicks(cluster, id));
          }
          return s;
        }
        case EvalMethod::minhash_clicks:
        case EvalMethod::minhash_ctr: {
          if (!u.minhash_assignment) return 0.0;
          int c = u.minhash_assignment->cluster;
          return m == EvalMethod::minhash_ctr
                     ? merged_m.ctr(c, id, opts.smoothing)
                     : static_cast<double>(merged_m.clicks(c, id));
        }
        case EvalMethod::nmf_clicks:
        case EvalMethod::nmf_ctr: {
          if (!u.nmf_assignment) return 0.0;
          if (opts.nmf_soft) {
            double s = 0.0;
            const auto& soft = u.nmf_assignment->soft;
            for (int c = 0; c < static_cast<int>(soft.size()); ++c) {
              if (soft[c] <= 0.0) continue;
              if (m == EvalMethod::nmf_ctr)
                s += soft[c] * merged_n.ctr(c, id, opts.smoothing);
              else
                s += soft[c] * static_cast<double>(merged_n.clicks(c, id));
            }
            return s;
          }
          int c = u.nmf_assignment->cluster;
          return m == EvalMethod::nmf_ctr ? merged_n.ctr(c, id, opts.smoothing)
                                          : static_cast<double>(merged_n.clicks(c, id));
        }
      }
      return 0.0;
    };

    for (const auto& [user, relevant] : seg.clicked) {
      if (relevant.empty()) continue;
      auto profile = store.get(user);
      if (!profile || !profile->vector) {
        ++report.excluded_users;
        continue;
      }
      ++report.evaluated_users;

      UserState u{&*profile, nullptr, nullptr, nullptr};
      ClusterWeights wk;
      if (kmeans_family.used) {
        wk = kmeans_weights(*profile->vector, kmeans_family.model, opts.weight_exponent,
                            opts.eps);
        u.kmeans_weights = &wk;
      }
      if (minhash_family.used) u.minhash_assignment = affiliation(minhash_family, user);
      if (nmf_family.used) u.nmf_assignment = affiliation(nmf_family, user);

      for (std::size_t mode_i = 0; mode_i < n_modes; ++mode_i) {
        const bool all_mode = modes[mode_i] == "all";
        for (std::size_t method_i = 0; method_i < n_methods; ++method_i) {
          EvalMethod m = methods[method_i];
          double ap = 0.0, nd = 0.0;
          if (all_mode) {
            bool scorable = score_all_mode(m, u, scores);
            if (!scorable) std::fill(scores.begin(), scores.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i) order[i] = i;
            std::size_t keep = std::min<std::size_t>(n, static_cast<std::size_t>(opts.cutoff));
            std::partial_sort(order.begin(), order.begin() + keep, order.end(),
                              [&](std::size_t a, std::size_t b) {
                                if (scores[a] != scores[b]) return scores[a] > scores[b];
                                if (published[a] != published[b])
                                  return published[a] > published[b];
                                return cands[a] < cands[b];
                              });
            ranked.clear();
            for (std::size_t i = 0; i < keep; ++i) ranked.push_back(cands[order[i]]);
            ap = average_precision(ranked, relevant, opts.cutoff);
            nd = ndcg(ranked, relevant, opts.cutoff);
          } else {
            auto disp = seg.displayed.find(user);
            if (disp == seg.displayed.end() || disp->second.empty()) continue;
            const auto& list = disp->second;
            std::vector<std::pair<double, std::size_t>> small(list.size());
            for (std::size_t i = 0; i < list.size(); ++i)
              small[i] = {score_one(m, u, list[i]), i};
            std::sort(small.begin(), small.end(), [&](const auto& a, const auto& b) {
              if (a.first != b.first) return a.first > b.first;
              const ArticleRecord* aa = world.articles.find(list[a.second]);
              const ArticleRecord* ab = world.articles.find(list[b.second]);
              Timestamp pa = aa ? aa->published_at : 0;
              Timestamp pb = ab ? ab->published_at : 0;
              if (pa != pb) return pa > pb;
              return list[a.second] < list[b.second];
            });
            ranked.clear();
            for (const auto& [s, i] : small) ranked.push_back(list[i]);
            ap = average_precision(ranked, relevant, std::nullopt);
            nd = ndcg(ranked, relevant, std::nullopt);
          }
          Agg& a = agg[method_i][mode_i][h];
          a.ap += ap;
          a.ndcg += nd;
          ++a.n;
        }
      }
    }
  };

  // Pass 2: backfill CTR over the training prefix under the fitted models,
  // then alternate rank-then-ingest per evaluated hour.
  {
    std::ifstream in(events_path);
    if (!in) throw std::runtime_error("cannot open events: " + events_path);
    std::string line;
    int next_eval_hour = opts.train_hours;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto ev = parse_event(line);
      if (!ev) continue;
      if (ev->ts >= train_end) {
        std::int64_t h = (ev->ts - t0) / 3600;
        while (next_eval_hour <= h && next_eval_hour < total_hours)
          evaluate_hour(next_eval_hour++);
      }
      if (ev->kind != EventKind::access) {
        for (Family* f : families) {
          const ClusterAssignment* a = affiliation(*f, ev->user_id);
          if (a) f->acc->ingest(*ev, a->cluster);
        }
      }
      if (ev->ts >= train_end) {
        if (ev->kind == EventKind::click) {
          pipeline.handle_click(*ev);
          click_sets[ev->user_id].insert(ev->article_id);
          click_counts[ev->user_id][ev->article_id] += 1.0;
        } else if (ev->kind == EventKind::access) {
          pipeline.handle_access(*ev);
        }
      }
    }
    while (next_eval_hour < total_hours) evaluate_hour(next_eval_hour++);
  }

  // Aggregation: hour rows, day rows (means of hour means), overall rows.
  for (std::size_t method_i = 0; method_i < n_methods; ++method_i) {
    for (std::size_t mode_i = 0; mode_i < n_modes; ++mode_i) {
      double overall_ap = 0.0, overall_nd = 0.0;
      int overall_hours = 0;
      std::map<int, std::pair<std::pair<double, double>, int>> by_day;
      for (int h = opts.train_hours; h < total_hours; ++h) {
        const Agg& a = agg[method_i][mode_i][h];
        if (a.n == 0) continue;
        double map = a.ap / static_cast<double>(a.n);
        double nd = a.ndcg / static_cast<double>(a.n);
        overall_ap += map;
        overall_nd += nd;
        ++overall_hours;
        auto& day = by_day[h / 24];
        day.first.first += map;
        day.first.second += nd;
        ++day.second;
      }
      const std::string method = to_string(methods[method_i]);
      if (overall_hours > 0) {
        report.rows.push_back(EvalRow{method, modes[mode_i], "overall", "-",
                                      overall_ap / overall_hours, overall_nd / overall_hours});
      }
      for (const auto& [day, sums] : by_day) {
        report.rows.push_back(EvalRow{method, modes[mode_i], "day", "d" + std::to_string(day),
                                      sums.first.first / sums.second,
                                      sums.first.second / sums.second});
      }
      for (int h = opts.train_hours; h < total_hours; ++h) {
        const Agg& a = agg[method_i][mode_i][h];
        if (a.n == 0) continue;
        report.rows.push_back(EvalRow{method, modes[mode_i], "hour",
                                      std::to_string(segments[h].hour_start),
                                      a.ap / static_cast<double>(a.n),
                                      a.ndcg / static_cast<double>(a.n)});
      }
    }
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
  return report;
}

}  // namespace newsrec
