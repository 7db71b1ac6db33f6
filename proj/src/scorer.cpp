#include "newsrec/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "newsrec/vecmath.hpp"

namespace newsrec {

const char* to_string(DecayMode m) {
  switch (m) {
    case DecayMode::none: return "none";
    case DecayMode::tdf: return "tdf";
    case DecayMode::utdf: return "utdf";
  }
  return "?";
}

std::optional<DecayMode> decay_mode_from(const std::string& name) {
  if (name == "none") return DecayMode::none;
  if (name == "tdf") return DecayMode::tdf;
  if (name == "utdf") return DecayMode::utdf;
  return std::nullopt;
}

namespace {

double tail_decay(double delta, const DecayConfig& cfg) {
  double t = static_cast<double>(cfg.threshold_seconds);
  bool damped = cfg.literal_branches ? (delta <= t) : (delta > t);
  if (!damped) return 1.0;
  double x = delta - t;
  return std::exp(-(x * x) / (2.0 * cfg.sigma));
}

}  // namespace

double decay_tdf(Timestamp now, Timestamp published_at, const DecayConfig& cfg) {
  return tail_decay(static_cast<double>(now - published_at), cfg);
}

double decay_utdf(std::optional<Timestamp> last_access_at, Timestamp published_at, Timestamp now,
                  const DecayConfig& cfg) {
  if (!last_access_at) return decay_tdf(now, published_at, cfg);
  return tail_decay(static_cast<double>(*last_access_at - published_at), cfg);
}

double decay_factor(const DecayConfig& cfg, Timestamp now, std::optional<Timestamp> last_access_at,
                    Timestamp published_at) {
  switch (cfg.mode) {
    case DecayMode::none: return 1.0;
    case DecayMode::tdf: return decay_tdf(now, published_at, cfg);
    case DecayMode::utdf: return decay_utdf(last_access_at, published_at, now, cfg);
  }
  return 1.0;
}

ScoredArticle score_article(const ClusterWeights& weights, const CtrTable& table,
                            const std::string& article_id, double decay, Smoothing smoothing,
                            bool with_breakdown) {
  if (weights.model_version != table.model_version)
    throw std::invalid_argument("stale weights");
  double undamped = 0.0;
  for (const auto& [cluster, w] : weights.weights)
    undamped += w * table.ctr(cluster, article_id, smoothing);
  ScoredArticle out;
  out.article_id = article_id;
  out.score = decay * undamped;
  if (with_breakdown) out.breakdown = ScoreBreakdown{decay, undamped};
  return out;
}

double score_clicks_variant(const ClusterWeights& weights, const CtrTable& table,
                            const std::string& article_id, double decay) {
  if (weights.model_version != table.model_version)
    throw std::invalid_argument("stale weights");
  double undamped = 0.0;
  for (const auto& [cluster, w] : weights.weights)
    undamped += w * static_cast<double>(table.clicks(cluster, article_id));
  return decay * undamped;
}

double score_content_baseline(const Vec& user_vector, const Vec& article_vector) {
  return dot(user_vector, article_vector);
}

namespace {

struct RankEntry {
  double score;
  Timestamp published;
  const std::string* id;
  std::size_t index;
};

// Descending score, then later publication, then ascending id.
bool rank_before(const RankEntry& a, const RankEntry& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.published != b.published) return a.published > b.published;
  return *a.id < *b.id;
}

std::vector<ScoredArticle> take_top(std::vector<RankEntry>& entries, int m,
                                    const std::vector<std::optional<ScoreBreakdown>>* breakdowns) {
  std::size_t keep = std::min<std::size_t>(entries.size(), static_cast<std::size_t>(m));
  std::partial_sort(entries.begin(), entries.begin() + keep, entries.end(), rank_before);
  std::vector<ScoredArticle> out;
  out.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    ScoredArticle s;
    s.article_id = *entries[i].id;
    s.score = entries[i].score;
    if (breakdowns) s.breakdown = (*breakdowns)[entries[i].index];
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

std::vector<ScoredArticle> rank(const UserProfile& user,
                                const std::vector<ArticleRecord>& candidates,
                                const ClusterModel& model, const CtrTable& table,
                                const DecayConfig& cfg, int m, Timestamp now,
                                const RankOptions& opts) {
  if (m < 1) throw std::invalid_argument("m must be positive");
  if (model.algorithm == ClusterAlgorithm::kmeans && !user.vector)
    throw std::invalid_argument("cold user");
  const ClusterAssignment* assignment = nullptr;
  auto it = model.assignments.find(user.user_id);
  if (it != model.assignments.end()) assignment = &it->second;
  ClusterWeights weights;
  try {
    weights = weights_for(model, user.vector, assignment, opts.weights);
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument("cold user");
  }

  std::vector<RankEntry> entries;
  entries.reserve(candidates.size());
  std::vector<std::optional<ScoreBreakdown>> breakdowns;
  if (opts.with_breakdown) breakdowns.resize(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const ArticleRecord& a = candidates[i];
    double decay = decay_factor(cfg, now, user.last_access_at, a.published_at);
    ScoredArticle s = score_article(weights, table, a.article_id, decay, opts.smoothing,
                                    opts.with_breakdown);
    if (opts.with_breakdown) breakdowns[i] = s.breakdown;
    entries.push_back(RankEntry{s.score, a.published_at, &a.article_id, i});
  }
  return take_top(entries, m, opts.with_breakdown ? &breakdowns : nullptr);
}

CandidatePool build_pool(const std::vector<ArticleRecord>& articles, const CtrTable& table,
                         Timestamp now, Timestamp horizon_seconds, Smoothing smoothing) {
  CandidatePool pool;
  pool.model_version = table.model_version;
  pool.num_clusters = table.num_clusters;

  // Per-article pooled counts decide membership (>= 1 impression anywhere).
  std::map<std::string, CtrCell> pooled;
  for (const auto& [key, cell] : table.cells) {
    CtrCell& acc = pooled[key.second];
    acc.impressions += cell.impressions;
    acc.clicks += cell.clicks;
  }

  for (const auto& a : articles) {
    if (a.published_at > now || a.published_at <= now - horizon_seconds) continue;
    auto it = pooled.find(a.article_id);
    if (it == pooled.end() || it->second.impressions == 0) continue;
    pool.ids.push_back(a.article_id);
    pool.published.push_back(a.published_at);
    double p = (static_cast<double>(it->second.clicks) + smoothing.alpha) /
               (static_cast<double>(it->second.impressions) + smoothing.beta);
    pool.pooled_ctr.push_back(p);
  }

  pool.ctr_rows.assign(pool.ids.size() * static_cast<std::size_t>(pool.num_clusters), 0.0);
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < pool.ids.size(); ++i) index[pool.ids[i]] = i;
  for (const auto& [key, cell] : table.cells) {
    auto it = index.find(key.second);
    if (it == index.end()) continue;
    double denom = static_cast<double>(cell.impressions) + smoothing.beta;
    if (denom <= 0.0) continue;
    pool.ctr_rows[it->second * pool.num_clusters + key.first] =
        (static_cast<double>(cell.clicks) + smoothing.alpha) / denom;
  }
  return pool;
}

std::vector<ScoredArticle> rank_pool(const ClusterWeights& weights, const CandidatePool& pool,
                                     const DecayConfig& cfg, std::optional<Timestamp> last_access,
                                     int m, Timestamp now, bool with_breakdown) {
  if (m < 1) throw std::invalid_argument("m must be positive");
  if (weights.model_version != pool.model_version)
    throw std::invalid_argument("stale weights");
  const std::size_t n = pool.ids.size();
  const std::size_t k = static_cast<std::size_t>(pool.num_clusters);

  std::vector<double> undamped(n, 0.0);
  for (const auto& [cluster, w] : weights.weights) {
    const double* col = pool.ctr_rows.data() + cluster;
    for (std::size_t i = 0; i < n; ++i) undamped[i] += w * col[i * k];
  }

  std::vector<RankEntry> entries;
  entries.reserve(n);
  std::vector<std::optional<ScoreBreakdown>> breakdowns;
  if (with_breakdown) breakdowns.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double decay = decay_factor(cfg, now, last_access, pool.published[i]);
    double s = decay * undamped[i];
    if (with_breakdown) breakdowns[i] = ScoreBreakdown{decay, undamped[i]};
    entries.push_back(RankEntry{s, pool.published[i], &pool.ids[i], i});
  }
  return take_top(entries, m, with_breakdown ? &breakdowns : nullptr);
}

std::vector<ScoredArticle> rank_pool_fallback(const CandidatePool& pool, const DecayConfig& cfg,
                                              int m, Timestamp now) {
  if (m < 1) throw std::invalid_argument("m must be positive");
  DecayConfig tdf_cfg = cfg;
  tdf_cfg.mode = cfg.mode == DecayMode::none ? DecayMode::none : DecayMode::tdf;
  std::vector<RankEntry> entries;
  entries.reserve(pool.ids.size());
  for (std::size_t i = 0; i < pool.ids.size(); ++i) {
    double decay = decay_factor(tdf_cfg, now, std::nullopt, pool.published[i]);
    entries.push_back(RankEntry{decay * pool.pooled_ctr[i], pool.published[i], &pool.ids[i], i});
  }
  return take_top(entries, m, nullptr);
}

}  // namespace newsrec
