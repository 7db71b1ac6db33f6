#pragma once

#include <optional>
#include <string>
#include <vector>

#include "newsrec/cluster.hpp"
#include "newsrec/common.hpp"
#include "newsrec/ctr.hpp"

namespace newsrec {

enum class DecayMode { none, tdf, utdf };

const char* to_string(DecayMode m);
std::optional<DecayMode> decay_mode_from(const std::string& name);

// Gaussian-tail freshness decay. An article is undamped while its elapsed
// time is at most threshold_seconds, then decays as exp(-(delta-T)^2/(2*sigma)).
// `literal_branches` flips the branch condition (test-only comparison knob;
// the damped-when-older reading is the production behavior).
struct DecayConfig {
  DecayMode mode = DecayMode::tdf;
  Timestamp threshold_seconds = 3600;  // 14400 is the usual utdf setting
  double sigma = 12960000.0;           // 3600^2, seconds^2
  bool literal_branches = false;
};

// Elapsed time measured from the current time: delta = now - published_at.
// Future-dated articles (delta < 0) are undamped.
double decay_tdf(Timestamp now, Timestamp published_at, const DecayConfig& cfg);

// Elapsed time measured from the user's last access: delta = last_access_at
// - published_at, so anything published after the last visit is fresh to
// this user. Users with no recorded last access fall back to the tdf rule
// with the same threshold and sigma ("now" is only used by that fallback).
double decay_utdf(std::optional<Timestamp> last_access_at, Timestamp published_at,
                  Timestamp now, const DecayConfig& cfg);

// Dispatch on cfg.mode; mode none always returns 1.
double decay_factor(const DecayConfig& cfg, Timestamp now,
                    std::optional<Timestamp> last_access_at, Timestamp published_at);

struct ScoreBreakdown {
  double decay_factor = 1.0;
  double undamped = 0.0;
};

struct ScoredArticle {
  std::string article_id;
  double score = 0.0;
  std::optional<ScoreBreakdown> breakdown;
};

// score = decay * sum_i weight_i * ctr(i, article). Throws
// std::invalid_argument("stale weights") when the weights were computed
// against a different model version than the table.
ScoredArticle score_article(const ClusterWeights& weights, const CtrTable& table,
                            const std::string& article_id, double decay, Smoothing smoothing = {},
                            bool with_breakdown = false);

// Same shape with raw click counts in place of CTR.
double score_clicks_variant(const ClusterWeights& weights, const CtrTable& table,
                            const std::string& article_id, double decay);

// Inner product of two unit vectors, in [-1, 1].
double score_content_baseline(const Vec& user_vector, const Vec& article_vector);

struct RankOptions {
  WeightOptions weights;
  Smoothing smoothing;
  bool with_breakdown = false;
};

// Scores every candidate for one user and returns the top m, ties broken by
// later published_at then ascending article_id. Throws
// std::invalid_argument("cold user") when the profile has no vector (kmeans)
// or no usable affiliation.
std::vector<ScoredArticle> rank(const UserProfile& user,
                                const std::vector<ArticleRecord>& candidates,
                                const ClusterModel& model, const CtrTable& table,
                                const DecayConfig& cfg, int m, Timestamp now,
                                const RankOptions& opts = {});

// Precomputed dense serving pool: one CTR row (and pooled CTR) per article
// so a request touches no hash map. Articles outside the horizon or with
// zero impressions everywhere are excluded.
struct CandidatePool {
  std::uint64_t model_version = 0;
  int num_clusters = 0;
  std::vector<std::string> ids;
  std::vector<Timestamp> published;
  std::vector<double> ctr_rows;     // ids.size() * num_clusters, row-major
  std::vector<double> pooled_ctr;   // all-cluster pooled, for the fallback path
};

CandidatePool build_pool(const std::vector<ArticleRecord>& articles, const CtrTable& table,
                         Timestamp now, Timestamp horizon_seconds, Smoothing smoothing = {});

// Fast path over the dense pool; identical results to rank() on the same
// candidates (same scoring and tie-breaks).
std::vector<ScoredArticle> rank_pool(const ClusterWeights& weights, const CandidatePool& pool,
                                     const DecayConfig& cfg, std::optional<Timestamp> last_access,
                                     int m, Timestamp now, bool with_breakdown = false);

// Fallback ranking for cold users: pooled CTR with tdf decay.
std::vector<ScoredArticle> rank_pool_fallback(const CandidatePool& pool, const DecayConfig& cfg,
                                              int m, Timestamp now);

}  // namespace newsrec
