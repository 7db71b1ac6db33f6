#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "newsrec/common.hpp"
#include "newsrec/config.hpp"
#include "newsrec/pipeline.hpp"
#include "newsrec/segments.hpp"
#include "newsrec/vectorizer.hpp"

namespace newsrec {

// Parameters of the synthetic world; a projection of RunConfig.
struct WorldSpec {
  std::uint64_t seed = 1;
  int num_topics = 12;
  int vocab_size = 2000;
  int d = 64;
  int num_users = 2000;
  int num_articles = 5000;
  int days = 7;
  double word_noise = 0.35;
  int tokens_min = 20;
  int tokens_max = 60;
  double visit_mu = 1.9459101090932196;
  double visit_sigma = 0.9;
  double pref_alpha = 0.3;
  double affinity_weight = 4.0;
  double freshness_half_life = 86400.0;
  double base_rate = 0.18;
  double policy_noise = 0.3;
  int slate_size = 10;
  double trend_amp = 0.8;          // strength of population interest waves
  Timestamp trend_period = 86400;  // typical wave period
  Timestamp horizon = 172800;
  Timestamp t0 = 1700000000;

  static WorldSpec from_config(const RunConfig& cfg);
};

// A fully materialized synthetic world. Articles are chronological;
// everything is reconstructible from the saved files, including the click
// model, so log replay can ask counterfactual click questions.
struct World {
  WorldSpec spec;
  std::vector<Vec> topic_vectors;  // unit vectors
  EmbeddingTable emb;
  IdfTable idf;
  ArticleIndex articles;            // chronological ids a0000..; vectors present
  std::vector<int> article_topic;   // ground truth, by article position
  std::vector<std::string> user_ids;
  std::vector<std::vector<double>> user_mix;  // topic mixtures, sum 1
  std::vector<Vec> user_pref;                 // unit preference vector in embedding space
  std::vector<double> user_rate;              // sessions per day
  std::vector<double> trend_freq;             // per-topic wave frequency, rad/s
  std::vector<double> trend_phase;            // per-topic wave phase, rad

  Timestamp t_end() const { return spec.t0 + static_cast<Timestamp>(spec.days) * 86400; }

  // One user's interest wave at time `at`: each topic's population wave
  // trend_amp * sin²(f_k t + φ_k) (positive half-waves only) scaled by the
  // square root of that user's mixture weight for the topic — readers surge
  // on themes they already follow, taste-alike users surge together, and a
  // surge on a secondary interest can briefly overtake the main one.
  // Derived from the seed, never stored.
  Vec trend_shift(std::size_t user_idx, Timestamp at) const;

  // base_rate * 2*sigmoid(affinity_weight * <pref(at), article vector>) *
  // exp(-age / half_life), clamped to [0, 1], where pref(at) is the user's
  // base preference plus their share of the interest waves, renormalized.
  // The doubled sigmoid makes a zero affinity weight an exact no-op factor.
  double click_probability(std::size_t user_idx, std::size_t article_idx, Timestamp at) const;

  // Deterministic Bernoulli draw for "would user u click article a when it
  // is shown in their ordinal-th session at time `at`". Log generation and
  // counterfactual replay share this exact function.
  bool click_draw(std::size_t user_idx, std::size_t article_idx, std::int64_t ordinal,
                  Timestamp at) const;

  // Position of the first/last article visible at time `at` under the
  // liveness rule published_at in (at - horizon, at].
  std::pair<std::size_t, std::size_t> live_range(Timestamp at) const;

  void save(const std::string& dir) const;
  static World load(const std::string& dir);
};

World generate_world(const WorldSpec& spec);

struct SimulationStats {
  std::int64_t sessions = 0;
  std::int64_t impressions = 0;
  std::int64_t clicks = 0;
};

// Sessions arrive per user by a Poisson process at the user's visit rate;
// each session the logging policy (recency-decayed pooled CTR + Gumbel noise
// over recently published, unclicked articles) shows a slate, and clicks
// follow click_draw. Events are written time-ordered with per-user sequence
// numbers.
SimulationStats simulate_logs(const World& world, const std::string& events_path);

// Partitions a log into hourly segments (half-open hour intervals) with the
// per-hour candidate set derived from the liveness rule.
std::vector<HourSegment> export_segments(const World& world, const std::string& events_path);

}  // namespace newsrec
