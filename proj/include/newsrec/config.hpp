#pragma once

#include <cstdint>
#include <string>

#include "newsrec/common.hpp"

namespace newsrec {

// Flat union of every tunable, shared by all subcommands. Loaded from a JSON
// object; unknown keys are rejected so typos cannot silently fall back to
// defaults. Flags override file values; the effective configuration is
// echoed as a banner for reproducibility.
struct RunConfig {
  // engine
  int d = 64;                      // embedding dimension
  int history_len = 50;            // N, click-history bound
  int k = 50;                      // clusters
  double weight_exponent = 10.0;   // 1/distance^exponent
  double eps = 1e-6;               // distance clamp
  std::string decay_mode = "utdf"; // none | tdf | utdf
  Timestamp t_tdf = 3600;
  Timestamp t_utdf = 14400;
  double sigma = 12960000.0;       // 3600^2 s^2
  Timestamp window_len = 600;      // CTR tumbling window
  int merge_windows = 24;          // union horizon for serving snapshots
  Timestamp candidate_horizon = 172800;  // 48 h
  Timestamp ctr_refresh_seconds = 600;
  Timestamp model_refresh_seconds = 86400;
  double smoothing_alpha = 0.0;
  double smoothing_beta = 0.0;
  bool nmf_soft = false;
  int nmf_iters = 120;
  int kmeans_max_iters = 100;
  double kmeans_tol = 1e-6;
  int minhash_num_hashes = 8;
  int minhash_key_len = 2;
  std::string listen = "127.0.0.1:8706";

  // synthetic world
  std::uint64_t seed = 1;
  int num_topics = 12;
  int vocab_size = 2000;
  int num_users = 2000;
  int num_articles = 5000;
  int days = 7;
  double word_noise = 0.35;
  int tokens_min = 20;
  int tokens_max = 60;
  double visit_mu = 1.9459101090932196;  // ln 7: median sessions/day
  double visit_sigma = 0.9;
  double pref_alpha = 0.3;
  double affinity_weight = 4.0;
  double freshness_half_life = 86400.0;
  double base_rate = 0.18;
  double policy_noise = 0.3;
  int slate_size = 10;
  double trend_amp = 0.8;          // strength of population interest waves
  Timestamp trend_period = 86400;  // typical wave period, seconds
  Timestamp world_start = 1700000000;

  // evaluation
  int eval_train_hours = 120;      // 5 of the 7 simulated days
  int eval_cutoff = 10;            // @k for the all mode
  Timestamp eval_window_len = 3600;
  int eval_merge_windows = 24;     // 24 h CTR horizon per evaluated hour
  double eval_smoothing_alpha = 0.0;
  double eval_smoothing_beta = 1.0;

  // a/b replay
  int ab_warmup_hours = 48;
  double ab_experiment_traffic = 0.9;

  static RunConfig from_json_text(const std::string& text, const std::string& origin);
  static RunConfig load(const std::string& path);

  // Applies `key=value` overrides (flag syntax) on top of this config.
  void apply_override(const std::string& key, const std::string& value);

  // Sorted `key=value` lines describing the effective configuration.
  std::string banner() const;

  void validate() const;  // throws std::invalid_argument on bad values
};

}  // namespace newsrec
