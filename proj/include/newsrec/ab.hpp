#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "newsrec/config.hpp"
#include "newsrec/ctr.hpp"
#include "newsrec/datagen.hpp"
#include "newsrec/scorer.hpp"

namespace newsrec {

struct AbOptions {
  std::uint64_t fit_seed = 1;
  int k = 50;
  int history_len = 50;
  double weight_exponent = 10.0;
  double eps = 1e-6;
  int kmeans_max_iters = 100;
  double kmeans_tol = 1e-6;
  Timestamp window_len = 3600;
  int merge_windows = 24;
  Smoothing smoothing{0.0, 1.0};
  int warmup_hours = 48;
  double experiment_traffic = 0.9;  // users diverted from the logged policy
  DecayConfig tdf;
  DecayConfig utdf;

  static AbOptions from_config(const RunConfig& cfg);
};

struct AbArmStats {
  std::string descriptor;
  std::int64_t sessions = 0;
  std::int64_t impressions = 0;
  std::int64_t clicks = 0;
  std::int64_t click_sessions = 0;  // sessions with at least one click

  double ctr() const;
  double clicks_per_session() const;
  double click_users_per_session() const;
};

struct AbReport {
  std::vector<AbArmStats> arms;
  std::int64_t warmup_sessions = 0;
  std::int64_t background_sessions = 0;  // stayed on the logged policy
  double wall_seconds = 0.0;

  // Metric ratios relative to arm 0; 0 when the baseline metric is 0.
  double ctr_ratio(std::size_t arm) const;
  double clicks_ratio(std::size_t arm) const;
  double click_users_ratio(std::size_t arm) const;

  std::string to_csv() const;
  std::string summary() const;
};

// Replays a synthetic log with a slice of users diverted to experiment arms.
// Arm descriptors: "random" (uniform shuffle), "control" (pooled CTR,
// no decay), "tdf" and "utdf" (cluster CTR under the respective decay).
// Sessions keep their logged times and per-user ordinals, so the world's
// click model answers counterfactual "would they have clicked" queries
// consistently with the logged behavior. Diverted users' logged impressions
// and clicks are dropped; background users replay verbatim and keep feeding
// the shared CTR windows. Throws std::invalid_argument("need at least two
// arms") and "unknown arm: <name>".
AbReport ab_replay(const World& world, const std::string& events_path,
                   const std::vector<std::string>& arms, std::uint64_t assignment_seed,
                   const AbOptions& opts);

}  // namespace newsrec
