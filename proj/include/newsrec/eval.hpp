#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "newsrec/cluster.hpp"
#include "newsrec/config.hpp"
#include "newsrec/ctr.hpp"
#include "newsrec/datagen.hpp"
#include "newsrec/segments.hpp"

namespace newsrec {

// AP with the min(|relevant|, k) normalization so AP@k stays in [0, 1].
// Throws std::invalid_argument("empty relevant set") — callers exclude
// zero-click users upstream.
double average_precision(const std::vector<std::string>& ranked,
                         const std::set<std::string>& relevant, std::optional<int> k);

// Binary gains: DCG = sum 1/log2(rank+1) over relevant hits (ranks from 1),
// normalized by the ideal ordering's DCG at the same cutoff.
double ndcg(const std::vector<std::string>& ranked, const std::set<std::string>& relevant,
            std::optional<int> k);

enum class EvalMethod {
  content,
  minhash_clicks,
  minhash_ctr,
  nmf_clicks,
  nmf_ctr,
  kmeans_clicks,
  kmeans_ctr,
};

const char* to_string(EvalMethod m);
std::vector<EvalMethod> all_eval_methods();
// "all" or a comma-separated subset of method names; throws on unknown names.
std::vector<EvalMethod> parse_methods(const std::string& spec);

struct EvalOptions {
  std::uint64_t fit_seed = 1;
  int k = 50;
  int history_len = 50;
  double weight_exponent = 10.0;
  double eps = 1e-6;
  bool nmf_soft = false;
  int nmf_iters = 120;
  int kmeans_max_iters = 100;
  double kmeans_tol = 1e-6;
  MinHashParams minhash;
  int train_hours = 120;
  int cutoff = 10;  // @k for the all mode; user mode scores the full list
  Timestamp window_len = 3600;
  int merge_windows = 24;
  Smoothing smoothing{0.0, 1.0};

  static EvalOptions from_config(const RunConfig& cfg);
};

struct EvalRow {
  std::string method;
  std::string mode;     // all | user
  std::string scope;    // overall | day | hour
  std::string segment;  // "-", day index, or hour_start
  double map = 0.0;
  double ndcg = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::int64_t evaluated_users = 0;  // user-hour pairs scored
  std::int64_t excluded_users = 0;   // eligible clicks but no vector yet
  double wall_seconds = 0.0;

  std::string to_csv() const;
  std::string summary() const;
  // Overall metric lookup; throws if the (method, mode) row is missing.
  const EvalRow& overall(const std::string& method, const std::string& mode) const;
};

// Replays the log hour by hour: models are fitted once on the training
// prefix, CTR accumulates as events arrive, and each evaluated hour is
// ranked before its own events are ingested (no temporal leakage). Scoring
// freezes decay at 1. Runs every requested method over both requested modes
// in one pass.
EvalReport run_experiment(const World& world, const std::vector<HourSegment>& segments,
                          const std::string& events_path,
                          const std::vector<EvalMethod>& methods,
                          const std::vector<std::string>& modes, const EvalOptions& opts);

}  // namespace newsrec
