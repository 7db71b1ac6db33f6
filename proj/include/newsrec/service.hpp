#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "newsrec/cluster.hpp"
#include "newsrec/config.hpp"
#include "newsrec/ctr.hpp"
#include "newsrec/pipeline.hpp"
#include "newsrec/scorer.hpp"

namespace newsrec {

// Everything a request needs, immutable once installed. The pool is derived
// from the CTR table at refresh time so the request path touches no maps.
struct ServingSnapshot {
  ClusterModel model;
  CtrTable ctr;
  CandidatePool pool;
  Timestamp loaded_at = 0;
};

struct RecommendResponse {
  std::vector<ScoredArticle> items;
  bool fallback = false;
  std::uint64_t model_version = 0;
  Timestamp window_start = 0;
  Timestamp window_end = 0;
  double elapsed_ms = 0.0;  // timing metadata; excluded from determinism

  // Fixed field order; elapsed_ms is emitted only when include_timing.
  std::string to_json(bool include_timing = true) const;
};

struct IngestAck {
  std::int64_t accepted = 0;
  std::int64_t rejected = 0;
  std::int64_t anomalies = 0;                // clicks without a prior impression
  std::vector<std::size_t> rejected_lines;   // 1-based line numbers, first 100

  std::string to_json() const;
};

// Single-process serving face: immutable snapshot behind a mutex-guarded
// shared_ptr (readers never block on refresh), event ingestion serialized
// through the shared pipeline.
class RecService {
 public:
  RecService(ProfileStore& store, const ArticleIndex& articles, const RunConfig& cfg);

  // Installs a refreshed snapshot atomically. A model/CTR version mismatch
  // rejects the refresh, keeps the previous snapshot, raises the degraded
  // flag, and returns false.
  bool install(ServingSnapshot snapshot);

  std::shared_ptr<const ServingSnapshot> snapshot() const;

  // Serves top m from the snapshot pool; cold or unknown users get the
  // pooled-CTR fallback with fallback=true. Emits an access event for the
  // user after serving. Throws std::runtime_error("no snapshot installed")
  // and std::invalid_argument("m must be positive").
  RecommendResponse recommend(const std::string& user_id, int m, Timestamp now,
                              bool with_breakdown = false);

  // Line-delimited events; malformed lines are itemized, valid events are
  // applied in order.
  IngestAck ingest(const std::string& body);

  std::string health_json(Timestamp now) const;
  std::string metrics_json() const;

  // CTR anomaly count forwarded from ingestion attribution, if wired.
  void attach_ctr(CtrAccumulator* acc, EventPipeline::ClusterResolver resolver);

 private:
  ProfileStore& store_;
  EventPipeline pipeline_;
  DecayConfig decay_;
  DecayConfig fallback_decay_;
  WeightOptions weight_opts_;
  Smoothing smoothing_;
  Timestamp started_at_ = 0;

  mutable std::mutex snapshot_mu_;
  std::shared_ptr<const ServingSnapshot> snapshot_;
  bool degraded_ = false;

  mutable std::mutex stats_mu_;
  std::int64_t requests_ = 0;
  std::int64_t fallbacks_ = 0;
  std::int64_t events_accepted_ = 0;
  std::int64_t events_rejected_ = 0;
  std::int64_t profile_fetches_ = 0;  // only requests touch profiles
  std::int64_t refreshes_ = 0;
  std::int64_t refresh_rejects_ = 0;
  std::vector<std::int64_t> latency_us_buckets_;  // powers of two, 1us..

  mutable std::mutex ingest_mu_;
  CtrAccumulator* ctr_acc_ = nullptr;  // for anomaly deltas in ingest acks

  void record_latency(double elapsed_ms);
};

}  // namespace newsrec
