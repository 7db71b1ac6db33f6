#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <utility>

#include "newsrec/common.hpp"
#include "newsrec/events.hpp"

namespace newsrec {

// Additive CTR smoothing: (clicks + alpha) / (impressions + beta).
// Defaults off, matching observed CTR.
struct Smoothing {
  double alpha = 0.0;
  double beta = 0.0;
};

struct CtrCell {
  std::int64_t impressions = 0;
  std::int64_t clicks = 0;
};

// Frozen (cluster, article) -> counts over one aggregation window, stamped
// with the cluster-model version its indices refer to. Ordered map so
// iteration and export are deterministic.
struct CtrTable {
  Timestamp window_start = 0;
  Timestamp window_end = 0;
  std::uint64_t model_version = 0;
  int num_clusters = 0;
  std::map<std::pair<int, std::string>, CtrCell> cells;
  std::int64_t anomalies = 0;  // clicks seen before any impression in their cell

  const CtrCell* find(int cluster, const std::string& article_id) const;

  // (clicks + alpha) / (impressions + beta); 0 whenever the cell is absent
  // or impressions + beta is zero, so never-displayed articles contribute
  // nothing even under a smoothing prior.
  double ctr(int cluster, const std::string& article_id, Smoothing s = {}) const;
  std::int64_t clicks(int cluster, const std::string& article_id) const;

  // Header with window bounds and model version, then sorted
  // `cluster article impressions clicks` lines.
  void save(const std::string& path) const;
  static CtrTable load(const std::string& path);
};

// Accumulates events into tumbling windows and serves the merged union of
// the most recent frozen windows. One logical writer; frozen tables are
// immutable snapshots.
class CtrAccumulator {
 public:
  CtrAccumulator(Timestamp start, Timestamp window_len, int merge_windows, int num_clusters,
                 std::uint64_t model_version);

  // Counts an impression/click in the open window. Throws
  // std::invalid_argument("unknown cluster") when the index is outside
  // [0, num_clusters). Access events are ignored. Late events (ts before the
  // open window) are tolerated and land in the open window.
  void record(const BehaviorEvent& ev, int cluster);

  // Like record but first rolls the open window forward (on aligned
  // boundaries) until the event timestamp fits.
  void ingest(const BehaviorEvent& ev, int cluster);

  // Freezes [open_start, now) and opens [now, now + window_len). Returns the
  // frozen snapshot; it is also retained for merged().
  CtrTable roll_window(Timestamp now);

  // Rolls on aligned boundaries until `now` lies in the open window.
  void roll_until(Timestamp now);

  // Union of the last merge_windows frozen windows (the open window is never
  // included): counts summed, bounds spanned.
  CtrTable merged() const;

  const CtrTable& open_window() const { return open_; }
  Timestamp open_end() const { return open_.window_start + window_len_; }
  std::size_t frozen_count() const { return frozen_.size(); }
  // Anomalies across every window this accumulator has ever seen; per-window
  // counts reset when windows roll.
  std::int64_t anomalies_total() const { return anomalies_total_; }

 private:
  Timestamp window_len_;
  std::size_t merge_windows_;
  CtrTable open_;
  std::deque<CtrTable> frozen_;
  std::int64_t anomalies_total_ = 0;
};

}  // namespace newsrec
