#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "newsrec/common.hpp"
#include "newsrec/ctr.hpp"
#include "newsrec/events.hpp"
#include "newsrec/vectorizer.hpp"

namespace newsrec {

// Article catalog with precomputed embedding vectors; read-only during
// serving and replay.
class ArticleIndex {
 public:
  void add(ArticleRecord article);
  const ArticleRecord* find(const std::string& article_id) const;
  const std::vector<ArticleRecord>& all() const { return articles_; }
  std::size_t size() const { return articles_.size(); }

  // Line format: `article_id published_at token...`; vectors are recomputed
  // from the embedding and idf tables at load.
  static ArticleIndex load(const std::string& path, const EmbeddingTable& emb,
                           const IdfTable& idf);
  void save(const std::string& path) const;

 private:
  std::vector<ArticleRecord> articles_;
  std::map<std::string, std::size_t> by_id_;
};

// user_id -> UserProfile with per-key atomic read/write.
class ProfileStore {
 public:
  virtual ~ProfileStore() = default;
  virtual std::optional<UserProfile> get(const std::string& user_id) const = 0;
  virtual void put(const UserProfile& profile) = 0;
  virtual std::vector<std::string> user_ids() const = 0;  // sorted
  virtual std::size_t size() const = 0;
};

class MemoryProfileStore : public ProfileStore {
 public:
  std::optional<UserProfile> get(const std::string& user_id) const override;
  void put(const UserProfile& profile) override;
  std::vector<std::string> user_ids() const override;
  std::size_t size() const override;

 private:
  mutable std::mutex mu_;
  std::map<std::string, UserProfile> profiles_;
};

// Durable store: `snapshot.txt` plus an append-only `journal.txt` of profile
// records; reopening replays the journal over the snapshot. compact()
// rewrites the snapshot and truncates the journal.
class FileProfileStore : public ProfileStore {
 public:
  explicit FileProfileStore(const std::string& dir);
  ~FileProfileStore() override;

  std::optional<UserProfile> get(const std::string& user_id) const override;
  void put(const UserProfile& profile) override;
  std::vector<std::string> user_ids() const override;
  std::size_t size() const override;
  void compact();

 private:
  std::string dir_;
  mutable std::mutex mu_;
  std::map<std::string, UserProfile> profiles_;  // in-memory image
  std::unique_ptr<std::ofstream> journal_;
};

std::string format_profile(const UserProfile& profile);
std::optional<UserProfile> parse_profile(const std::string& line);

struct PipelineOptions {
  int history_len = 50;        // N
  bool dedup_history = false;  // drop an earlier occurrence before appending
};

struct ReplayReport {
  std::int64_t lines = 0;
  std::int64_t impressions = 0;
  std::int64_t clicks = 0;
  std::int64_t accesses = 0;
  std::int64_t malformed = 0;
  std::int64_t unknown_articles = 0;
  std::int64_t unattributed = 0;  // events with no resolvable cluster
  std::vector<std::int64_t> malformed_line_numbers;  // first 100
  double wall_seconds = 0.0;
  double events_per_second = 0.0;
};

// Streaming profile maintenance: clicks push-and-trim history and refresh
// the user vector; accesses advance last_access_at monotonically. Optionally
// forwards impressions/clicks to a CtrAccumulator under a cluster resolver.
class EventPipeline {
 public:
  EventPipeline(ProfileStore& store, const ArticleIndex& articles, PipelineOptions opts = {});

  UserProfile handle_click(const BehaviorEvent& ev);
  UserProfile handle_access(const BehaviorEvent& ev);

  // resolver returns the cluster for a user, or nullopt to skip attribution.
  using ClusterResolver = std::function<std::optional<int>(const std::string& user_id)>;
  void attach_ctr(CtrAccumulator* ctr, ClusterResolver resolver);

  // Dispatches one already-parsed event (impressions only feed CTR).
  void dispatch(const BehaviorEvent& ev, ReplayReport& report);

  // Reads a log line-by-line; malformed lines are skipped and counted.
  ReplayReport replay(std::istream& log);

  std::int64_t unknown_article_count() const { return unknown_articles_; }

 private:
  ProfileStore& store_;
  const ArticleIndex& articles_;
  PipelineOptions opts_;
  CtrAccumulator* ctr_ = nullptr;
  ClusterResolver resolver_;
  std::int64_t unknown_articles_ = 0;
};

}  // namespace newsrec
