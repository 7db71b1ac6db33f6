#include "newsrec/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "newsrec/textio.hpp"

namespace newsrec {

void ArticleIndex::add(ArticleRecord article) {
  auto [it, inserted] = by_id_.emplace(article.article_id, articles_.size());
  if (!inserted) {
    articles_[it->second] = std::move(article);
    return;
  }
  articles_.push_back(std::move(article));
}

const ArticleRecord* ArticleIndex::find(const std::string& article_id) const {
  auto it = by_id_.find(article_id);
  return it == by_id_.end() ? nullptr : &articles_[it->second];
}

ArticleIndex ArticleIndex::load(const std::string& path, const EmbeddingTable& emb,
                                const IdfTable& idf) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open article file: " + path);
  ArticleIndex index;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    ArticleRecord a;
    if (!(ss >> a.article_id >> a.published_at))
      throw std::runtime_error("bad article line: " + line);
    std::string tok;
    while (ss >> tok) a.tokens.push_back(std::move(tok));
    a.vector = article_vector(a.tokens, emb, idf);
    index.add(std::move(a));
  }
  return index;
}

void ArticleIndex::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write article file: " + path);
  for (const auto& a : articles_) {
    out << a.article_id << ' ' << a.published_at;
    for (const auto& tok : a.tokens) out << ' ' << tok;
    out << '\n';
  }
}

std::optional<UserProfile> MemoryProfileStore::get(const std::string& user_id) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = profiles_.find(user_id);
  if (it == profiles_.end()) return std::nullopt;
  return it->second;
}

void MemoryProfileStore::put(const UserProfile& profile) {
  std::lock_guard<std::mutex> lock(mu_);
  profiles_[profile.user_id] = profile;
}

std::vector<std::string> MemoryProfileStore::user_ids() const {
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<std::string> ids;
  ids.reserve(profiles_.size());
  for (const auto& [id, _] : profiles_) ids.push_back(id);
  return ids;
}

std::size_t MemoryProfileStore::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return profiles_.size();
}

namespace {

void append_json_string(std::string& out, const std::string& s) {
  out.push_back('"');
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out.push_back(c);
    }
  }
  out.push_back('"');
}

}  // namespace

std::string format_profile(const UserProfile& profile) {
  std::string out;
  out.reserve(160);
  out += "{\"user_id\":";
  append_json_string(out, profile.user_id);
  out += ",\"history\":[";
  for (std::size_t i = 0; i < profile.history.size(); ++i) {
    if (i) out.push_back(',');
    append_json_string(out, profile.history[i]);
  }
  out += "]";
  if (profile.vector) {
    out += ",\"vector\":[";
    for (std::size_t i = 0; i < profile.vector->size(); ++i) {
      if (i) out.push_back(',');
      out += fmt_double((*profile.vector)[i]);
    }
    out += "]";
  }
  if (profile.last_access_at) {
    out += ",\"last_access_at\":";
    out += std::to_string(*profile.last_access_at);
  }
  out += "}";
  return out;
}

std::optional<UserProfile> parse_profile(const std::string& line) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  auto user_it = j.find("user_id");
  if (user_it == j.end() || !user_it->is_string()) return std::nullopt;
  UserProfile p;
  p.user_id = user_it->get<std::string>();
  auto hist_it = j.find("history");
  if (hist_it != j.end() && hist_it->is_array()) {
    for (const auto& item : *hist_it) {
      if (!item.is_string()) return std::nullopt;
      p.history.push_back(item.get<std::string>());
    }
  }
  auto vec_it = j.find("vector");
  if (vec_it != j.end() && vec_it->is_array()) {
    Vec v;
    v.reserve(vec_it->size());
    for (const auto& item : *vec_it) {
      if (!item.is_number()) return std::nullopt;
      v.push_back(item.get<double>());
    }
    p.vector = std::move(v);
  }
  auto acc_it = j.find("last_access_at");
  if (acc_it != j.end() && acc_it->is_number_integer()) p.last_access_at = acc_it->get<Timestamp>();
  return p;
}

FileProfileStore::FileProfileStore(const std::string& dir) : dir_(dir) {
  std::filesystem::create_directories(dir_);
  auto load_file = [&](const std::string& path) {
    std::ifstream in(path);
    if (!in) return;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto p = parse_profile(line);
      if (!p) throw std::runtime_error("corrupt profile record in " + path);
      profiles_[p->user_id] = std::move(*p);
    }
  };
  load_file(dir_ + "/snapshot.txt");
  load_file(dir_ + "/journal.txt");
  journal_ = std::make_unique<std::ofstream>(dir_ + "/journal.txt", std::ios::app);
  if (!*journal_) throw std::runtime_error("cannot open journal in " + dir_);
}

FileProfileStore::~FileProfileStore() = default;

std::optional<UserProfile> FileProfileStore::get(const std::string& user_id) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = profiles_.find(user_id);
  if (it == profiles_.end()) return std::nullopt;
  return it->second;
}

void FileProfileStore::put(const UserProfile& profile) {
  std::lock_guard<std::mutex> lock(mu_);
  profiles_[profile.user_id] = profile;
  *journal_ << format_profile(profile) << '\n';
  journal_->flush();
}

std::vector<std::string> FileProfileStore::user_ids() const {
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<std::string> ids;
  ids.reserve(profiles_.size());
  for (const auto& [id, _] : profiles_) ids.push_back(id);
  return ids;
}

std::size_t FileProfileStore::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return profiles_.size();
}

void FileProfileStore::compact() {
  std::lock_guard<std::mutex> lock(mu_);
  const std::string tmp = dir_ + "/snapshot.tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write snapshot in " + dir_);
    for (const auto& [_, p] : profiles_) out << format_profile(p) << '\n';
  }
  std::filesystem::rename(tmp, dir_ + "/snapshot.txt");
  journal_ = std::make_unique<std::ofstream>(dir_ + "/journal.txt", std::ios::trunc);
  if (!*journal_) throw std::runtime_error("cannot reopen journal in " + dir_);
}

EventPipeline::EventPipeline(ProfileStore& store, const ArticleIndex& articles,
                             PipelineOptions opts)
    : store_(store), articles_(articles), opts_(opts) {}

void EventPipeline::attach_ctr(CtrAccumulator* ctr, ClusterResolver resolver) {
  ctr_ = ctr;
  resolver_ = std::move(resolver);
}

UserProfile EventPipeline::handle_click(const BehaviorEvent& ev) {
  UserProfile profile = store_.get(ev.user_id).value_or(UserProfile{ev.user_id, {}, {}, {}});
  if (opts_.dedup_history) {
    auto it = std::find(profile.history.begin(), profile.history.end(), ev.article_id);
    if (it != profile.history.end()) profile.history.erase(it);
  }
  profile.history.push_back(ev.article_id);
  while (profile.history.size() > static_cast<std::size_t>(opts_.history_len))
    profile.history.erase(profile.history.begin());

  std::vector<const Vec*> vectors;
  vectors.reserve(profile.history.size());
  bool any_unknown = false;
  for (const auto& id : profile.history) {
    const ArticleRecord* a = articles_.find(id);
    if (!a) {
      any_unknown = true;
      continue;
    }
    if (a->vector) vectors.push_back(&*a->vector);
  }
  if (any_unknown) ++unknown_articles_;
  profile.vector = user_vector(vectors);
  if (!profile.last_access_at || ev.ts > *profile.last_access_at) profile.last_access_at = ev.ts;
  store_.put(profile);
  return profile;
}

UserProfile EventPipeline::handle_access(const BehaviorEvent& ev) {
  UserProfile profile = store_.get(ev.user_id).value_or(UserProfile{ev.user_id, {}, {}, {}});
  if (!profile.last_access_at || ev.ts > *profile.last_access_at) profile.last_access_at = ev.ts;
  store_.put(profile);
  return profile;
}

void EventPipeline::dispatch(const BehaviorEvent& ev, ReplayReport& report) {
  switch (ev.kind) {
    case EventKind::impression:
      ++report.impressions;
      break;
    case EventKind::click:
      ++report.clicks;
      handle_click(ev);
      break;
    case EventKind::access:
      ++report.accesses;
      handle_access(ev);
      break;
  }
  if (ctr_ && ev.kind != EventKind::access) {
    std::optional<int> cluster = resolver_ ? resolver_(ev.user_id) : std::nullopt;
    if (cluster) {
      ctr_->ingest(ev, *cluster);
    } else {
      ++report.unattributed;
    }
  }
}

ReplayReport EventPipeline::replay(std::istream& log) {
  ReplayReport report;
  auto start = std::chrono::steady_clock::now();
  std::string line;
  while (std::getline(log, line)) {
    ++report.lines;
    if (line.empty()) continue;
    auto ev = parse_event(line);
    if (!ev) {
      ++report.malformed;
      if (report.malformed_line_numbers.size() < 100)
        report.malformed_line_numbers.push_back(report.lines);
      continue;
    }
    dispatch(*ev, report);
  }
  report.unknown_articles = unknown_articles_;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::int64_t handled = report.impressions + report.clicks + report.accesses;
  report.events_per_second =
      report.wall_seconds > 0.0 ? static_cast<double>(handled) / report.wall_seconds : 0.0;
  return report;
}

}  // namespace newsrec
