#include "newsrec/ctr.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace newsrec {

const CtrCell* CtrTable::find(int cluster, const std::string& article_id) const {
  auto it = cells.find({cluster, article_id});
  return it == cells.end() ? nullptr : &it->second;
}

double CtrTable::ctr(int cluster, const std::string& article_id, Smoothing s) const {
  const CtrCell* cell = find(cluster, article_id);
  if (!cell) return 0.0;  // smoothing regularizes observed cells, not absence
  double impressions = static_cast<double>(cell->impressions) + s.beta;
  if (impressions <= 0.0) return 0.0;
  return (static_cast<double>(cell->clicks) + s.alpha) / impressions;
}

std::int64_t CtrTable::clicks(int cluster, const std::string& article_id) const {
  const CtrCell* cell = find(cluster, article_id);
  return cell ? cell->clicks : 0;
}

void CtrTable::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write ctr snapshot: " + path);
  out << "newsrec-ctr-snapshot v1\n";
  out << "window " << window_start << ' ' << window_end << "\n";
  out << "model_version " << model_version << "\n";
  out << "clusters " << num_clusters << "\n";
  out << "anomalies " << anomalies << "\n";
  out << "cells " << cells.size() << "\n";
  for (const auto& [key, cell] : cells)
    out << key.first << ' ' << key.second << ' ' << cell.impressions << ' ' << cell.clicks
        << '\n';
}

CtrTable CtrTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open ctr snapshot: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "newsrec-ctr-snapshot v1")
    throw std::runtime_error("bad ctr snapshot header");
  CtrTable t;
  std::string word;
  std::size_t n = 0;
  auto next = [&](const char* what) {
    if (!std::getline(in, line)) throw std::runtime_error(std::string("truncated at ") + what);
    return std::istringstream(line);
  };
  {
    auto ss = next("window");
    ss >> word >> t.window_start >> t.window_end;
  }
  {
    auto ss = next("model_version");
    ss >> word >> t.model_version;
  }
  {
    auto ss = next("clusters");
    ss >> word >> t.num_clusters;
  }
  {
    auto ss = next("anomalies");
    ss >> word >> t.anomalies;
  }
  {
    auto ss = next("cells");
    ss >> word >> n;
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto ss = next("cell row");
    int cluster = 0;
    std::string article;
    CtrCell cell;
    ss >> cluster >> article >> cell.impressions >> cell.clicks;
    t.cells.emplace(std::make_pair(cluster, std::move(article)), cell);
  }
  return t;
}

CtrAccumulator::CtrAccumulator(Timestamp start, Timestamp window_len, int merge_windows,
                               int num_clusters, std::uint64_t model_version)
    : window_len_(window_len), merge_windows_(static_cast<std::size_t>(merge_windows)) {
  if (window_len <= 0) throw std::invalid_argument("window_len must be positive");
  if (merge_windows <= 0) throw std::invalid_argument("merge_windows must be positive");
  open_.window_start = start;
  open_.window_end = start;
  open_.num_clusters = num_clusters;
  open_.model_version = model_version;
}

void CtrAccumulator::record(const BehaviorEvent& ev, int cluster) {
  if (ev.kind == EventKind::access) return;
  if (cluster < 0 || cluster >= open_.num_clusters)
    throw std::invalid_argument("unknown cluster");
  CtrCell& cell = open_.cells[{cluster, ev.article_id}];
  if (ev.kind == EventKind::impression) {
    ++cell.impressions;
  } else {
    if (cell.impressions == 0) {
      ++open_.anomalies;
      ++anomalies_total_;
    }
    ++cell.clicks;
  }
}

void CtrAccumulator::ingest(const BehaviorEvent& ev, int cluster) {
  roll_until(ev.ts);
  record(ev, cluster);
}

CtrTable CtrAccumulator::roll_window(Timestamp now) {
  CtrTable frozen = std::move(open_);
  frozen.window_end = now;
  open_ = CtrTable{};
  open_.window_start = now;
  open_.window_end = now;
  open_.num_clusters = frozen.num_clusters;
  open_.model_version = frozen.model_version;
  frozen_.push_back(frozen);
  while (frozen_.size() > merge_windows_) frozen_.pop_front();
  return frozen;
}

void CtrAccumulator::roll_until(Timestamp now) {
  while (now >= open_end()) roll_window(open_end());
}

CtrTable CtrAccumulator::merged() const {
  CtrTable out;
  out.num_clusters = open_.num_clusters;
  out.model_version = open_.model_version;
  bool first = true;
  for (const auto& w : frozen_) {
    if (first) {
      out.window_start = w.window_start;
      out.window_end = w.window_end;
      first = false;
    } else {
      out.window_start = std::min(out.window_start, w.window_start);
      out.window_end = std::max(out.window_end, w.window_end);
    }
    out.anomalies += w.anomalies;
    for (const auto& [key, cell] : w.cells) {
      CtrCell& acc = out.cells[key];
      acc.impressions += cell.impressions;
      acc.clicks += cell.clicks;
    }
  }
  if (first) {
    out.window_start = open_.window_start;
    out.window_end = open_.window_start;
  }
  return out;
}

}  // namespace newsrec
