#include "newsrec/service.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "newsrec/events.hpp"
#include "newsrec/textio.hpp"

namespace newsrec {

namespace {

void append_json_string(std::string& out, const std::string& s) {
  out += '"';
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  out += '"';
}

}  // namespace

std::string RecommendResponse::to_json(bool include_timing) const {
  std::string out = "{\"items\":[";
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    out += "{\"article_id\":";
    append_json_string(out, items[i].article_id);
    out += ",\"score\":";
    out += fmt_double(items[i].score);
    if (items[i].breakdown) {
      out += ",\"decay_factor\":";
      out += fmt_double(items[i].breakdown->decay_factor);
      out += ",\"undamped\":";
      out += fmt_double(items[i].breakdown->undamped);
    }
    out += '}';
  }
  out += "],\"fallback\":";
  out += fallback ? "true" : "false";
  out += ",\"model_version\":";
  out += std::to_string(model_version);
  out += ",\"window_start\":";
  out += std::to_string(window_start);
  out += ",\"window_end\":";
  out += std::to_string(window_end);
  if (include_timing) {
    out += ",\"elapsed_ms\":";
    out += fmt_double(elapsed_ms);
  }
  out += '}';
  return out;
}

std::string IngestAck::to_json() const {
  std::string out = "{\"accepted\":";
  out += std::to_string(accepted);
  out += ",\"rejected\":";
  out += std::to_string(rejected);
  out += ",\"anomalies\":";
  out += std::to_string(anomalies);
  out += ",\"rejected_lines\":[";
  for (std::size_t i = 0; i < rejected_lines.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(rejected_lines[i]);
  }
  out += "]}";
  return out;
}

RecService::RecService(ProfileStore& store, const ArticleIndex& articles, const RunConfig& cfg)
    : store_(store),
      pipeline_(store, articles, PipelineOptions{cfg.history_len, false}),
      latency_us_buckets_(24, 0) {
  auto mode = decay_mode_from(cfg.decay_mode);
  if (!mode) throw std::invalid_argument("unknown decay mode: " + cfg.decay_mode);
  decay_ = DecayConfig{*mode, *mode == DecayMode::utdf ? cfg.t_utdf : cfg.t_tdf, cfg.sigma,
                       false};
  fallback_decay_ = DecayConfig{DecayMode::tdf, cfg.t_tdf, cfg.sigma, false};
  weight_opts_ = WeightOptions{cfg.weight_exponent, cfg.eps, cfg.nmf_soft};
  smoothing_ = Smoothing{cfg.smoothing_alpha, cfg.smoothing_beta};
  started_at_ = std::chrono::duration_cast<std::chrono::seconds>(
                    std::chrono::system_clock::now().time_since_epoch())
                    .count();
}

bool RecService::install(ServingSnapshot snapshot) {
  std::lock_guard<std::mutex> lock(snapshot_mu_);
  if (snapshot.ctr.model_version != snapshot.model.version ||
      snapshot.pool.model_version != snapshot.model.version) {
    degraded_ = true;
    ++refresh_rejects_;
    return false;
  }
  snapshot_ = std::make_shared<const ServingSnapshot>(std::move(snapshot));
  degraded_ = false;
  ++refreshes_;
  return true;
}

std::shared_ptr<const ServingSnapshot> RecService::snapshot() const {
  std::lock_guard<std::mutex> lock(snapshot_mu_);
  return snapshot_;
}

void RecService::record_latency(double elapsed_ms) {
  double us = elapsed_ms * 1000.0;
  std::size_t bucket = 0;
  while (bucket + 1 < latency_us_buckets_.size() && us >= static_cast<double>(1ULL << bucket))
    ++bucket;
  std::lock_guard<std::mutex> lock(stats_mu_);
  ++latency_us_buckets_[bucket];
}

RecommendResponse RecService::recommend(const std::string& user_id, int m, Timestamp now,
                                        bool with_breakdown) {
  auto t_begin = std::chrono::steady_clock::now();
  if (m <= 0) throw std::invalid_argument("m must be positive");
  auto snap = snapshot();
  if (!snap) throw std::runtime_error("no snapshot installed");

  auto profile = store_.get(user_id);
  {
    std::lock_guard<std::mutex> lock(stats_mu_);
    ++requests_;
    ++profile_fetches_;
  }

  RecommendResponse resp;
  resp.model_version = snap->model.version;
  resp.window_start = snap->ctr.window_start;
  resp.window_end = snap->ctr.window_end;

  bool served = false;
  if (profile) {
    const ClusterAssignment* assignment = nullptr;
    auto it = snap->model.assignments.find(user_id);
    if (it != snap->model.assignments.end()) assignment = &it->second;
    try {
      ClusterWeights weights =
          weights_for(snap->model, profile->vector, assignment, weight_opts_);
      resp.items =
          rank_pool(weights, snap->pool, decay_, profile->last_access_at, m, now, with_breakdown);
      served = true;
    } catch (const std::invalid_argument&) {
      // cold under this model (no vector / no affiliation): pooled fallback
    }
  }
  if (!served) {
    resp.items = rank_pool_fallback(snap->pool, fallback_decay_, m, now);
    resp.fallback = true;
    std::lock_guard<std::mutex> lock(stats_mu_);
    ++fallbacks_;
  }

  // The request itself is an access: scoring above used the previous access.
  BehaviorEvent access{EventKind::access, user_id, "", now, 0};
  {
    std::lock_guard<std::mutex> lock(ingest_mu_);
    pipeline_.handle_access(access);
  }

  resp.elapsed_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_begin)
          .count();
  record_latency(resp.elapsed_ms);
  return resp;
}

IngestAck RecService::ingest(const std::string& body) {
  IngestAck ack;
  std::istringstream in(body);
  std::string line;
  std::size_t line_no = 0;
  std::lock_guard<std::mutex> lock(ingest_mu_);
  std::int64_t anomalies_before = ctr_acc_ ? ctr_acc_->anomalies_total() : 0;
  ReplayReport report;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto ev = parse_event(line);
    if (!ev) {
      ++ack.rejected;
      if (ack.rejected_lines.size() < 100) ack.rejected_lines.push_back(line_no);
      continue;
    }
    pipeline_.dispatch(*ev, report);
    ++ack.accepted;
  }
  if (ctr_acc_) ack.anomalies = ctr_acc_->anomalies_total() - anomalies_before;
  {
    std::lock_guard<std::mutex> stats(stats_mu_);
    events_accepted_ += ack.accepted;
    events_rejected_ += ack.rejected;
  }
  return ack;
}

void RecService::attach_ctr(CtrAccumulator* acc, EventPipeline::ClusterResolver resolver) {
  std::lock_guard<std::mutex> lock(ingest_mu_);
  ctr_acc_ = acc;
  pipeline_.attach_ctr(acc, std::move(resolver));
}

std::string RecService::health_json(Timestamp now) const {
  std::shared_ptr<const ServingSnapshot> snap;
  bool degraded;
  {
    std::lock_guard<std::mutex> lock(snapshot_mu_);
    snap = snapshot_;
    degraded = degraded_;
  }
  std::string out = "{\"status\":";
  append_json_string(out, snap && !degraded ? "ok" : (snap ? "degraded" : "empty"));
  out += ",\"model_version\":";
  out += std::to_string(snap ? snap->model.version : 0);
  out += ",\"window_start\":";
  out += std::to_string(snap ? snap->ctr.window_start : 0);
  out += ",\"window_end\":";
  out += std::to_string(snap ? snap->ctr.window_end : 0);
  out += ",\"candidates\":";
  out += std::to_string(snap ? snap->pool.ids.size() : 0);
  out += ",\"loaded_at\":";
  out += std::to_string(snap ? snap->loaded_at : 0);
  out += ",\"now\":";
  out += std::to_string(now);
  out += ",\"started_at\":";
  out += std::to_string(started_at_);
  out += '}';
  return out;
}

std::string RecService::metrics_json() const {
  std::lock_guard<std::mutex> lock(stats_mu_);
  std::string out = "{\"requests\":";
  out += std::to_string(requests_);
  out += ",\"fallbacks\":";
  out += std::to_string(fallbacks_);
  out += ",\"profile_fetches\":";
  out += std::to_string(profile_fetches_);
  out += ",\"events_accepted\":";
  out += std::to_string(events_accepted_);
  out += ",\"events_rejected\":";
  out += std::to_string(events_rejected_);
  out += ",\"refreshes\":";
  out += std::to_string(refreshes_);
  out += ",\"refresh_rejects\":";
  out += std::to_string(refresh_rejects_);
  out += ",\"latency_us_buckets\":[";
  for (std::size_t i = 0; i < latency_us_buckets_.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(latency_us_buckets_[i]);
  }
  out += "]}";
  return out;
}

}  // namespace newsrec
