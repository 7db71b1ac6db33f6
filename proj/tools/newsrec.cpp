#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "newsrec/ab.hpp"
#include "newsrec/cluster.hpp"
#include "newsrec/config.hpp"
#include "newsrec/ctr.hpp"
#include "newsrec/datagen.hpp"
#include "newsrec/eval.hpp"
#include "newsrec/events.hpp"
#include "newsrec/http_server.hpp"
#include "newsrec/pipeline.hpp"
#include "newsrec/rng.hpp"
#include "newsrec/scorer.hpp"
#include "newsrec/service.hpp"
#include "newsrec/textio.hpp"
#include "newsrec/vecmath.hpp"

namespace {

using namespace newsrec;

// Configuration problems are usage errors (exit 2), unlike runtime failures.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonOpts {
  std::string config;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonOpts& c) {
  cmd->add_option("--config", c.config, "configuration file (JSON object of keys)");
  cmd->add_option("--seed", c.seed, "seed override")->each([&c](const std::string&) {
    c.seed_set = true;
  });
  cmd->add_option("overrides", c.overrides, "key=value configuration overrides");
}

RunConfig make_config(const CommonOpts& c) {
  RunConfig cfg;
  std::string path = c.config;
  if (path.empty()) {
    const char* env = std::getenv("RECS_CONFIG");
    if (env && *env) path = env;
  }
  try {
    if (!path.empty()) cfg = RunConfig::load(path);
    for (const auto& kv : c.overrides) {
      auto eq = kv.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("override must be key=value: " + kv);
      cfg.apply_override(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (c.seed_set) cfg.seed = c.seed;
    cfg.validate();
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  std::cerr << "# effective configuration\n" << cfg.banner();
  return cfg;
}

std::string events_path_for(const std::string& world_dir, const std::string& flag) {
  return flag.empty() ? world_dir + "/events.jsonl" : flag;
}

// Shared fitting input: profiles and click summaries from a log prefix.
struct FitInputs {
  MemoryProfileStore store;
  std::map<std::string, std::set<std::string>> click_sets;
  std::map<std::string, std::map<std::string, double>> click_counts;
  std::int64_t events = 0;
};

void replay_for_fit(const World& world, const std::string& events_file, Timestamp until,
                    int history_len, FitInputs& fit) {
  EventPipeline pipeline(fit.store, world.articles, PipelineOptions{history_len, false});
  std::ifstream in(events_file);
  if (!in) throw std::runtime_error("cannot open events: " + events_file);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto ev = parse_event(line);
    if (!ev) continue;
    if (until > 0 && ev->ts >= until) break;
    ++fit.events;
    if (ev->kind == EventKind::click) {
      pipeline.handle_click(*ev);
      fit.click_sets[ev->user_id].insert(ev->article_id);
      fit.click_counts[ev->user_id][ev->article_id] += 1.0;
    } else if (ev->kind == EventKind::access) {
      pipeline.handle_access(*ev);
    }
  }
}

int cmd_gen(const CommonOpts& common, const std::string& out_dir) {
  RunConfig cfg = make_config(common);
  std::filesystem::create_directories(out_dir);
  World world = generate_world(WorldSpec::from_config(cfg));
  world.save(out_dir);
  SimulationStats stats = simulate_logs(world, out_dir + "/events.jsonl");
  std::vector<HourSegment> segments = export_segments(world, out_dir + "/events.jsonl");
  save_segments(segments, out_dir + "/segments.jsonl");
  std::cout << "{\"users\":" << world.user_ids.size()
            << ",\"articles\":" << world.articles.all().size()
            << ",\"sessions\":" << stats.sessions << ",\"impressions\":" << stats.impressions
            << ",\"clicks\":" << stats.clicks << ",\"hours\":" << segments.size() << "}\n";
  return 0;
}

int cmd_cluster(const CommonOpts& common, const std::string& world_dir,
                const std::string& events_flag, const std::string& algo,
                const std::string& out_file, Timestamp until, std::uint64_t model_version) {
  RunConfig cfg = make_config(common);
  World world = World::load(world_dir);
  FitInputs fit;
  replay_for_fit(world, events_path_for(world_dir, events_flag), until, cfg.history_len, fit);

  ClusterModel model;
  if (algo == "kmeans") {
    std::vector<std::pair<std::string, Vec>> user_vectors;
    for (const auto& id : fit.store.user_ids()) {
      auto p = fit.store.get(id);
      if (p && p->vector) user_vectors.emplace_back(id, *p->vector);
    }
    KmeansOptions ko;
    ko.k = cfg.k;
    ko.seed = cfg.seed;
    ko.max_iters = cfg.kmeans_max_iters;
    ko.tol = cfg.kmeans_tol;
    model = kmeans_fit(user_vectors, ko);
  } else if (algo == "minhash") {
    model = minhash_fit(fit.click_sets, MinHashParams{cfg.minhash_num_hashes,
                                                      cfg.minhash_key_len, cfg.seed});
  } else if (algo == "nmf") {
    NmfOptions no;
    no.k = cfg.k;
    no.seed = cfg.seed;
    no.iters = cfg.nmf_iters;
    model = nmf_fit(ClickMatrix::from_counts(fit.click_counts), no);
  } else {
    throw UsageError("unknown algorithm: " + algo);
  }
  model.version = model_version;
  model.save(out_file);
  std::cout << "{\"algorithm\":\"" << algo << "\",\"clusters\":" << model.num_clusters
            << ",\"assignments\":" << model.assignments.size() << ",\"events\":" << fit.events
            << "}\n";
  return 0;
}

int cmd_aggregate(const CommonOpts& common, const std::string& world_dir,
                  const std::string& events_flag, const std::string& model_file,
                  const std::string& out_file, Timestamp until) {
  RunConfig cfg = make_config(common);
  World world = World::load(world_dir);
  ClusterModel model = ClusterModel::load(model_file);
  CtrAccumulator acc(world.spec.t0, cfg.window_len, cfg.merge_windows, model.num_clusters,
                     model.version);

  MemoryProfileStore store;
  EventPipeline pipeline(store, world.articles, PipelineOptions{cfg.history_len, false});
  std::map<std::string, std::set<std::string>> click_sets;
  std::map<std::string, std::map<std::string, double>> click_counts;
  std::map<std::string, int> affiliation;
  std::int64_t unattributed = 0;

  auto resolve = [&](const std::string& user) -> std::optional<int> {
    auto it = affiliation.find(user);
    if (it != affiliation.end()) return it->second;
    auto ma = model.assignments.find(user);
    if (ma != model.assignments.end()) {
      affiliation.emplace(user, ma->second.cluster);
      return ma->second.cluster;
    }
    try {
      ClusterAssignment a;
      switch (model.algorithm) {
        case ClusterAlgorithm::kmeans: {
          auto p = store.get(user);
          if (!p || !p->vector) return std::nullopt;
          a = assign(model, &*p->vector, nullptr, nullptr);
          break;
        }
        case ClusterAlgorithm::minhash: {
          auto cs = click_sets.find(user);
          if (cs == click_sets.end() || cs->second.empty()) return std::nullopt;
          a = assign(model, nullptr, &cs->second, nullptr);
          break;
        }
        case ClusterAlgorithm::nmf: {
          auto cc = click_counts.find(user);
          if (cc == click_counts.end() || cc->second.empty()) return std::nullopt;
          a = assign(model, nullptr, nullptr, &cc->second);
          break;
        }
      }
      affiliation.emplace(user, a.cluster);
      return a.cluster;
    } catch (const std::invalid_argument&) {
      return std::nullopt;
    }
  };

  std::ifstream in(events_path_for(world_dir, events_flag));
  if (!in) throw std::runtime_error("cannot open events");
  std::string line;
  Timestamp last_ts = world.spec.t0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto ev = parse_event(line);
    if (!ev) continue;
    if (until > 0 && ev->ts >= until) break;
    last_ts = std::max(last_ts, ev->ts);
    if (ev->kind != EventKind::access) {
      auto c = resolve(ev->user_id);
      if (c)
        acc.ingest(*ev, *c);
      else
        ++unattributed;
    }
    if (ev->kind == EventKind::click) {
      pipeline.handle_click(*ev);
      click_sets[ev->user_id].insert(ev->article_id);
      click_counts[ev->user_id][ev->article_id] += 1.0;
    } else if (ev->kind == EventKind::access) {
      pipeline.handle_access(*ev);
    }
  }
  Timestamp end = until > 0 ? until : last_ts + 1;
  acc.roll_until(end);
  if (end > acc.open_window().window_start) acc.roll_window(end);
  CtrTable merged = acc.merged();
  merged.save(out_file);
  std::cout << "{\"cells\":" << merged.cells.size() << ",\"window_start\":"
            << merged.window_start << ",\"window_end\":" << merged.window_end
            << ",\"anomalies\":" << merged.anomalies << ",\"unattributed\":" << unattributed
            << "}\n";
  return 0;
}

int cmd_eval(const CommonOpts& common, const std::string& world_dir,
             const std::string& events_flag, const std::string& segments_flag,
             const std::string& methods_spec, const std::string& mode,
             const std::string& out_file) {
  RunConfig cfg = make_config(common);
  World world = World::load(world_dir);
  std::string segments_path =
      segments_flag.empty() ? world_dir + "/segments.jsonl" : segments_flag;
  std::vector<HourSegment> segments = load_segments(segments_path);
  std::vector<EvalMethod> methods;
  std::vector<std::string> modes;
  try {
    methods = parse_methods(methods_spec);
    if (mode == "both")
      modes = {"all", "user"};
    else if (mode == "all" || mode == "user")
      modes = {mode};
    else
      throw std::invalid_argument("unknown mode: " + mode);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  EvalReport report = run_experiment(world, segments, events_path_for(world_dir, events_flag),
                                     methods, modes, EvalOptions::from_config(cfg));
  if (out_file.empty()) {
    std::cout << report.to_csv();
  } else {
    std::ofstream out(out_file);
    if (!out) throw std::runtime_error("cannot write " + out_file);
    out << report.to_csv();
  }
  std::cerr << report.summary();
  std::cerr << "evaluated user-hours: " << report.evaluated_users
            << "  excluded (no vector): " << report.excluded_users
            << "  wall: " << report.wall_seconds << "s\n";
  return 0;
}

int cmd_ab(const CommonOpts& common, const std::string& world_dir,
           const std::string& events_flag, const std::string& arms_spec,
           std::uint64_t assignment_seed, bool assignment_seed_set,
           const std::string& out_file) {
  RunConfig cfg = make_config(common);
  World world = World::load(world_dir);
  std::vector<std::string> arms;
  {
    std::istringstream ss(arms_spec);
    std::string a;
    while (std::getline(ss, a, ',')) {
      if (!a.empty()) arms.push_back(a);
    }
  }
  if (!assignment_seed_set) assignment_seed = cfg.seed;
  AbReport report = ab_replay(world, events_path_for(world_dir, events_flag), arms,
                              assignment_seed, AbOptions::from_config(cfg));
  if (out_file.empty()) {
    std::cout << report.to_csv();
  } else {
    std::ofstream out(out_file);
    if (!out) throw std::runtime_error("cannot write " + out_file);
    out << report.to_csv();
  }
  std::cerr << report.summary();
  std::cerr << "warmup sessions: " << report.warmup_sessions
            << "  background sessions: " << report.background_sessions
            << "  wall: " << report.wall_seconds << "s\n";
  return 0;
}

int cmd_replay(const CommonOpts& common, const std::string& world_dir,
               const std::string& events_file, const std::string& store_dir) {
  RunConfig cfg = make_config(common);
  World world = World::load(world_dir);
  std::unique_ptr<ProfileStore> owned;
  if (store_dir.empty()) {
    owned = std::make_unique<MemoryProfileStore>();
  } else {
    owned = std::make_unique<FileProfileStore>(store_dir);
  }
  EventPipeline pipeline(*owned, world.articles, PipelineOptions{cfg.history_len, false});
  std::ifstream in(events_file);
  if (!in) throw std::runtime_error("cannot open events: " + events_file);
  ReplayReport report = pipeline.replay(in);
  if (auto* file_store = dynamic_cast<FileProfileStore*>(owned.get()))
    file_store->compact();
  std::cout << "{\"lines\":" << report.lines << ",\"impressions\":" << report.impressions
            << ",\"clicks\":" << report.clicks << ",\"accesses\":" << report.accesses
            << ",\"malformed\":" << report.malformed
            << ",\"unknown_articles\":" << report.unknown_articles
            << ",\"unattributed\":" << report.unattributed
            << ",\"users\":" << owned->size()
            << ",\"events_per_second\":" << fmt_double(report.events_per_second) << "}\n";
  return 0;
}

int cmd_serve(const CommonOpts& common, const std::string& world_dir,
              const std::string& model_file, const std::string& ctr_file,
              const std::string& store_dir, const std::string& listen_flag, Timestamp now_flag,
              const std::string& preload_events) {
  RunConfig cfg = make_config(common);
  World world = World::load(world_dir);
  ClusterModel model = ClusterModel::load(model_file);
  CtrTable table = CtrTable::load(ctr_file);

  std::unique_ptr<ProfileStore> owned;
  if (store_dir.empty()) {
    owned = std::make_unique<MemoryProfileStore>();
  } else {
    owned = std::make_unique<FileProfileStore>(store_dir);
  }
  RecService service(*owned, world.articles, cfg);

  Timestamp now = now_flag != 0 ? now_flag : static_cast<Timestamp>(std::time(nullptr));
  ServingSnapshot snap;
  snap.model = std::move(model);
  snap.pool = build_pool(world.articles.all(), table, now, cfg.candidate_horizon,
                         Smoothing{cfg.smoothing_alpha, cfg.smoothing_beta});
  snap.ctr = std::move(table);
  snap.loaded_at = now;
  if (!service.install(std::move(snap)))
    throw std::runtime_error("snapshot version mismatch between model and CTR table");

  if (!preload_events.empty()) {
    std::ifstream in(preload_events);
    if (!in) throw std::runtime_error("cannot open events: " + preload_events);
    std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    IngestAck ack = service.ingest(body);
    std::cerr << "preloaded events: " << ack.to_json() << "\n";
  }

  std::string listen = listen_flag.empty() ? cfg.listen : listen_flag;
  auto [host, port] = parse_listen(listen);
  HttpServer server(service, host, port);
  if (!server.start()) throw std::runtime_error("cannot bind " + listen);
  std::cerr << "listening on " << host << ":" << server.port() << "\n";

  static std::atomic<bool> stop_flag{false};
  std::signal(SIGINT, [](int) { stop_flag.store(true); });
  std::signal(SIGTERM, [](int) { stop_flag.store(true); });
  while (!stop_flag.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  std::cerr << "stopped\n";
  return 0;
}

int cmd_bench(const CommonOpts& common, int candidates, int requests, int users, int m,
              const std::string& out_file) {
  RunConfig cfg = make_config(common);
  const Timestamp now = 1700000000;
  Rng rng(hash_combine(cfg.seed, 0x62656e63686d6b31ULL));

  ArticleIndex articles;
  CtrTable table;
  table.model_version = 1;
  table.num_clusters = cfg.k;
  table.window_start = now - cfg.candidate_horizon;
  table.window_end = now;
  char idbuf[32];
  for (int i = 0; i < candidates; ++i) {
    std::snprintf(idbuf, sizeof(idbuf), "b%06d", i);
    ArticleRecord a;
    a.article_id = idbuf;
    a.published_at = now - 1 - static_cast<Timestamp>(rng.below(
                                   static_cast<std::uint64_t>(cfg.candidate_horizon - 1)));
    articles.add(a);
    int touched = 1 + static_cast<int>(rng.below(4));
    for (int t = 0; t < touched; ++t) {
      int cluster = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.k)));
      auto& cell = table.cells[{cluster, a.article_id}];
      cell.impressions += 1 + static_cast<std::int64_t>(rng.below(400));
      cell.clicks += static_cast<std::int64_t>(rng.below(
          static_cast<std::uint64_t>(cell.impressions / 5 + 1)));
    }
  }

  ClusterModel model;
  model.algorithm = ClusterAlgorithm::kmeans;
  model.num_clusters = cfg.k;
  model.dim = static_cast<std::size_t>(cfg.d);
  model.version = 1;
  for (int c = 0; c < cfg.k; ++c) {
    Vec v(static_cast<std::size_t>(cfg.d));
    for (auto& x : v) x = rng.normal();
    auto unit = normalized(v);
    model.centroids.push_back(unit ? *unit : Vec(static_cast<std::size_t>(cfg.d), 0.0));
  }

  MemoryProfileStore store;
  std::vector<std::string> user_ids;
  for (int u = 0; u < users; ++u) {
    std::snprintf(idbuf, sizeof(idbuf), "bu%05d", u);
    UserProfile p;
    p.user_id = idbuf;
    Vec v(static_cast<std::size_t>(cfg.d));
    for (auto& x : v) x = rng.normal();
    auto unit = normalized(v);
    p.vector = unit ? *unit : Vec(static_cast<std::size_t>(cfg.d), 0.0);
    p.last_access_at = now - 600 - static_cast<Timestamp>(rng.below(7 * 86400));
    store.put(p);
    user_ids.push_back(p.user_id);
  }

  RecService service(store, articles, cfg);
  ServingSnapshot snap;
  snap.model = std::move(model);
  snap.pool = build_pool(articles.all(), table, now, cfg.candidate_horizon,
                         Smoothing{cfg.smoothing_alpha, cfg.smoothing_beta});
  snap.ctr = std::move(table);
  snap.loaded_at = now;
  const std::size_t pool_size = snap.pool.ids.size();
  if (!service.install(std::move(snap))) throw std::runtime_error("bench snapshot rejected");

  const int warmup = std::min(requests, 1000);
  for (int i = 0; i < warmup; ++i)
    service.recommend(user_ids[static_cast<std::size_t>(i) % user_ids.size()], m, now);

  std::vector<double> lat(static_cast<std::size_t>(requests));
  for (int i = 0; i < requests; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    RecommendResponse r =
        service.recommend(user_ids[static_cast<std::size_t>(i) % user_ids.size()], m, now);
    lat[static_cast<std::size_t>(i)] =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    if (r.items.empty()) throw std::runtime_error("bench served an empty list");
  }
  std::sort(lat.begin(), lat.end());
  auto pct = [&](double q) {
    std::size_t idx = static_cast<std::size_t>(q * (static_cast<double>(lat.size()) - 1.0));
    return lat[idx];
  };
  double mean = 0.0;
  for (double v : lat) mean += v;
  mean /= static_cast<double>(lat.size());
  std::string json = "{\"requests\":" + std::to_string(requests) +
                     ",\"candidates\":" + std::to_string(candidates) +
                     ",\"pool\":" + std::to_string(pool_size) +
                     ",\"p50_ms\":" + fmt_double(pct(0.50)) +
                     ",\"p90_ms\":" + fmt_double(pct(0.90)) +
                     ",\"p99_ms\":" + fmt_double(pct(0.99)) +
                     ",\"max_ms\":" + fmt_double(lat.back()) +
                     ",\"mean_ms\":" + fmt_double(mean) + "}";
  std::cout << json << "\n";
  if (!out_file.empty()) {
    std::ofstream out(out_file);
    if (!out) throw std::runtime_error("cannot write " + out_file);
    out << json << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"immediate personalized news recommendation toolkit"};
  app.require_subcommand(1);

  CommonOpts common;

  auto* gen = app.add_subcommand("gen", "generate a synthetic world and behavior log");
  std::string gen_out;
  gen->add_option("--out", gen_out, "output directory")->required();
  add_common(gen, common);

  auto* cluster = app.add_subcommand("cluster", "fit a user clustering from a log");
  std::string cl_world, cl_events, cl_algo = "kmeans", cl_out;
  Timestamp cl_until = 0;
  std::uint64_t cl_version = 1;
  cluster->add_option("--world", cl_world, "world directory")->required();
  cluster->add_option("--events", cl_events, "events file (default <world>/events.jsonl)");
  cluster->add_option("--algo", cl_algo, "kmeans | minhash | nmf");
  cluster->add_option("--out", cl_out, "model file")->required();
  cluster->add_option("--until", cl_until, "fit on events strictly before this timestamp");
  cluster->add_option("--model-version", cl_version, "version stamp for the model");
  add_common(cluster, common);

  auto* aggregate = app.add_subcommand("aggregate", "build a merged CTR snapshot from a log");
  std::string ag_world, ag_events, ag_model, ag_out;
  Timestamp ag_until = 0;
  aggregate->add_option("--world", ag_world, "world directory")->required();
  aggregate->add_option("--events", ag_events, "events file (default <world>/events.jsonl)");
  aggregate->add_option("--model", ag_model, "cluster model file")->required();
  aggregate->add_option("--out", ag_out, "snapshot file")->required();
  aggregate->add_option("--until", ag_until, "ingest events strictly before this timestamp");
  add_common(aggregate, common);

  auto* eval = app.add_subcommand("eval", "offline ranking experiments over a log");
  std::string ev_world, ev_events, ev_segments, ev_methods = "all", ev_mode = "both", ev_out;
  eval->add_option("--world", ev_world, "world directory")->required();
  eval->add_option("--events", ev_events, "events file (default <world>/events.jsonl)");
  eval->add_option("--segments", ev_segments, "segments file (default <world>/segments.jsonl)");
  eval->add_option("--methods", ev_methods, "all or comma-separated method names");
  eval->add_option("--mode", ev_mode, "all | user | both");
  eval->add_option("--out", ev_out, "report CSV (default stdout)");
  add_common(eval, common);

  auto* ab = app.add_subcommand("ab", "counterfactual arm comparison over a log");
  std::string ab_world, ab_events, ab_arms = "control,tdf,utdf", ab_out;
  std::uint64_t ab_seed = 0;
  bool ab_seed_set = false;
  ab->add_option("--world", ab_world, "world directory")->required();
  ab->add_option("--events", ab_events, "events file (default <world>/events.jsonl)");
  ab->add_option("--arms", ab_arms, "comma-separated arm descriptors");
  ab->add_option("--assignment-seed", ab_seed, "user-split seed (default: config seed)")
      ->each([&ab_seed_set](const std::string&) { ab_seed_set = true; });
  ab->add_option("--out", ab_out, "report CSV (default stdout)");
  add_common(ab, common);

  auto* replay = app.add_subcommand("replay", "stream a log into a profile store");
  std::string rp_world, rp_events, rp_store;
  replay->add_option("--world", rp_world, "world directory")->required();
  replay->add_option("--events", rp_events, "events file")->required();
  replay->add_option("--store", rp_store, "persistent store directory (default: in-memory)");
  add_common(replay, common);

  auto* serve = app.add_subcommand("serve", "run the recommendation service");
  std::string sv_world, sv_model, sv_ctr, sv_store, sv_listen, sv_preload;
  Timestamp sv_now = 0;
  serve->add_option("--world", sv_world, "world directory")->required();
  serve->add_option("--model", sv_model, "cluster model file")->required();
  serve->add_option("--ctr", sv_ctr, "CTR snapshot file")->required();
  serve->add_option("--store", sv_store, "persistent store directory (default: in-memory)");
  serve->add_option("--listen", sv_listen, "host:port (default from config)");
  serve->add_option("--now", sv_now, "fixed serving time (default: wall clock)");
  serve->add_option("--preload", sv_preload, "events file to ingest before listening");
  add_common(serve, common);

  auto* bench = app.add_subcommand("bench", "request latency benchmark");
  int bn_candidates = 10000, bn_requests = 10000, bn_users = 1000, bn_m = 20;
  std::string bn_out;
  bench->add_option("--candidates", bn_candidates, "candidate pool size");
  bench->add_option("--requests", bn_requests, "measured requests");
  bench->add_option("--users", bn_users, "distinct users");
  bench->add_option("--m", bn_m, "list length");
  bench->add_option("--out", bn_out, "write the result JSON here too");
  add_common(bench, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen(common, gen_out);
    if (cluster->parsed())
      return cmd_cluster(common, cl_world, cl_events, cl_algo, cl_out, cl_until, cl_version);
    if (aggregate->parsed())
      return cmd_aggregate(common, ag_world, ag_events, ag_model, ag_out, ag_until);
    if (eval->parsed())
      return cmd_eval(common, ev_world, ev_events, ev_segments, ev_methods, ev_mode, ev_out);
    if (ab->parsed())
      return cmd_ab(common, ab_world, ab_events, ab_arms, ab_seed, ab_seed_set, ab_out);
    if (replay->parsed()) return cmd_replay(common, rp_world, rp_events, rp_store);
    if (serve->parsed())
      return cmd_serve(common, sv_world, sv_model, sv_ctr, sv_store, sv_listen, sv_now,
                       sv_preload);
    if (bench->parsed())
      return cmd_bench(common, bn_candidates, bn_requests, bn_users, bn_m, bn_out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
