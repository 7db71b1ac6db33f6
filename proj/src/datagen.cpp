#include "newsrec/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "newsrec/rng.hpp"
#include "newsrec/textio.hpp"
#include "newsrec/vecmath.hpp"

namespace newsrec {

namespace {

// Fixed stream salts keep every random draw independent of code-path order.
constexpr std::uint64_t kSaltTopics = 0x746f706963736131ULL;
constexpr std::uint64_t kSaltWords = 0x776f726473313233ULL;
constexpr std::uint64_t kSaltArticles = 0x61727469636c6573ULL;
constexpr std::uint64_t kSaltUsers = 0x7573657273707265ULL;
constexpr std::uint64_t kSaltVisits = 0x7669736974726174ULL;
constexpr std::uint64_t kSaltPolicy = 0x706f6c6963796e6fULL;
constexpr std::uint64_t kSaltClicks = 0x636c69636b647277ULL;
constexpr std::uint64_t kSaltTrends = 0x7472656e64777633ULL;

std::string article_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "a%05d", i);
  return buf;
}

std::string user_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "u%04d", i);
  return buf;
}

Vec random_unit(Rng& rng, int d) {
  for (;;) {
    Vec v(d);
    for (auto& x : v) x = rng.normal();
    if (auto n = normalized(v)) return *n;
  }
}

double stateless_unit(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
  return u64_to_unit(splitmix64(hash_combine(hash_combine(hash_combine(a, b), c), d)));
}

// Wave tables are a pure function of the spec, shared by generation and load.
void init_trends(World& world) {
  const WorldSpec& spec = world.spec;
  world.trend_freq.assign(static_cast<std::size_t>(spec.num_topics), 0.0);
  world.trend_phase.assign(static_cast<std::size_t>(spec.num_topics), 0.0);
  if (spec.trend_period <= 0) return;
  Rng rng(hash_combine(spec.seed, kSaltTrends));
  constexpr double kTau = 6.283185307179586;
  for (int t = 0; t < spec.num_topics; ++t) {
    double period = static_cast<double>(spec.trend_period) * (0.7 + 0.9 * rng.uniform());
    world.trend_freq[static_cast<std::size_t>(t)] = kTau / period;
    world.trend_phase[static_cast<std::size_t>(t)] = kTau * rng.uniform();
  }
}

}  // namespace

WorldSpec WorldSpec::from_config(const RunConfig& cfg) {
  WorldSpec s;
  s.seed = cfg.seed;
  s.num_topics = cfg.num_topics;
  s.vocab_size = cfg.vocab_size;
  s.d = cfg.d;
  s.num_users = cfg.num_users;
  s.num_articles = cfg.num_articles;
  s.days = cfg.days;
  s.word_noise = cfg.word_noise;
  s.tokens_min = cfg.tokens_min;
  s.tokens_max = cfg.tokens_max;
  s.visit_mu = cfg.visit_mu;
  s.visit_sigma = cfg.visit_sigma;
  s.pref_alpha = cfg.pref_alpha;
  s.affinity_weight = cfg.affinity_weight;
  s.freshness_half_life = cfg.freshness_half_life;
  s.base_rate = cfg.base_rate;
  s.policy_noise = cfg.policy_noise;
  s.slate_size = cfg.slate_size;
  s.trend_amp = cfg.trend_amp;
  s.trend_period = cfg.trend_period;
  s.horizon = cfg.candidate_horizon;
  s.t0 = cfg.world_start;
  return s;
}

Vec World::trend_shift(std::size_t user_idx, Timestamp at) const {
  Vec shift(static_cast<std::size_t>(spec.d), 0.0);
  if (spec.trend_amp <= 0.0 || spec.trend_period <= 0) return shift;
  double t = static_cast<double>(at - spec.t0);
  const auto& mix = user_mix[user_idx];
  for (std::size_t k = 0; k < topic_vectors.size(); ++k) {
    double wave = std::sin(trend_freq[k] * t + trend_phase[k]);
    if (wave <= 0.0) continue;
    // sqrt damping lets a surge on a secondary interest overtake the main
    // one: breaking themes pull hardest on readers who merely dabble in them.
    add_into(shift, topic_vectors[k], spec.trend_amp * std::sqrt(mix[k]) * wave * wave);
  }
  return shift;
}

double World::click_probability(std::size_t user_idx, std::size_t article_idx,
                                Timestamp at) const {
  const ArticleRecord& a = articles.all()[article_idx];
  double affinity = 0.0;
  if (a.vector) {
    if (spec.trend_amp > 0.0 && spec.trend_period > 0) {
      Vec pref = trend_shift(user_idx, at);
      add_into(pref, user_pref[user_idx], 1.0);
      auto unit = normalized(pref);
      affinity = unit ? dot(*unit, *a.vector) : 0.0;
    } else {
      affinity = dot(user_pref[user_idx], *a.vector);
    }
  }
  double factor = 2.0 / (1.0 + std::exp(-spec.affinity_weight * affinity));
  double age = std::max<double>(0.0, static_cast<double>(at - a.published_at));
  double p = spec.base_rate * factor * std::exp(-age / spec.freshness_half_life);
  return std::min(1.0, std::max(0.0, p));
}

bool World::click_draw(std::size_t user_idx, std::size_t article_idx, std::int64_t ordinal,
                       Timestamp at) const {
  double unit = stateless_unit(hash_combine(spec.seed, kSaltClicks), user_idx, article_idx,
                               static_cast<std::uint64_t>(ordinal));
  return unit < click_probability(user_idx, article_idx, at);
}

std::pair<std::size_t, std::size_t> World::live_range(Timestamp at) const {
  const auto& all = articles.all();
  auto lo = std::upper_bound(all.begin(), all.end(), at - spec.horizon,
                             [](Timestamp t, const ArticleRecord& a) { return t < a.published_at; });
  auto hi = std::upper_bound(all.begin(), all.end(), at,
                             [](Timestamp t, const ArticleRecord& a) { return t < a.published_at; });
  return {static_cast<std::size_t>(lo - all.begin()), static_cast<std::size_t>(hi - all.begin())};
}

World generate_world(const WorldSpec& spec) {
  if (spec.vocab_size < spec.num_topics)
    throw std::invalid_argument("vocab_size must be at least num_topics");
  World world;
  world.spec = spec;

  Rng topic_rng(hash_combine(spec.seed, kSaltTopics));
  world.topic_vectors.reserve(spec.num_topics);
  for (int t = 0; t < spec.num_topics; ++t)
    world.topic_vectors.push_back(random_unit(topic_rng, spec.d));
  // Themes are contrastive: centering the draws gives distinct topics a
  // mildly negative affinity, the way disjoint news verticals repel. A lone
  // topic has nothing to contrast with and keeps its raw direction.
  if (spec.num_topics > 1) {
    Vec mean(static_cast<std::size_t>(spec.d), 0.0);
    for (const Vec& v : world.topic_vectors) add_into(mean, v, 1.0 / spec.num_topics);
    for (Vec& v : world.topic_vectors) {
      add_into(v, mean, -1.0);
      auto unit = normalized(v);
      if (unit) v = *unit;
    }
  }

  // Word w belongs to topic w % T; its vector is the topic vector plus noise.
  Rng word_rng(hash_combine(spec.seed, kSaltWords));
  world.emb.dim = static_cast<std::size_t>(spec.d);
  std::vector<std::string> vocab(spec.vocab_size);
  for (int w = 0; w < spec.vocab_size; ++w) {
    vocab[w] = "w" + std::to_string(w);
    Vec v = world.topic_vectors[w % spec.num_topics];
    for (auto& x : v) x += spec.word_noise * word_rng.normal();
    auto n = normalized(v);
    world.emb.entries.emplace(vocab[w], n ? *n : world.topic_vectors[w % spec.num_topics]);
  }

  struct Draft {
    int topic;
    Timestamp published;
    std::vector<std::string> tokens;
  };
  Rng article_rng(hash_combine(spec.seed, kSaltArticles));
  std::vector<Draft> drafts(spec.num_articles);
  const Timestamp span = static_cast<Timestamp>(spec.days) * 86400;
  const int words_per_topic = spec.vocab_size / spec.num_topics;
  for (auto& d : drafts) {
    d.topic = static_cast<int>(article_rng.below(spec.num_topics));
    d.published = spec.t0 + static_cast<Timestamp>(article_rng.below(span));
    int n_tokens =
        spec.tokens_min + static_cast<int>(article_rng.below(spec.tokens_max - spec.tokens_min + 1));
    d.tokens.reserve(n_tokens);
    for (int i = 0; i < n_tokens; ++i) {
      int w;
      if (article_rng.uniform() < 0.85) {
        w = d.topic + spec.num_topics * static_cast<int>(article_rng.below(words_per_topic));
      } else {
        w = static_cast<int>(article_rng.below(spec.vocab_size));
      }
      d.tokens.push_back(vocab[w]);
    }
  }
  std::stable_sort(drafts.begin(), drafts.end(),
                   [](const Draft& a, const Draft& b) { return a.published < b.published; });

  std::vector<std::vector<std::string>> corpus;
  corpus.reserve(drafts.size());
  for (const auto& d : drafts) corpus.push_back(d.tokens);
  world.idf = build_idf(corpus);

  for (int i = 0; i < spec.num_articles; ++i) {
    ArticleRecord a;
    a.article_id = article_name(i);
    a.published_at = drafts[i].published;
    a.tokens = std::move(drafts[i].tokens);
    a.vector = article_vector(a.tokens, world.emb, world.idf);
    world.articles.add(std::move(a));
    world.article_topic.push_back(drafts[i].topic);
  }

  Rng user_rng(hash_combine(spec.seed, kSaltUsers));
  world.user_ids.reserve(spec.num_users);
  for (int u = 0; u < spec.num_users; ++u) {
    world.user_ids.push_back(user_name(u));
    std::vector<double> mix = user_rng.dirichlet(spec.num_topics, spec.pref_alpha);
    Vec pref(spec.d, 0.0);
    for (int t = 0; t < spec.num_topics; ++t) add_into(pref, world.topic_vectors[t], mix[t]);
    auto n = normalized(pref);
    world.user_pref.push_back(n ? *n : world.topic_vectors[0]);
    world.user_mix.push_back(std::move(mix));
    world.user_rate.push_back(std::min(96.0, user_rng.lognormal(spec.visit_mu, spec.visit_sigma)));
  }
  init_trends(world);
  return world;
}

SimulationStats simulate_logs(const World& world, const std::string& events_path) {
  std::ofstream out(events_path);
  if (!out) throw std::runtime_error("cannot write events: " + events_path);
  const WorldSpec& spec = world.spec;
  const Timestamp t_end = world.t_end();

  struct Session {
    Timestamp ts;
    std::uint32_t user;
  };
  std::vector<Session> sessions;
  for (int u = 0; u < spec.num_users; ++u) {
    Rng rng(hash_combine(hash_combine(spec.seed, kSaltVisits), static_cast<std::uint64_t>(u)));
    double rate_per_sec = world.user_rate[u] / 86400.0;
    if (rate_per_sec <= 0.0) continue;
    double t = static_cast<double>(spec.t0);
    for (;;) {
      t += rng.exponential(rate_per_sec);
      if (t >= static_cast<double>(t_end)) break;
      sessions.push_back({static_cast<Timestamp>(t), static_cast<std::uint32_t>(u)});
    }
  }
  std::sort(sessions.begin(), sessions.end(), [](const Session& a, const Session& b) {
    if (a.ts != b.ts) return a.ts < b.ts;
    return a.user < b.user;
  });

  const auto& all_articles = world.articles.all();
  // The logging policy mimics a news portal front page: it only displays
  // articles from the last 2 hours, ranked by popularity counts that decay
  // exponentially (1 h e-folding) so slates chase what is hot now. The +1/+2
  // prior makes unexposed fresh articles attractive until a few impressions
  // reveal their true rate.
  constexpr Timestamp kPolicyFresh = 7200;
  constexpr double kPolicyTau = 3600.0;
  std::vector<double> pool_impressions(all_articles.size(), 0.0);
  std::vector<double> pool_clicks(all_articles.size(), 0.0);
  std::vector<Timestamp> pool_ts(all_articles.size(), spec.t0);
  auto decay_pool = [&](std::size_t a, Timestamp at) {
    if (at <= pool_ts[a]) return;
    double f = std::exp(-static_cast<double>(at - pool_ts[a]) / kPolicyTau);
    pool_impressions[a] *= f;
    pool_clicks[a] *= f;
    pool_ts[a] = at;
  };
  std::vector<std::unordered_set<std::uint32_t>> clicked(spec.num_users);
  std::vector<std::int64_t> ordinal(spec.num_users, 0);
  std::vector<std::int64_t> seq(spec.num_users, 0);

  SimulationStats stats;
  BehaviorEvent ev;
  struct Scored {
    double score;
    std::uint32_t idx;
  };
  std::vector<Scored> scored;
  const std::uint64_t policy_seed = hash_combine(spec.seed, kSaltPolicy);

  for (const Session& s : sessions) {
    const std::uint32_t u = s.user;
    const std::int64_t ord = ordinal[u]++;
    ++stats.sessions;

    ev.kind = EventKind::access;
    ev.user_id = world.user_ids[u];
    ev.article_id.clear();
    ev.ts = s.ts;
    ev.seq = seq[u]++;
    out << format_event(ev) << '\n';

    auto [lo, hi] = world.live_range(s.ts);
    scored.clear();
    for (std::size_t a = lo; a < hi; ++a) {
      if (clicked[u].count(static_cast<std::uint32_t>(a))) continue;
      if (s.ts - all_articles[a].published_at > kPolicyFresh) continue;
      decay_pool(a, s.ts);
      double ctr = (pool_clicks[a] + 1.0) / (pool_impressions[a] + 2.0);
      double unit = stateless_unit(policy_seed, u, a, static_cast<std::uint64_t>(ord));
      unit = std::min(std::max(unit, 1e-12), 1.0 - 1e-12);
      double gumbel = -spec.policy_noise * std::log(-std::log(unit));
      scored.push_back({ctr + gumbel, static_cast<std::uint32_t>(a)});
    }
    std::size_t slate = std::min<std::size_t>(scored.size(), spec.slate_size);
    std::partial_sort(scored.begin(), scored.begin() + slate, scored.end(),
                      [](const Scored& a, const Scored& b) {
                        if (a.score != b.score) return a.score > b.score;
                        return a.idx < b.idx;
                      });

    for (std::size_t i = 0; i < slate; ++i) {
      std::uint32_t a = scored[i].idx;
      ev.kind = EventKind::impression;
      ev.article_id = all_articles[a].article_id;
      ev.seq = seq[u]++;
      out << format_event(ev) << '\n';
      ++pool_impressions[a];
      ++stats.impressions;
      if (world.click_draw(u, a, ord, s.ts)) {
        ev.kind = EventKind::click;
        ev.seq = seq[u]++;
        out << format_event(ev) << '\n';
        ++pool_clicks[a];
        ++stats.clicks;
        clicked[u].insert(a);
      }
    }
  }
  return stats;
}

std::vector<HourSegment> export_segments(const World& world, const std::string& events_path) {
  std::ifstream in(events_path);
  if (!in) throw std::runtime_error("cannot open events: " + events_path);
  const WorldSpec& spec = world.spec;
  const int hours = spec.days * 24;
  std::vector<HourSegment> segments(hours);
  const auto& all_articles = world.articles.all();
  for (int h = 0; h < hours; ++h) {
    HourSegment& seg = segments[h];
    seg.hour_start = spec.t0 + static_cast<Timestamp>(h) * 3600;
    Timestamp hour_end = seg.hour_start + 3600;
    auto lo = std::upper_bound(
        all_articles.begin(), all_articles.end(), seg.hour_start - spec.horizon,
        [](Timestamp t, const ArticleRecord& a) { return t < a.published_at; });
    auto hi = std::lower_bound(all_articles.begin(), all_articles.end(), hour_end,
                               [](const ArticleRecord& a, Timestamp t) { return a.published_at < t; });
    for (auto it = lo; it != hi; ++it) seg.candidates_all.push_back(it->article_id);
    std::sort(seg.candidates_all.begin(), seg.candidates_all.end());
  }

  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto ev = parse_event(line);
    if (!ev || ev->kind == EventKind::access) continue;
    std::int64_t h = (ev->ts - spec.t0) / 3600;
    if (h < 0 || h >= hours) continue;
    if (ev->kind == EventKind::impression) {
      segments[h].displayed[ev->user_id].push_back(ev->article_id);
    } else {
      segments[h].clicked[ev->user_id].insert(ev->article_id);
    }
  }
  // An article re-shown across sessions within the hour appears once, at its
  // first display position.
  for (HourSegment& seg : segments) {
    for (auto& [user, list] : seg.displayed) {
      std::set<std::string> seen;
      std::vector<std::string> unique;
      unique.reserve(list.size());
      for (auto& article : list) {
        if (seen.insert(article).second) unique.push_back(std::move(article));
      }
      list = std::move(unique);
    }
  }
  return segments;
}

namespace {

constexpr const char* kWorldFile = "world.txt";

void save_spec(const WorldSpec& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write world spec: " + path);
  out << "newsrec-world v1\n";
  out << "seed " << s.seed << '\n';
  out << "num_topics " << s.num_topics << '\n';
  out << "vocab_size " << s.vocab_size << '\n';
  out << "d " << s.d << '\n';
  out << "num_users " << s.num_users << '\n';
  out << "num_articles " << s.num_articles << '\n';
  out << "days " << s.days << '\n';
  out << "word_noise " << fmt_double(s.word_noise) << '\n';
  out << "tokens_min " << s.tokens_min << '\n';
  out << "tokens_max " << s.tokens_max << '\n';
  out << "visit_mu " << fmt_double(s.visit_mu) << '\n';
  out << "visit_sigma " << fmt_double(s.visit_sigma) << '\n';
  out << "pref_alpha " << fmt_double(s.pref_alpha) << '\n';
  out << "affinity_weight " << fmt_double(s.affinity_weight) << '\n';
  out << "freshness_half_life " << fmt_double(s.freshness_half_life) << '\n';
  out << "base_rate " << fmt_double(s.base_rate) << '\n';
  out << "policy_noise " << fmt_double(s.policy_noise) << '\n';
  out << "slate_size " << s.slate_size << '\n';
  out << "trend_amp " << fmt_double(s.trend_amp) << '\n';
  out << "trend_period " << s.trend_period << '\n';
  out << "horizon " << s.horizon << '\n';
  out << "t0 " << s.t0 << '\n';
}

WorldSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open world spec: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "newsrec-world v1")
    throw std::runtime_error("bad world spec header in " + path);
  WorldSpec s;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "seed") ss >> s.seed;
    else if (key == "num_topics") ss >> s.num_topics;
    else if (key == "vocab_size") ss >> s.vocab_size;
    else if (key == "d") ss >> s.d;
    else if (key == "num_users") ss >> s.num_users;
    else if (key == "num_articles") ss >> s.num_articles;
    else if (key == "days") ss >> s.days;
    else if (key == "word_noise") ss >> s.word_noise;
    else if (key == "tokens_min") ss >> s.tokens_min;
    else if (key == "tokens_max") ss >> s.tokens_max;
    else if (key == "visit_mu") ss >> s.visit_mu;
    else if (key == "visit_sigma") ss >> s.visit_sigma;
    else if (key == "pref_alpha") ss >> s.pref_alpha;
    else if (key == "affinity_weight") ss >> s.affinity_weight;
    else if (key == "freshness_half_life") ss >> s.freshness_half_life;
    else if (key == "base_rate") ss >> s.base_rate;
    else if (key == "policy_noise") ss >> s.policy_noise;
    else if (key == "slate_size") ss >> s.slate_size;
    else if (key == "trend_amp") ss >> s.trend_amp;
    else if (key == "trend_period") ss >> s.trend_period;
    else if (key == "horizon") ss >> s.horizon;
    else if (key == "t0") ss >> s.t0;
    else throw std::runtime_error("unknown world spec key: " + key);
  }
  return s;
}

}  // namespace

void World::save(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  save_spec(spec, dir + "/" + kWorldFile);
  {
    std::ofstream out(dir + "/topic_vectors.txt");
    if (!out) throw std::runtime_error("cannot write topic vectors");
    for (const auto& v : topic_vectors) {
      for (std::size_t j = 0; j < v.size(); ++j) out << (j ? " " : "") << fmt_double(v[j]);
      out << '\n';
    }
  }
  emb.save(dir + "/embeddings.txt");
  idf.save(dir + "/idf.txt");
  articles.save(dir + "/articles.txt");
  {
    std::ofstream out(dir + "/topics.txt");
    if (!out) throw std::runtime_error("cannot write topics");
    const auto& all = articles.all();
    for (std::size_t i = 0; i < all.size(); ++i)
      out << all[i].article_id << ' ' << article_topic[i] << '\n';
  }
  {
    std::ofstream out(dir + "/users.txt");
    if (!out) throw std::runtime_error("cannot write users");
    for (std::size_t u = 0; u < user_ids.size(); ++u) {
      out << user_ids[u] << ' ' << fmt_double(user_rate[u]);
      for (double m : user_mix[u]) out << ' ' << fmt_double(m);
      out << '\n';
    }
  }
}

World World::load(const std::string& dir) {
  World world;
  world.spec = load_spec(dir + "/" + kWorldFile);
  {
    std::ifstream in(dir + "/topic_vectors.txt");
    if (!in) throw std::runtime_error("cannot open topic vectors in " + dir);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream ss(line);
      Vec v;
      double x;
      while (ss >> x) v.push_back(x);
      world.topic_vectors.push_back(std::move(v));
    }
  }
  world.emb = EmbeddingTable::load(dir + "/embeddings.txt");
  world.idf = IdfTable::load(dir + "/idf.txt");
  world.articles = ArticleIndex::load(dir + "/articles.txt", world.emb, world.idf);
  {
    std::ifstream in(dir + "/topics.txt");
    if (!in) throw std::runtime_error("cannot open topics in " + dir);
    world.article_topic.resize(world.articles.size(), -1);
    std::string id;
    int topic;
    std::size_t pos = 0;
    while (in >> id >> topic) world.article_topic[pos++] = topic;
  }
  {
    std::ifstream in(dir + "/users.txt");
    if (!in) throw std::runtime_error("cannot open users in " + dir);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream ss(line);
      std::string id;
      double rate;
      ss >> id >> rate;
      std::vector<double> mix;
      double m;
      while (ss >> m) mix.push_back(m);
      Vec pref(world.spec.d, 0.0);
      for (std::size_t t = 0; t < mix.size(); ++t)
        add_into(pref, world.topic_vectors[t], mix[t]);
      auto n = normalized(pref);
      world.user_ids.push_back(std::move(id));
      world.user_rate.push_back(rate);
      world.user_mix.push_back(std::move(mix));
      world.user_pref.push_back(n ? *n : world.topic_vectors[0]);
    }
  }
  init_trends(world);
  return world;
}

}  // namespace newsrec
