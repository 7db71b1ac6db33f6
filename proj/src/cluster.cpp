#include "newsrec/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "newsrec/rng.hpp"
#include "newsrec/textio.hpp"
#include "newsrec/vecmath.hpp"

namespace newsrec {

const char* to_string(ClusterAlgorithm a) {
  switch (a) {
    case ClusterAlgorithm::kmeans: return "kmeans";
    case ClusterAlgorithm::minhash: return "minhash";
    case ClusterAlgorithm::nmf: return "nmf";
  }
  return "?";
}

std::optional<ClusterAlgorithm> cluster_algorithm_from(const std::string& name) {
  if (name == "kmeans") return ClusterAlgorithm::kmeans;
  if (name == "minhash") return ClusterAlgorithm::minhash;
  if (name == "nmf") return ClusterAlgorithm::nmf;
  return std::nullopt;
}

ClickMatrix ClickMatrix::from_counts(
    const std::map<std::string, std::map<std::string, double>>& counts) {
  ClickMatrix m;
  std::set<std::string> cols;
  for (const auto& [user, row] : counts) {
    m.users.push_back(user);
    for (const auto& [article, _] : row) cols.insert(article);
  }
  m.articles.assign(cols.begin(), cols.end());
  std::unordered_map<std::string, std::size_t> col_of;
  for (std::size_t j = 0; j < m.articles.size(); ++j) col_of[m.articles[j]] = j;
  m.row_ptr.push_back(0);
  for (const auto& [user, row] : counts) {
    for (const auto& [article, v] : row) {
      if (v == 0.0) continue;
      m.col_idx.push_back(col_of[article]);
      m.values.push_back(v);
    }
    m.row_ptr.push_back(m.col_idx.size());
  }
  return m;
}

namespace {

int nearest_centroid(const Vec& v, const std::vector<Vec>& centroids) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    double d = squared_distance(v, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

}  // namespace

ClusterModel kmeans_fit(const std::vector<std::pair<std::string, Vec>>& user_vectors,
                        const KmeansOptions& opts) {
  if (opts.k <= 0) throw std::invalid_argument("k must be positive");
  const std::size_t n = user_vectors.size();
  const std::size_t k = static_cast<std::size_t>(opts.k);
  if (n < k) throw std::invalid_argument("insufficient users");

  // Sorted traversal keeps fitting deterministic regardless of caller order.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return user_vectors[a].first < user_vectors[b].first;
  });

  const std::size_t dim = user_vectors[order[0]].second.size();
  Rng rng(opts.seed);

  // k-means++ seeding: first centroid uniform, then D^2 sampling.
  std::vector<Vec> centroids;
  centroids.reserve(k);
  centroids.push_back(user_vectors[order[rng.below(n)]].second);
  std::vector<double> d2(n);
  while (centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Vec& v = user_vectors[order[i]].second;
      double best = squared_distance(v, centroids[0]);
      for (std::size_t c = 1; c < centroids.size(); ++c)
        best = std::min(best, squared_distance(v, centroids[c]));
      d2[i] = best;
      total += best;
    }
    std::size_t pick;
    if (total <= 0.0) {
      pick = rng.below(n);
    } else {
      double target = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc >= target) {
          pick = i;
          break;
        }
      }
    }
    centroids.push_back(user_vectors[order[pick]].second);
  }

  std::vector<int> assign(n, 0);
  for (int iter = 0; iter < opts.max_iters; ++iter) {
    for (std::size_t i = 0; i < n; ++i)
      assign[i] = nearest_centroid(user_vectors[order[i]].second, centroids);

    if (opts.inertia_trace) {
      double inertia = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        inertia += squared_distance(user_vectors[order[i]].second, centroids[assign[i]]);
      opts.inertia_trace->push_back(inertia);
    }

    std::vector<Vec> sums(k, Vec(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      add_into(sums[assign[i]], user_vectors[order[i]].second);
      ++counts[assign[i]];
    }
    double max_move = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its centroid
      Vec next(dim);
      for (std::size_t j = 0; j < dim; ++j) next[j] = sums[c][j] / static_cast<double>(counts[c]);
      max_move = std::max(max_move, std::sqrt(squared_distance(next, centroids[c])));
      centroids[c] = std::move(next);
    }
    if (max_move < opts.tol) break;
  }

  ClusterModel model;
  model.algorithm = ClusterAlgorithm::kmeans;
  model.num_clusters = opts.k;
  model.dim = dim;
  model.centroids = std::move(centroids);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& [id, v] = user_vectors[order[i]];
    model.assignments[id] = ClusterAssignment{nearest_centroid(v, model.centroids), {}};
  }
  return model;
}

ClusterWeights kmeans_weights(const Vec& u, const ClusterModel& model, double exponent,
                              double eps) {
  if (model.algorithm != ClusterAlgorithm::kmeans)
    throw std::invalid_argument("kmeans_weights requires a kmeans model");
  ClusterWeights w;
  w.model_version = model.version;
  w.weights.reserve(model.centroids.size());
  for (std::size_t c = 0; c < model.centroids.size(); ++c) {
    double d = std::sqrt(squared_distance(u, model.centroids[c]));
    d = std::max(d, eps);
    w.weights.emplace_back(static_cast<int>(c), std::pow(d, -exponent));
  }
  return w;
}

std::string minhash_key(const std::set<std::string>& click_set, const MinHashParams& params) {
  std::string key;
  for (int h = 0; h < params.key_len; ++h) {
    std::uint64_t salt = splitmix64(params.seed + 0x1000003ULL * static_cast<std::uint64_t>(h));
    std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
    for (const auto& id : click_set) best = std::min(best, splitmix64(fnv1a64(id) ^ salt));
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(best));
    if (h) key.push_back('-');
    key += buf;
  }
  return key;
}

ClusterModel minhash_fit(const std::map<std::string, std::set<std::string>>& click_sets,
                         const MinHashParams& params, std::vector<std::string>* skipped) {
  if (params.num_hashes <= 0 || params.key_len <= 0 || params.key_len > params.num_hashes)
    throw std::invalid_argument("bad minhash parameters");
  ClusterModel model;
  model.algorithm = ClusterAlgorithm::minhash;
  model.minhash = params;
  for (const auto& [user, clicks] : click_sets) {
    if (clicks.empty()) {
      if (skipped) skipped->push_back(user);
      continue;
    }
    std::string key = minhash_key(clicks, params);
    auto [it, inserted] = model.key_to_cluster.emplace(key, static_cast<int>(model.cluster_keys.size()));
    if (inserted) model.cluster_keys.push_back(key);
    model.assignments[user] = ClusterAssignment{it->second, {}};
  }
  model.num_clusters = static_cast<int>(model.cluster_keys.size());
  return model;
}

namespace {

double nmf_frobenius_error(const ClickMatrix& v, const std::vector<Vec>& w,
                           const std::vector<Vec>& h) {
  // ||V - WH||_F^2 = ||V||^2 - 2<V, WH> + tr((W'W)(HH'))
  const std::size_t k = h.size();
  double v2 = 0.0;
  for (double x : v.values) v2 += x * x;
  double cross = 0.0;
  for (std::size_t i = 0; i < v.users.size(); ++i) {
    for (std::size_t p = v.row_ptr[i]; p < v.row_ptr[i + 1]; ++p) {
      std::size_t j = v.col_idx[p];
      double wh = 0.0;
      for (std::size_t c = 0; c < k; ++c) wh += w[i][c] * h[c][j];
      cross += v.values[p] * wh;
    }
  }
  std::vector<double> wtw(k * k, 0.0);
  for (std::size_t i = 0; i < v.users.size(); ++i)
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b) wtw[a * k + b] += w[i][a] * w[i][b];
  double hh = 0.0;
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b) hh += wtw[a * k + b] * dot(h[a], h[b]);
  double err2 = v2 - 2.0 * cross + hh;
  return std::sqrt(std::max(0.0, err2));
}

}  // namespace

ClusterModel nmf_fit(const ClickMatrix& clicks, const NmfOptions& opts) {
  const std::size_t n = clicks.users.size();
  const std::size_t m = clicks.articles.size();
  const std::size_t k = static_cast<std::size_t>(opts.k);
  if (opts.k <= 0) throw std::invalid_argument("k must be positive");
  if (n < k || m < k) throw std::invalid_argument("matrix smaller than k");
  for (std::size_t i = 0; i < n; ++i) {
    if (clicks.row_ptr[i] == clicks.row_ptr[i + 1])
      throw std::invalid_argument("all-zero click row for user " + clicks.users[i]);
  }
  for (double x : clicks.values) {
    if (x < 0.0) throw std::invalid_argument("negative click count");
  }

  const double guard = 1e-12;
  Rng rng(opts.seed);
  std::vector<Vec> w(n, Vec(k));
  std::vector<Vec> h(k, Vec(m));
  for (auto& row : w)
    for (auto& x : row) x = 0.1 + rng.uniform();
  for (auto& row : h)
    for (auto& x : row) x = 0.1 + rng.uniform();

  std::vector<double> hht(k * k);
  std::vector<double> wtw(k * k);
  std::vector<Vec> num_w(n, Vec(k));
  std::vector<Vec> num_h(k, Vec(m));

  if (opts.error_trace) opts.error_trace->push_back(nmf_frobenius_error(clicks, w, h));

  for (int iter = 0; iter < opts.iters; ++iter) {
    // W update: W <- W * (V H') / (W (H H'))
    std::fill(hht.begin(), hht.end(), 0.0);
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b) hht[a * k + b] = dot(h[a], h[b]);
    for (auto& row : num_w) std::fill(row.begin(), row.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t p = clicks.row_ptr[i]; p < clicks.row_ptr[i + 1]; ++p) {
        std::size_t j = clicks.col_idx[p];
        double v = clicks.values[p];
        for (std::size_t c = 0; c < k; ++c) num_w[i][c] += v * h[c][j];
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < k; ++c) {
        double denom = guard;
        for (std::size_t b = 0; b < k; ++b) denom += w[i][b] * hht[b * k + c];
        w[i][c] *= num_w[i][c] / denom;
      }
    }

    // H update: H <- H * (W' V) / ((W' W) H)
    std::fill(wtw.begin(), wtw.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < k; ++b) wtw[a * k + b] += w[i][a] * w[i][b];
    for (auto& row : num_h) std::fill(row.begin(), row.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t p = clicks.row_ptr[i]; p < clicks.row_ptr[i + 1]; ++p) {
        std::size_t j = clicks.col_idx[p];
        double v = clicks.values[p];
        for (std::size_t c = 0; c < k; ++c) num_h[c][j] += w[i][c] * v;
      }
    }
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t j = 0; j < m; ++j) {
        double denom = guard;
        for (std::size_t b = 0; b < k; ++b) denom += wtw[c * k + b] * h[b][j];
        h[c][j] *= num_h[c][j] / denom;
      }
    }

    if (opts.error_trace) opts.error_trace->push_back(nmf_frobenius_error(clicks, w, h));
  }

  ClusterModel model;
  model.algorithm = ClusterAlgorithm::nmf;
  model.num_clusters = opts.k;
  model.nmf_articles = clicks.articles;
  for (std::size_t j = 0; j < m; ++j) model.nmf_article_col[clicks.articles[j]] = j;
  model.nmf_h = std::move(h);
  for (std::size_t i = 0; i < n; ++i) {
    ClusterAssignment a;
    double sum = 0.0;
    for (double x : w[i]) sum += x;
    a.soft.resize(k);
    int best = 0;
    for (std::size_t c = 0; c < k; ++c) {
      a.soft[c] = sum > 0.0 ? w[i][c] / sum : 1.0 / static_cast<double>(k);
      if (a.soft[c] > a.soft[best]) best = static_cast<int>(c);
    }
    a.cluster = best;
    model.assignments[clicks.users[i]] = std::move(a);
  }
  return model;
}

ClusterAssignment assign(const ClusterModel& model, const Vec* user_vec,
                         const std::set<std::string>* click_set,
                         const std::map<std::string, double>* click_counts) {
  switch (model.algorithm) {
    case ClusterAlgorithm::kmeans: {
      if (!user_vec || user_vec->empty()) throw std::invalid_argument("unassignable");
      return ClusterAssignment{nearest_centroid(*user_vec, model.centroids), {}};
    }
    case ClusterAlgorithm::minhash: {
      if (!click_set || click_set->empty()) throw std::invalid_argument("unassignable");
      std::string key = minhash_key(*click_set, model.minhash);
      auto it = model.key_to_cluster.find(key);
      if (it != model.key_to_cluster.end()) return ClusterAssignment{it->second, {}};
      // Unseen key: nearest by sharing no training key; bucket it by hash so
      // attribution stays stable for this user.
      int c = static_cast<int>(fnv1a64(key) % static_cast<std::uint64_t>(
                                                  std::max(1, model.num_clusters)));
      return ClusterAssignment{c, {}};
    }
    case ClusterAlgorithm::nmf: {
      if (!click_counts || click_counts->empty()) throw std::invalid_argument("unassignable");
      const std::size_t k = model.nmf_h.size();
      const std::size_t m = model.nmf_articles.size();
      // One multiplicative pass from a flat row: w = (v H') / (1 (H H')).
      std::vector<double> vh(k, 0.0);
      bool any = false;
      for (const auto& [article, count] : *click_counts) {
        auto it = model.nmf_article_col.find(article);
        if (it == model.nmf_article_col.end()) continue;
        any = true;
        for (std::size_t c = 0; c < k; ++c) vh[c] += count * model.nmf_h[c][it->second];
      }
      if (!any) throw std::invalid_argument("unassignable");
      std::vector<double> denom(k, 1e-12);
      for (std::size_t c = 0; c < k; ++c)
        for (std::size_t b = 0; b < k; ++b) denom[c] += dot(model.nmf_h[b], model.nmf_h[c]);
      (void)m;
      ClusterAssignment a;
      a.soft.resize(k);
      double sum = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        a.soft[c] = vh[c] / denom[c];
        sum += a.soft[c];
      }
      int best = 0;
      for (std::size_t c = 0; c < k; ++c) {
        a.soft[c] = sum > 0.0 ? a.soft[c] / sum : 1.0 / static_cast<double>(k);
        if (a.soft[c] > a.soft[best]) best = static_cast<int>(c);
      }
      a.cluster = best;
      return a;
    }
  }
  throw std::logic_error("unreachable");
}

ClusterWeights weights_for(const ClusterModel& model, const std::optional<Vec>& user_vec,
                           const ClusterAssignment* assignment, const WeightOptions& opts) {
  ClusterWeights w;
  w.model_version = model.version;
  if (model.algorithm == ClusterAlgorithm::kmeans) {
    if (!user_vec) throw std::invalid_argument("unassignable");
    return kmeans_weights(*user_vec, model, opts.exponent, opts.eps);
  }
  if (!assignment || assignment->cluster < 0) throw std::invalid_argument("unassignable");
  if (model.algorithm == ClusterAlgorithm::nmf && opts.nmf_soft && !assignment->soft.empty()) {
    for (std::size_t c = 0; c < assignment->soft.size(); ++c)
      if (assignment->soft[c] > 0.0) w.weights.emplace_back(static_cast<int>(c), assignment->soft[c]);
    return w;
  }
  w.weights.emplace_back(assignment->cluster, 1.0);
  return w;
}

double kmeans_inertia(const std::vector<std::pair<std::string, Vec>>& user_vectors,
                      const ClusterModel& model) {
  double total = 0.0;
  for (const auto& [id, v] : user_vectors) {
    auto it = model.assignments.find(id);
    int c = it != model.assignments.end() ? it->second.cluster : nearest_centroid(v, model.centroids);
    total += squared_distance(v, model.centroids[c]);
  }
  return total;
}

namespace {

void save_assignments(std::ofstream& out, const ClusterModel& model, bool with_soft) {
  out << "assignments " << model.assignments.size() << "\n";
  for (const auto& [user, a] : model.assignments) {
    out << user << ' ' << a.cluster;
    if (with_soft) {
      out << ' ' << a.soft.size();
      for (double x : a.soft) out << ' ' << fmt_double(x);
    }
    out << '\n';
  }
}

}  // namespace

void ClusterModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  out << "newsrec-cluster-model v1\n";
  out << "algorithm " << to_string(algorithm) << "\n";
  out << "version " << version << "\n";
  out << "clusters " << num_clusters << "\n";
  switch (algorithm) {
    case ClusterAlgorithm::kmeans: {
      out << "dim " << dim << "\n";
      out << "centroids " << centroids.size() << "\n";
      for (const auto& c : centroids) {
        for (std::size_t j = 0; j < c.size(); ++j) out << (j ? " " : "") << fmt_double(c[j]);
        out << '\n';
      }
      save_assignments(out, *this, false);
      break;
    }
    case ClusterAlgorithm::minhash: {
      out << "minhash " << minhash.num_hashes << ' ' << minhash.key_len << ' ' << minhash.seed
          << "\n";
      out << "keys " << cluster_keys.size() << "\n";
      for (const auto& k : cluster_keys) out << k << '\n';
      save_assignments(out, *this, false);
      break;
    }
    case ClusterAlgorithm::nmf: {
      out << "articles " << nmf_articles.size() << "\n";
      for (const auto& a : nmf_articles) out << a << '\n';
      out << "h " << nmf_h.size() << "\n";
      for (const auto& row : nmf_h) {
        for (std::size_t j = 0; j < row.size(); ++j) out << (j ? " " : "") << fmt_double(row[j]);
        out << '\n';
      }
      save_assignments(out, *this, true);
      break;
    }
  }
}

namespace {

std::string expect_line(std::ifstream& in, const std::string& what) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("model file truncated at " + what);
  return line;
}

}  // namespace

ClusterModel ClusterModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  std::string line = expect_line(in, "header");
  if (line != "newsrec-cluster-model v1") throw std::runtime_error("bad model header: " + line);

  ClusterModel model;
  std::string word;
  {
    std::istringstream ss(expect_line(in, "algorithm"));
    std::string name;
    ss >> word >> name;
    auto algo = cluster_algorithm_from(name);
    if (word != "algorithm" || !algo) throw std::runtime_error("bad algorithm line");
    model.algorithm = *algo;
  }
  {
    std::istringstream ss(expect_line(in, "version"));
    ss >> word >> model.version;
  }
  {
    std::istringstream ss(expect_line(in, "clusters"));
    ss >> word >> model.num_clusters;
  }

  auto load_assignments = [&](bool with_soft) {
    std::istringstream ss(expect_line(in, "assignments"));
    std::size_t n = 0;
    ss >> word >> n;
    for (std::size_t i = 0; i < n; ++i) {
      std::istringstream ls(expect_line(in, "assignment row"));
      std::string user;
      ClusterAssignment a;
      ls >> user >> a.cluster;
      if (with_soft) {
        std::size_t cnt = 0;
        ls >> cnt;
        a.soft.resize(cnt);
        for (auto& x : a.soft) ls >> x;
      }
      model.assignments.emplace(std::move(user), std::move(a));
    }
  };

  switch (model.algorithm) {
    case ClusterAlgorithm::kmeans: {
      {
        std::istringstream ss(expect_line(in, "dim"));
        ss >> word >> model.dim;
      }
      std::size_t rows = 0;
      {
        std::istringstream ss(expect_line(in, "centroids"));
        ss >> word >> rows;
      }
      model.centroids.resize(rows, Vec(model.dim));
      for (auto& c : model.centroids) {
        std::istringstream ls(expect_line(in, "centroid row"));
        for (auto& x : c) ls >> x;
      }
      load_assignments(false);
      break;
    }
    case ClusterAlgorithm::minhash: {
      {
        std::istringstream ss(expect_line(in, "minhash"));
        ss >> word >> model.minhash.num_hashes >> model.minhash.key_len >> model.minhash.seed;
      }
      std::size_t nkeys = 0;
      {
        std::istringstream ss(expect_line(in, "keys"));
        ss >> word >> nkeys;
      }
      model.cluster_keys.resize(nkeys);
      for (std::size_t i = 0; i < nkeys; ++i) {
        model.cluster_keys[i] = expect_line(in, "key row");
        model.key_to_cluster[model.cluster_keys[i]] = static_cast<int>(i);
      }
      load_assignments(false);
      break;
    }
    case ClusterAlgorithm::nmf: {
      std::size_t narticles = 0;
      {
        std::istringstream ss(expect_line(in, "articles"));
        ss >> word >> narticles;
      }
      model.nmf_articles.resize(narticles);
      for (std::size_t j = 0; j < narticles; ++j) {
        model.nmf_articles[j] = expect_line(in, "article row");
        model.nmf_article_col[model.nmf_articles[j]] = j;
      }
      std::size_t rows = 0;
      {
        std::istringstream ss(expect_line(in, "h"));
        ss >> word >> rows;
      }
      model.nmf_h.resize(rows, Vec(narticles));
      for (auto& r : model.nmf_h) {
        std::istringstream ls(expect_line(in, "h row"));
        for (auto& x : r) ls >> x;
      }
      load_assignments(true);
      break;
    }
  }
  return model;
}

}  // namespace newsrec
