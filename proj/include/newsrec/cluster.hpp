#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "newsrec/common.hpp"

namespace newsrec {

enum class ClusterAlgorithm { kmeans, minhash, nmf };

const char* to_string(ClusterAlgorithm a);
std::optional<ClusterAlgorithm> cluster_algorithm_from(const std::string& name);

struct ClusterAssignment {
  int cluster = -1;
  std::vector<double> soft;  // nmf only: normalized W row, sums to 1
};

struct MinHashParams {
  int num_hashes = 8;
  int key_len = 2;
  std::uint64_t seed = 0;
};

// Sparse non-negative user x article count matrix, CSR. Rows and columns
// are sorted id lists.
struct ClickMatrix {
  std::vector<std::string> users;
  std::vector<std::string> articles;
  std::vector<std::size_t> row_ptr;  // users.size() + 1
  std::vector<std::size_t> col_idx;
  std::vector<double> values;

  static ClickMatrix from_counts(
      const std::map<std::string, std::map<std::string, double>>& counts);
};

// A fitted user clustering. kmeans carries centroids; minhash carries its
// key table and hashing parameters; nmf carries the article-basis matrix H
// so new users can be projected.
struct ClusterModel {
  ClusterAlgorithm algorithm = ClusterAlgorithm::kmeans;
  int num_clusters = 0;
  std::size_t dim = 0;
  std::uint64_t version = 0;

  std::vector<Vec> centroids;  // kmeans: num_clusters rows of length dim

  MinHashParams minhash;
  std::vector<std::string> cluster_keys;  // minhash: index -> key
  std::unordered_map<std::string, int> key_to_cluster;

  std::vector<std::string> nmf_articles;  // nmf: column ids of H
  std::unordered_map<std::string, std::size_t> nmf_article_col;
  std::vector<Vec> nmf_h;  // nmf: num_clusters rows of length nmf_articles.size()

  std::map<std::string, ClusterAssignment> assignments;

  void save(const std::string& path) const;
  static ClusterModel load(const std::string& path);
};

// Per-user weights over clusters, sparse (cluster, weight) pairs sorted by
// cluster index. Stamped with the model version they were computed against.
struct ClusterWeights {
  std::uint64_t model_version = 0;
  std::vector<std::pair<int, double>> weights;
};

struct WeightOptions {
  double exponent = 10.0;
  double eps = 1e-6;
  bool nmf_soft = false;
};

struct KmeansOptions {
  int k = 50;
  std::uint64_t seed = 0;
  int max_iters = 100;
  double tol = 1e-6;
  std::vector<double>* inertia_trace = nullptr;  // test hook, per-iteration
};

// k-means++ seeding followed by Lloyd iterations until the largest centroid
// movement drops below tol or max_iters is reached. Assignment ties go to
// the lowest index. Throws std::invalid_argument("insufficient users") when
// there are fewer users than k.
ClusterModel kmeans_fit(const std::vector<std::pair<std::string, Vec>>& user_vectors,
                        const KmeansOptions& opts);

// w_i = 1 / max(||u - c_i||, eps)^exponent for every cluster.
ClusterWeights kmeans_weights(const Vec& u, const ClusterModel& model,
                              double exponent = 10.0, double eps = 1e-6);

// Users sharing the concatenation of their first key_len min-hash values
// share a cluster. Users with empty click sets are skipped and reported.
ClusterModel minhash_fit(const std::map<std::string, std::set<std::string>>& click_sets,
                         const MinHashParams& params,
                         std::vector<std::string>* skipped = nullptr);

std::string minhash_key(const std::set<std::string>& click_set, const MinHashParams& params);

struct NmfOptions {
  int k = 50;
  std::uint64_t seed = 0;
  int iters = 200;
  std::vector<double>* error_trace = nullptr;  // Frobenius error per iteration
};

// Multiplicative-update NMF of the click matrix, V ~= W H. Soft weights are
// the normalized W rows; hard assignment is the argmax (ties to the lowest
// index). Throws on all-zero rows, naming the user.
ClusterModel nmf_fit(const ClickMatrix& clicks, const NmfOptions& opts);

// Applies a fitted model to a possibly-new user. kmeans needs the vector;
// minhash the click set; nmf per-article click counts. Throws
// std::invalid_argument("unassignable") when the needed input is missing.
ClusterAssignment assign(const ClusterModel& model, const Vec* user_vec,
                         const std::set<std::string>* click_set,
                         const std::map<std::string, double>* click_counts);

// Weights used by the scoring function: kmeans computes 1/d^p against all
// centroids from the live vector; minhash and nmf-hard give weight 1 to the
// user's own cluster; nmf_soft uses the stored soft row. Throws
// std::invalid_argument("unassignable") when neither a vector (kmeans) nor
// an assignment (minhash/nmf) is available.
ClusterWeights weights_for(const ClusterModel& model, const std::optional<Vec>& user_vec,
                           const ClusterAssignment* assignment, const WeightOptions& opts);

// Sum of squared distances from each assigned user to its centroid.
double kmeans_inertia(const std::vector<std::pair<std::string, Vec>>& user_vectors,
                      const ClusterModel& model);

}  // namespace newsrec
