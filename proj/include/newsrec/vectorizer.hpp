#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "newsrec/common.hpp"

namespace newsrec {

// Word token -> dense embedding vector, all of dimension `dim`.
struct EmbeddingTable {
  std::size_t dim = 0;
  std::unordered_map<std::string, Vec> entries;

  const Vec* find(const std::string& token) const {
    auto it = entries.find(token);
    return it == entries.end() ? nullptr : &it->second;
  }

  // Line format: `token v1 v2 ... vd`, `#` comments ignored, optional
  // leading `DIM d` line. Saved with sorted tokens.
  static EmbeddingTable load(const std::string& path);
  void save(const std::string& path) const;
};

// Smoothed inverse document frequencies over a token corpus.
struct IdfTable {
  std::uint64_t doc_count = 0;
  std::unordered_map<std::string, double> entries;

  // Unseen words take the df = 0 value of the same smoothed formula.
  double lookup(const std::string& token) const;

  static IdfTable load(const std::string& path);
  void save(const std::string& path) const;
};

// idf(w) = ln((1 + docs) / (1 + df(w))) + 1, df counting documents whose
// token *set* contains w. Throws std::invalid_argument("empty corpus").
IdfTable build_idf(const std::vector<std::vector<std::string>>& corpus);

// Unit-normalized idf-weighted sum of the tokens' embeddings. With
// count_duplicates each occurrence contributes; otherwise tokens are
// collapsed to a set first. Absent when no token is embeddable or the
// weighted sum is the zero vector.
std::optional<Vec> article_vector(const std::vector<std::string>& tokens,
                                  const EmbeddingTable& emb, const IdfTable& idf,
                                  bool count_duplicates = true);

// Unit-normalized sum of the history's article vectors. Absent for an empty
// list or exact cancellation.
std::optional<Vec> user_vector(const std::vector<const Vec*>& history_vectors);

}  // namespace newsrec
