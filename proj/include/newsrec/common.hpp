#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace newsrec {

using Vec = std::vector<double>;
using Timestamp = std::int64_t;  // seconds since epoch

// A news item. `vector` is the idf-weighted embedding average, unit norm;
// absent when no token of the article is embeddable.
struct ArticleRecord {
  std::string article_id;
  Timestamp published_at = 0;
  std::vector<std::string> tokens;
  std::optional<Vec> vector;
};

// Bounded click history plus the derived unit-norm user vector.
// `history` holds the last N clicked article ids, newest last.
struct UserProfile {
  std::string user_id;
  std::vector<std::string> history;
  std::optional<Vec> vector;
  std::optional<Timestamp> last_access_at;
};

}  // namespace newsrec
