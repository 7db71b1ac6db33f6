#pragma once

#include <cmath>
#include <cstddef>
#include <optional>

#include "newsrec/common.hpp"

namespace newsrec {

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_distance(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

// Returns nullopt for the zero vector.
inline std::optional<Vec> normalized(const Vec& a) {
  double n = norm(a);
  if (n == 0.0 || !std::isfinite(n)) return std::nullopt;
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] / n;
  return out;
}

inline void add_into(Vec& acc, const Vec& x, double scale = 1.0) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += scale * x[i];
}

inline bool is_unit(const Vec& a, double tol = 1e-6) {
  return std::fabs(norm(a) - 1.0) <= tol;
}

inline double cosine(const Vec& a, const Vec& b) {
  double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

}  // namespace newsrec
