#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace newsrec {

// splitmix64, used for stateless hashing and as a seed expander.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

inline double u64_to_unit(std::uint64_t x) {
  // 53 mantissa bits -> [0, 1)
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

// Seeded RNG with hand-rolled distributions. std:: distributions are
// implementation-defined, which would break byte-identical artifacts.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t u64() { return gen_(); }

  // [0, 1)
  double uniform() { return u64_to_unit(gen_()); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  std::uint64_t below(std::uint64_t n) {
    // modulo bias is irrelevant at the scales used here
    return gen_() % n;
  }

  double normal() {
    // Box-Muller, no spare caching
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  double lognormal(double mu, double sigma) { return std::exp(mu + sigma * normal()); }

  double exponential(double rate) {
    double u = uniform();
    while (u >= 1.0) u = uniform();
    return -std::log1p(-u) / rate;
  }

  // Marsaglia-Tsang; for shape < 1 uses the boost trick.
  double gamma(double shape) {
    if (shape < 1.0) {
      double u = uniform();
      while (u <= 1e-300) u = uniform();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  std::vector<double> dirichlet(std::size_t n, double alpha) {
    std::vector<double> out(n);
    double sum = 0.0;
    for (auto& x : out) {
      x = gamma(alpha);
      sum += x;
    }
    if (sum <= 0.0) {
      for (auto& x : out) x = 1.0 / static_cast<double>(n);
    } else {
      for (auto& x : out) x /= sum;
    }
    return out;
  }

  double gumbel(double scale) {
    double u = uniform();
    while (u <= 1e-300 || u >= 1.0) u = uniform();
    return -scale * std::log(-std::log(u));
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace newsrec
