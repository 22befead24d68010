#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

namespace microt {

/// Deterministic random source. The standard distributions are
/// implementation-defined, so uniform/normal are generated here directly
/// from the mt19937_64 stream and reproduce bit-exactly everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(gen_() >> 11) * (1.0 / 9007199254740992.0);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Integer in [0, n), n > 0.
  std::int64_t below(std::int64_t n) {
    return static_cast<std::int64_t>(gen_() % static_cast<std::uint64_t>(n));
  }

  /// Standard normal via Box-Muller; one fresh pair per call, second value
  /// discarded to keep the stream position independent of call history.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::int64_t i = static_cast<std::int64_t>(v.size()) - 1; i > 0; --i) {
      std::swap(v[static_cast<std::size_t>(i)],
                v[static_cast<std::size_t>(below(i + 1))]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

/// Stable seed derivation so that every pipeline stage and every candidate
/// draws from its own stream: same (seed, tag) always gives the same stream.
inline std::uint64_t derive_seed(std::uint64_t seed, const std::string& tag) {
  // FNV-1a over the tag, folded into the base seed.
  std::uint64_t h = 14695981039346656037ull;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return seed ^ h;
}

inline std::uint64_t derive_seed(std::uint64_t seed, const std::string& tag, std::uint64_t n) {
  return derive_seed(seed, tag) + 0x9e3779b97f4a7c15ull * (n + 1);
}

}  // namespace microt
