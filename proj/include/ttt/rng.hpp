#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace ttt {

/// Seeded generator whose draws are identical across standard libraries:
/// mt19937_64 output is fixed by the standard, and the bounded/real draws
/// below avoid the implementation-defined std distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  /// Uniform in [lo, hi].
  std::int64_t between(std::int64_t lo, std::int64_t hi);
  /// Uniform in [0, 1) with 53 random bits.
  double unit();
  bool bernoulli(double p) { return unit() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

  /// Random permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::mt19937_64 engine_;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 14695981039346656037ull);

/// Stable per-stage seed from (run seed, task id, stage name).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view task_id, std::string_view stage);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

/// 16-hex-digit content hash.
std::string fingerprint(std::string_view bytes);

}  // namespace ttt
