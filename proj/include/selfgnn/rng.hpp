#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace selfgnn {

/// Seeded random stream. The engine is std::mt19937_64, whose output sequence
/// is fixed by the standard; the value mappings below are implemented here so
/// that results do not depend on the standard library's distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Derives an independent stream for a named purpose ("init", "dropout", ...).
  static Rng substream(std::uint64_t seed, std::string_view name);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n), unbiased (rejection sampling).
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via Box-Muller.
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::vector<int> permutation(int n);

 private:
  std::mt19937_64 engine_;
};

/// splitmix64 finalizer; used to combine seeds.
std::uint64_t mix64(std::uint64_t x);

}  // namespace selfgnn
