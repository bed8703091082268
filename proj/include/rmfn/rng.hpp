#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace rmfn {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::span<const unsigned char> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(std::string_view text) {
  return fnv1a64(std::span<const unsigned char>(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

/// Seeded 64-bit generator. Conversions to doubles and indices are done by
/// hand so streams are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  /// Independent stream keyed by a label, e.g. Rng::stream(seed, "shuffle").
  static Rng stream(std::uint64_t seed, std::string_view label) {
    return Rng(splitmix64(seed) ^ fnv1a64(label));
  }

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : static_cast<std::uint64_t>(uniform() * static_cast<double>(n)); }

  /// Uniform integer in [lo, hi].
  long range(long lo, long hi) { return lo + static_cast<long>(below(static_cast<std::uint64_t>(hi - lo + 1))); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace rmfn
