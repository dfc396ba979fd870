#pragma once

#include "parade/types.hpp"

#include <cmath>
#include <cstdint>
#include <string_view>

namespace parade {

// FNV-1a 64-bit hash; used for tokenization and for deriving per-object seeds.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// SplitMix64: small, fast, splittable, identical output on every platform.
// All randomness in the project flows through this generator so that runs
// are reproducible from the recorded seeds alone.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Derive an independent stream; splitting does not disturb this stream's
  // future output beyond the one draw it consumes.
  SplitMix64 split() { return SplitMix64(next_u64() ^ 0x6a09e667f3bcc909ull); }

  // Uniform in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, bound) via rejection, bias-free.
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % bound;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % bound;
  }

  // Standard normal via Box-Muller.
  double next_normal() {
    double u1 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Normal(0, std) resampled until it falls within +-bound_sigmas * std.
  double next_truncated_normal(double std_dev, double bound_sigmas = 2.0) {
    for (;;) {
      const double x = next_normal() * std_dev;
      if (std::abs(x) <= bound_sigmas * std_dev) return x;
    }
  }

 private:
  std::uint64_t state_;
};

// Fisher-Yates shuffle driven by SplitMix64.
template <typename T>
void seeded_shuffle(std::vector<T>& items, SplitMix64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(items[i - 1], items[j]);
  }
}

// k distinct values from [lo, hi), returned sorted ascending.
std::vector<int> sample_without_replacement(int lo, int hi, int k, SplitMix64& rng);

}  // namespace parade
