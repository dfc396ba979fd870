#include "parade/rng.hpp"

#include <algorithm>
#include <numeric>

namespace parade {

std::vector<int> sample_without_replacement(int lo, int hi, int k, SplitMix64& rng) {
  const int n = hi - lo;
  if (k < 0 || k > n) throw ConfigError("sample_without_replacement: k out of range");
  std::vector<int> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), lo);
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n - i)));
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  pool.resize(static_cast<std::size_t>(k));
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace parade
