#include "exq/common.hpp"

#include <algorithm>

namespace exq {

const char* modality_name(Modality m) {
  return m == Modality::kVisual ? "visual" : "text";
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw Error("Rng::below called with empty range");
  // Rejection keeps the draw unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<ItemId> sample_without_replacement(const std::vector<ItemId>& pool,
                                               std::size_t k, Rng& rng) {
  k = std::min(k, pool.size());
  std::vector<ItemId> work = pool;
  // Partial Fisher-Yates: the first k slots end up as the sample.
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.below(work.size() - i);
    std::swap(work[i], work[j]);
  }
  work.resize(k);
  std::sort(work.begin(), work.end());
  return work;
}

}  // namespace exq
