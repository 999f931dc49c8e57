#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace exq {

using ItemId = std::uint32_t;

enum class Modality : std::uint8_t { kVisual = 0, kText = 1 };

const char* modality_name(Modality m);

// All library failures surface as exq::Error; the message is meant for users.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Deterministic PRNG. mt19937_64's output sequence is fixed by the standard,
// the distributions in <random> are not, so bounded draws are done here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

  // Uniform double in [0, 1).
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

 private:
  std::mt19937_64 engine_;
};

// splitmix64 finalizer; used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

// k distinct values drawn uniformly from `pool`, returned in ascending order.
std::vector<ItemId> sample_without_replacement(const std::vector<ItemId>& pool,
                                               std::size_t k, Rng& rng);

// Dense bitset over item ids, used for exclusion checks in hot loops.
class ItemFilter {
 public:
  ItemFilter() = default;
  explicit ItemFilter(std::size_t universe) : bits_((universe + 63) / 64, 0), universe_(universe) {}

  std::size_t universe() const { return universe_; }
  std::size_t count() const { return count_; }

  bool contains(ItemId id) const {
    return id < universe_ && (bits_[id >> 6] >> (id & 63) & 1U) != 0;
  }
  void insert(ItemId id) {
    if (id >= universe_) throw Error("item id out of range");
    if (!contains(id)) ++count_;
    bits_[id >> 6] |= std::uint64_t{1} << (id & 63);
  }
  void erase(ItemId id) {
    if (!contains(id)) return;
    --count_;
    bits_[id >> 6] &= ~(std::uint64_t{1} << (id & 63));
  }

 private:
  std::vector<std::uint64_t> bits_;
  std::size_t universe_ = 0;
  std::size_t count_ = 0;
};

inline constexpr std::uint64_t kUnlimited = std::numeric_limits<std::uint64_t>::max();

}  // namespace exq
