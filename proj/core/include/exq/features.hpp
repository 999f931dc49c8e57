#pragma once

// Feature statistics, TF-IDF feature selection and the 24-byte compressed
// vector format used for every modality.
//
// Compressed layout (all little-endian u64 words):
//   word 0: six 10-bit feature ids, slot 0 in bits 0-9 ... slot 5 in bits 50-59
//   word 1: bits 0-15 top value v1, bits 16-31 ratio r2, bits 32-47 ratio r3
//   word 2: bits 0-15 r4, bits 16-31 r5, bits 32-47 r6
// Slots are ordered by value, largest first. r_i is value_i / value_{i-1} of
// the original values; every 16-bit field is a linear quantization of [0, 1]
// with round-to-nearest. Unused slots carry id
// 1023 and ratio 0.

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "exq/common.hpp"

namespace exq {

inline constexpr std::size_t kSlots = 6;
inline constexpr std::uint32_t kSentinelId = 1023;
inline constexpr std::uint32_t kMaxDimension = 1023;
inline constexpr double kQuantScale = 65535.0;

// Row-major float matrix: one row per item, one column per feature.
class DenseCollection {
 public:
  DenseCollection() = default;
  explicit DenseCollection(std::uint32_t dim) : dim_(dim) {}
  DenseCollection(std::uint32_t dim, std::vector<float> values);

  std::uint32_t dim() const { return dim_; }
  std::size_t size() const { return dim_ == 0 ? 0 : values_.size() / dim_; }
  bool empty() const { return size() == 0; }

  std::span<const float> row(std::size_t i) const {
    return {values_.data() + i * dim_, dim_};
  }
  std::span<float> row(std::size_t i) { return {values_.data() + i * dim_, dim_}; }

  void push_back(std::span<const float> row);
  void reserve(std::size_t rows) { values_.reserve(rows * dim_); }
  const std::vector<float>& values() const { return values_; }

 private:
  std::uint32_t dim_ = 0;
  std::vector<float> values_;
};

// Pull-based row access, for collections that are generated or streamed
// instead of held in memory.
struct RowSource {
  std::uint32_t dim = 0;
  std::size_t count = 0;
  std::function<void(std::size_t index, std::span<float> out)> read;
};

struct FeatureStats {
  std::uint64_t n = 0;
  std::vector<double> mu;
  std::vector<double> sigma;
  std::vector<std::uint64_t> strong_count;  // items with y_f > mu_f + sigma_f

  std::uint32_t dim() const { return static_cast<std::uint32_t>(mu.size()); }
};

FeatureStats compute_feature_stats(const DenseCollection& collection);
FeatureStats compute_feature_stats(const RowSource& source);
FeatureStats compute_feature_stats(std::span<const std::vector<float>> collection);

// x_f * ln(1 + N / strong_count[f]); a zero count is treated as 1.
double tfidf(double x, std::size_t feature, const FeatureStats& stats);

struct SparseEntry {
  std::uint32_t id = 0;
  double value = 0.0;

  bool operator==(const SparseEntry&) const = default;
};

// Up to six (id, value) pairs in slot order (value non-increasing).
class DecodedVector {
 public:
  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  const SparseEntry& operator[](std::size_t i) const { return entries_[i]; }
  const SparseEntry* begin() const { return entries_.data(); }
  const SparseEntry* end() const { return entries_.data() + size_; }

  void push_back(SparseEntry e) { entries_[size_++] = e; }

 private:
  std::array<SparseEntry, kSlots> entries_{};
  std::size_t size_ = 0;
};

struct CompressedVector {
  std::array<std::uint64_t, 3> words{};

  static CompressedVector empty();

  std::uint32_t id(std::size_t slot) const {
    return static_cast<std::uint32_t>((words[0] >> (10 * slot)) & 0x3FF);
  }
  std::uint16_t field(std::size_t slot) const {
    const std::uint64_t w = words[1 + slot / 3];
    return static_cast<std::uint16_t>(w >> (16 * (slot % 3)));
  }
  // Number of leading slots holding real features.
  std::size_t size() const;

  auto operator<=>(const CompressedVector&) const = default;
};
static_assert(sizeof(CompressedVector) == 24);

CompressedVector compress(std::span<const float> vector, const FeatureStats& stats);
DecodedVector decompress(const CompressedVector& cv);

// Sum over stored slots of value * weights[id]. Throws when an id does not
// fit the weight vector.
double dot(const CompressedVector& cv, std::span<const double> weights);
double dot(const DecodedVector& v, std::span<const double> weights);

// Euclidean distance over the union of both sparse supports.
double distance(const CompressedVector& a, const CompressedVector& b);

// Entries sorted by feature id; the form used by the distance kernel.
struct IdSortedVector {
  std::array<SparseEntry, kSlots> entries{};
  std::uint8_t size = 0;
};
IdSortedVector sort_by_id(const DecodedVector& v);
double distance(const IdSortedVector& a, const IdSortedVector& b);

// Number of input values clamped into [0, 1] by compress() so far.
std::uint64_t clamped_value_count();

}  // namespace exq
