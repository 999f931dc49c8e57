#include "exq/features.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>

namespace exq {
namespace {

std::atomic<std::uint64_t> g_clamped{0};

std::uint16_t quantize(double v) {
  return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * kQuantScale));
}

double dequantize(std::uint16_t q) { return static_cast<double>(q) / kQuantScale; }

void set_field(CompressedVector& cv, std::size_t slot, std::uint16_t q) {
  cv.words[1 + slot / 3] |= static_cast<std::uint64_t>(q) << (16 * (slot % 3));
}

void set_id(CompressedVector& cv, std::size_t slot, std::uint32_t id) {
  const std::uint64_t shift = 10 * slot;
  cv.words[0] = (cv.words[0] & ~(std::uint64_t{0x3FF} << shift)) |
                (static_cast<std::uint64_t>(id & 0x3FF) << shift);
}

FeatureStats stats_from_rows(std::uint32_t dim, std::size_t count,
                             const std::function<void(std::size_t, std::span<float>)>& read) {
  if (count == 0) throw Error("empty collection");
  FeatureStats stats;
  stats.n = count;
  stats.mu.assign(dim, 0.0);
  stats.sigma.assign(dim, 0.0);
  stats.strong_count.assign(dim, 0);

  std::vector<float> row(dim);
  for (std::size_t i = 0; i < count; ++i) {
    read(i, row);
    for (std::uint32_t f = 0; f < dim; ++f) stats.mu[f] += row[f];
  }
  for (auto& m : stats.mu) m /= static_cast<double>(count);

  for (std::size_t i = 0; i < count; ++i) {
    read(i, row);
    for (std::uint32_t f = 0; f < dim; ++f) {
      const double d = row[f] - stats.mu[f];
      stats.sigma[f] += d * d;
    }
  }
  for (auto& s : stats.sigma) s = std::sqrt(s / static_cast<double>(count));

  for (std::size_t i = 0; i < count; ++i) {
    read(i, row);
    for (std::uint32_t f = 0; f < dim; ++f) {
      if (row[f] > stats.mu[f] + stats.sigma[f]) ++stats.strong_count[f];
    }
  }
  return stats;
}

}  // namespace

DenseCollection::DenseCollection(std::uint32_t dim, std::vector<float> values)
    : dim_(dim), values_(std::move(values)) {
  if (dim_ == 0 || values_.size() % dim_ != 0) {
    throw Error("dense values do not form whole rows");
  }
}

void DenseCollection::push_back(std::span<const float> row) {
  if (row.size() != dim_) throw Error("mixed dimensionality");
  values_.insert(values_.end(), row.begin(), row.end());
}

FeatureStats compute_feature_stats(const DenseCollection& collection) {
  return stats_from_rows(collection.dim(), collection.size(),
                         [&](std::size_t i, std::span<float> out) {
                           auto r = collection.row(i);
                           std::copy(r.begin(), r.end(), out.begin());
                         });
}

FeatureStats compute_feature_stats(const RowSource& source) {
  return stats_from_rows(source.dim, source.count, source.read);
}

FeatureStats compute_feature_stats(std::span<const std::vector<float>> collection) {
  if (collection.empty()) throw Error("empty collection");
  const auto dim = static_cast<std::uint32_t>(collection.front().size());
  for (const auto& v : collection) {
    if (v.size() != dim) throw Error("mixed dimensionality");
  }
  return stats_from_rows(dim, collection.size(), [&](std::size_t i, std::span<float> out) {
    std::copy(collection[i].begin(), collection[i].end(), out.begin());
  });
}

double tfidf(double x, std::size_t feature, const FeatureStats& stats) {
  if (x == 0.0) return 0.0;
  const std::uint64_t strong = std::max<std::uint64_t>(stats.strong_count[feature], 1);
  return x * std::log(1.0 + static_cast<double>(stats.n) / static_cast<double>(strong));
}

CompressedVector CompressedVector::empty() {
  CompressedVector cv;
  for (std::size_t s = 0; s < kSlots; ++s) set_id(cv, s, kSentinelId);
  return cv;
}

std::size_t CompressedVector::size() const {
  std::size_t n = 0;
  while (n < kSlots && id(n) != kSentinelId) ++n;
  return n;
}

CompressedVector compress(std::span<const float> vector, const FeatureStats& stats) {
  if (vector.size() > kMaxDimension) throw Error("dimensionality exceeds id width");
  if (vector.size() != stats.dim()) throw Error("vector dimensionality does not match stats");

  struct Pick {
    std::uint32_t id;
    double value;
    double weight;
  };
  std::vector<Pick> picks;
  picks.reserve(vector.size());
  for (std::uint32_t f = 0; f < vector.size(); ++f) {
    double x = vector[f];
    if (!std::isfinite(x)) throw Error("non-finite feature value");
    if (x < 0.0 || x > 1.0) {
      if (g_clamped.fetch_add(1) == 0) {
        std::cerr << "exq: warning: feature values outside [0, 1] are clamped\n";
      }
      x = std::clamp(x, 0.0, 1.0);
    }
    if (x > 0.0) picks.push_back({f, x, tfidf(x, f, stats)});
  }

  const std::size_t keep = std::min(kSlots, picks.size());
  std::partial_sort(picks.begin(), picks.begin() + keep, picks.end(),
                    [](const Pick& a, const Pick& b) {
                      return a.weight != b.weight ? a.weight > b.weight : a.id < b.id;
                    });
  picks.resize(keep);
  std::sort(picks.begin(), picks.end(), [](const Pick& a, const Pick& b) {
    return a.value != b.value ? a.value > b.value : a.id < b.id;
  });

  CompressedVector cv = CompressedVector::empty();
  for (std::size_t s = 0; s < picks.size(); ++s) {
    set_id(cv, s, picks[s].id);
    const double field = s == 0 ? picks[s].value : picks[s].value / picks[s - 1].value;
    set_field(cv, s, quantize(field));
  }
  return cv;
}

DecodedVector decompress(const CompressedVector& cv) {
  DecodedVector out;
  double value = 0.0;
  for (std::size_t s = 0; s < kSlots; ++s) {
    const std::uint32_t id = cv.id(s);
    if (id == kSentinelId) break;
    value = s == 0 ? dequantize(cv.field(s)) : value * dequantize(cv.field(s));
    out.push_back({id, value});
  }
  return out;
}

double dot(const DecodedVector& v, std::span<const double> weights) {
  double sum = 0.0;
  for (const auto& e : v) {
    if (e.id >= weights.size()) throw Error("id out of range");
    sum += e.value * weights[e.id];
  }
  return sum;
}

double dot(const CompressedVector& cv, std::span<const double> weights) {
  return dot(decompress(cv), weights);
}

IdSortedVector sort_by_id(const DecodedVector& v) {
  IdSortedVector out;
  for (const auto& e : v) {
    std::size_t j = out.size;
    while (j > 0 && out.entries[j - 1].id > e.id) {
      out.entries[j] = out.entries[j - 1];
      --j;
    }
    out.entries[j] = e;
    ++out.size;
  }
  return out;
}

double distance(const IdSortedVector& a, const IdSortedVector& b) {
  double sum = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size || j < b.size) {
    double d;
    if (j == b.size || (i < a.size && a.entries[i].id < b.entries[j].id)) {
      d = a.entries[i++].value;
    } else if (i == a.size || b.entries[j].id < a.entries[i].id) {
      d = b.entries[j++].value;
    } else {
      d = a.entries[i++].value - b.entries[j++].value;
    }
    sum += d * d;
  }
  return std::sqrt(sum);
}

double distance(const CompressedVector& a, const CompressedVector& b) {
  return distance(sort_by_id(decompress(a)), sort_by_id(decompress(b)));
}

std::uint64_t clamped_value_count() { return g_clamped.load(); }

}  // namespace exq
