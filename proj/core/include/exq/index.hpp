#pragma once

// Hierarchical cluster-pruning index over compressed vectors of one modality.
//
// Building samples 1% of the collection as representatives, recursively, until
// fewer than 100 remain; that smallest set is the top level. Every vector of a
// level is attached to its nearest representative one level up by greedy
// descent, and the full collection is finally assigned to the bottom level,
// whose representatives define the clusters. There is a single assignment
// pass (no k-means refinement).

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "exq/common.hpp"
#include "exq/features.hpp"
#include "exq/learner.hpp"

namespace exq {

inline constexpr std::uint32_t kIndexFormatVersion = 1;
inline constexpr std::size_t kMinRootSize = 100;

struct IndexLevel {
  std::vector<ItemId> items;                // representative item ids, ascending
  std::vector<CompressedVector> vectors;
  std::vector<std::uint32_t> parent;        // position in the level above; empty for the top
  std::vector<std::uint32_t> child_offsets; // CSR into the level below, size()+1 entries
  std::vector<std::uint32_t> children;

  std::size_t size() const { return items.size(); }
  std::span<const std::uint32_t> children_of(std::size_t node) const {
    return {children.data() + child_offsets[node], children.data() + child_offsets[node + 1]};
  }
  bool operator==(const IndexLevel&) const = default;
};

struct ClusterView {
  std::uint32_t id = 0;
  const CompressedVector* representative = nullptr;
  std::span<const ItemId> items;
  std::span<const CompressedVector> vectors;

  std::size_t size() const { return items.size(); }
};

struct ScoredCluster {
  std::uint32_t id = 0;
  double score = 0.0;

  bool operator==(const ScoredCluster&) const = default;
};

class ClusterIndex {
 public:
  ClusterIndex() = default;

  Modality modality() const { return modality_; }
  std::uint32_t dim() const { return dim_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t item_count() const { return item_ids_.size(); }
  std::size_t level_count() const { return levels_.size(); }
  const IndexLevel& level(std::size_t l) const { return levels_[l]; }
  const std::vector<IndexLevel>& levels() const { return levels_; }

  std::size_t cluster_count() const { return cluster_offsets_.empty() ? 0 : cluster_offsets_.size() - 1; }
  std::size_t cluster_size(std::uint32_t cluster) const {
    return cluster_offsets_[cluster + 1] - cluster_offsets_[cluster];
  }
  ClusterView cluster(std::uint32_t cluster) const;
  std::size_t nonempty_cluster_count() const;

  // Compressed vector of an item, found through the location array.
  const CompressedVector& vector_of(ItemId item) const { return item_vectors_[location_[item]]; }
  std::uint32_t cluster_of(ItemId item) const { return cluster_of_item_[item]; }

  // Smallest non-empty cluster size below an internal node (kUnlimited when
  // the whole subtree is empty).
  std::uint64_t subtree_min_size(std::size_t level, std::size_t node) const {
    return subtree_min_size_[level][node];
  }

  // Builds the derived tables (child lists, cluster CSR, location array) from
  // levels whose items/vectors/parent are filled and a per-item cluster
  // assignment. Throws if the assignment does not cover the collection.
  static ClusterIndex assemble(Modality modality, std::uint32_t dim, std::uint64_t seed,
                               std::vector<IndexLevel> levels,
                               std::vector<std::uint32_t> cluster_of_item,
                               std::span<const CompressedVector> collection);

  bool operator==(const ClusterIndex&) const = default;

 private:

  Modality modality_ = Modality::kVisual;
  std::uint32_t dim_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<IndexLevel> levels_;  // top first; the bottom level defines the clusters
  std::vector<std::uint64_t> cluster_offsets_;
  std::vector<ItemId> item_ids_;                // cluster-major, ascending within a cluster
  std::vector<CompressedVector> item_vectors_;  // parallel to item_ids_
  std::vector<std::uint64_t> location_;         // item id -> position in item_ids_
  std::vector<std::uint32_t> cluster_of_item_;
  std::vector<std::vector<std::uint64_t>> subtree_min_size_;  // internal levels only
};

// `collection[i]` is the vector of item i.
ClusterIndex create_index(std::span<const CompressedVector> collection, Modality modality,
                          std::uint32_t dim, std::uint64_t seed);

// Greedy top-down descent; ties go to the lower representative position.
std::uint32_t assign(const CompressedVector& item, const ClusterIndex& index);

// Up to b non-empty clusters with size <= max_size, best representative score
// first. The hierarchy is searched best-first by representative score, so the
// result for a larger b always contains the result for a smaller one.
std::vector<ScoredCluster> select_clusters(const ClusterIndex& index, const LinearModel& model,
                                           std::size_t b, std::uint64_t max_size = kUnlimited);

// File layout ("EXQI", little-endian):
//   magic, u32 version, u8 modality, u32 levels, u64 cluster count, u64 seed,
//   u32 dim, u64 item count,
//   per level (top first): u64 size, then per representative
//     u32 item id, u32 parent position (0xFFFFFFFF at the top), 3 x u64 words,
//   per cluster: u64 size, then that many u32 item ids (ascending).
// Item vectors are not stored; load_index takes them from the compressed
// collection of the same modality.
void save_index(const ClusterIndex& index, const std::filesystem::path& path);
ClusterIndex load_index(const std::filesystem::path& path,
                        std::span<const CompressedVector> collection);

}  // namespace exq
