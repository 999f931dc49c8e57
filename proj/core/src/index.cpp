#include "exq/index.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <queue>

#include "binary_io.hpp"

namespace exq {
namespace {

constexpr std::string_view kIndexMagic = "EXQI";
constexpr std::uint32_t kNoParent = 0xFFFFFFFF;

void build_children(IndexLevel& upper, const IndexLevel& lower) {
  upper.child_offsets.assign(upper.size() + 1, 0);
  for (std::uint32_t p : lower.parent) ++upper.child_offsets[p + 1];
  std::partial_sum(upper.child_offsets.begin(), upper.child_offsets.end(),
                   upper.child_offsets.begin());
  upper.children.assign(lower.size(), 0);
  std::vector<std::uint32_t> cursor(upper.child_offsets.begin(), upper.child_offsets.end() - 1);
  for (std::uint32_t j = 0; j < lower.size(); ++j) {
    upper.children[cursor[lower.parent[j]]++] = j;
  }
}

// Decoded representatives, cached for the distance kernel.
using DecodedLevels = std::vector<std::vector<IdSortedVector>>;

std::vector<IdSortedVector> decode_level(const IndexLevel& level) {
  std::vector<IdSortedVector> out;
  out.reserve(level.size());
  for (const auto& v : level.vectors) out.push_back(sort_by_id(decompress(v)));
  return out;
}

// Greedy descent to `depth`. Above the target depth only nodes with children
// are candidates; an empty internal node is always shadowed by an identical
// lower-positioned sibling, so this only matters for malformed input.
std::uint32_t descend(const IdSortedVector& query, const std::vector<IndexLevel>& levels,
                      const DecodedLevels& decoded, std::size_t depth) {
  auto pick = [&](std::size_t l, auto&& candidates) {
    std::uint32_t best = kNoParent;
    double best_d = 0.0;
    for (std::uint32_t j : candidates) {
      if (l < depth && levels[l].child_offsets[j] == levels[l].child_offsets[j + 1]) continue;
      const double d = distance(query, decoded[l][j]);
      if (best == kNoParent || d < best_d) {
        best = j;
        best_d = d;
      }
    }
    return best;
  };

  std::vector<std::uint32_t> top(levels[0].size());
  std::iota(top.begin(), top.end(), 0U);
  std::uint32_t pos = pick(0, top);
  for (std::size_t l = 1; l <= depth && pos != kNoParent; ++l) {
    pos = pick(l, levels[l - 1].children_of(pos));
  }
  if (pos == kNoParent) throw Error("index has no route for descent");
  return pos;
}

}  // namespace

ClusterView ClusterIndex::cluster(std::uint32_t cluster) const {
  const auto begin = cluster_offsets_[cluster];
  const auto end = cluster_offsets_[cluster + 1];
  ClusterView view;
  view.id = cluster;
  view.representative = &levels_.back().vectors[cluster];
  view.items = {item_ids_.data() + begin, item_ids_.data() + end};
  view.vectors = {item_vectors_.data() + begin, item_vectors_.data() + end};
  return view;
}

std::size_t ClusterIndex::nonempty_cluster_count() const {
  std::size_t n = 0;
  for (std::size_t c = 0; c < cluster_count(); ++c) n += cluster_size(static_cast<std::uint32_t>(c)) > 0;
  return n;
}

ClusterIndex ClusterIndex::assemble(Modality modality, std::uint32_t dim, std::uint64_t seed,
                                    std::vector<IndexLevel> levels,
                                    std::vector<std::uint32_t> cluster_of_item,
                                    std::span<const CompressedVector> collection) {
  if (levels.empty() || levels.back().size() == 0) throw Error("index has no clusters");
  if (cluster_of_item.size() != collection.size()) throw Error("cluster assignment does not cover the collection");

  ClusterIndex index;
  index.modality_ = modality;
  index.dim_ = dim;
  index.seed_ = seed;
  for (std::size_t l = 0; l + 1 < levels.size(); ++l) build_children(levels[l], levels[l + 1]);
  levels.back().child_offsets.clear();
  levels.back().children.clear();

  const std::size_t clusters = levels.back().size();
  index.cluster_offsets_.assign(clusters + 1, 0);
  for (std::uint32_t c : cluster_of_item) {
    if (c >= clusters) throw Error("cluster assignment out of range");
    ++index.cluster_offsets_[c + 1];
  }
  std::partial_sum(index.cluster_offsets_.begin(), index.cluster_offsets_.end(),
                   index.cluster_offsets_.begin());

  const std::size_t n = collection.size();
  index.item_ids_.resize(n);
  index.item_vectors_.resize(n);
  index.location_.resize(n);
  std::vector<std::uint64_t> cursor(index.cluster_offsets_.begin(), index.cluster_offsets_.end() - 1);
  for (ItemId i = 0; i < n; ++i) {
    const std::uint64_t at = cursor[cluster_of_item[i]]++;
    index.item_ids_[at] = i;
    index.item_vectors_[at] = collection[i];
    index.location_[i] = at;
  }
  index.cluster_of_item_ = std::move(cluster_of_item);

  index.subtree_min_size_.resize(levels.size() > 1 ? levels.size() - 1 : 0);
  for (std::size_t l = levels.size() - 1; l-- > 0;) {
    auto& mins = index.subtree_min_size_[l];
    mins.assign(levels[l].size(), kUnlimited);
    for (std::size_t j = 0; j < levels[l].size(); ++j) {
      for (std::uint32_t child : levels[l].children_of(j)) {
        const std::uint64_t m = l + 1 == levels.size() - 1
                                    ? index.cluster_size(child)
                                    : index.subtree_min_size_[l + 1][child];
        if (m > 0) mins[j] = std::min(mins[j], m);
      }
    }
  }
  index.levels_ = std::move(levels);
  return index;
}

ClusterIndex create_index(std::span<const CompressedVector> collection, Modality modality,
                          std::uint32_t dim, std::uint64_t seed) {
  const std::size_t n = collection.size();
  if (n == 0) throw Error("empty collection");

  std::vector<std::vector<ItemId>> samples;
  {
    std::vector<ItemId> current(n);
    std::iota(current.begin(), current.end(), ItemId{0});
    if (n < kMinRootSize) {
      samples.push_back(std::move(current));
    } else {
      Rng rng(seed);
      while (true) {
        const std::size_t k = std::max<std::size_t>(1, current.size() / 100);
        samples.push_back(sample_without_replacement(current, k, rng));
        if (samples.back().size() < kMinRootSize) break;
        current = samples.back();
      }
    }
  }
  std::reverse(samples.begin(), samples.end());

  std::vector<IndexLevel> levels(samples.size());
  DecodedLevels decoded(samples.size());
  for (std::size_t l = 0; l < samples.size(); ++l) {
    auto& level = levels[l];
    level.items = std::move(samples[l]);
    level.vectors.reserve(level.items.size());
    for (ItemId id : level.items) level.vectors.push_back(collection[id]);
    decoded[l] = decode_level(level);
    if (l > 0) {
      level.parent.resize(level.size());
      for (std::size_t j = 0; j < level.size(); ++j) {
        level.parent[j] = descend(decoded[l][j], levels, decoded, l - 1);
      }
      build_children(levels[l - 1], level);
    }
  }

  std::vector<std::uint32_t> cluster_of_item(n);
  const std::size_t bottom = levels.size() - 1;
  for (ItemId i = 0; i < n; ++i) {
    cluster_of_item[i] = descend(sort_by_id(decompress(collection[i])), levels, decoded, bottom);
  }
  return ClusterIndex::assemble(modality, dim, seed, std::move(levels), std::move(cluster_of_item),
                                collection);
}

std::uint32_t assign(const CompressedVector& item, const ClusterIndex& index) {
  DecodedLevels decoded;
  decoded.reserve(index.level_count());
  for (const auto& level : index.levels()) decoded.push_back(decode_level(level));
  return descend(sort_by_id(decompress(item)), index.levels(), decoded, index.level_count() - 1);
}

std::vector<ScoredCluster> select_clusters(const ClusterIndex& index, const LinearModel& model,
                                           std::size_t b, std::uint64_t max_size) {
  if (b == 0 || index.level_count() == 0) return {};
  if (model.dim() != index.dim()) throw Error("model dimensionality does not match the index");

  // Best-first over the hierarchy: the highest-scoring open node is expanded
  // (or, at the bottom, emitted) next. Ties prefer deeper nodes, then lower
  // positions. The emission order does not depend on b.
  struct Open {
    double score;
    std::uint32_t level;
    std::uint32_t node;
  };
  auto worse = [](const Open& a, const Open& c) {
    if (a.score != c.score) return a.score < c.score;
    if (a.level != c.level) return a.level < c.level;
    return a.node > c.node;
  };
  std::priority_queue<Open, std::vector<Open>, decltype(worse)> open(worse);

  const std::size_t bottom = index.level_count() - 1;
  auto push = [&](std::size_t level, std::uint32_t node) {
    if (level == bottom) {
      const std::size_t size = index.cluster_size(node);
      if (size == 0 || size > max_size) return;
    } else if (index.subtree_min_size(level, node) > max_size) {
      return;
    }
    open.push({model.score(index.level(level).vectors[node]), static_cast<std::uint32_t>(level), node});
  };
  for (std::uint32_t j = 0; j < index.level(0).size(); ++j) push(0, j);

  std::vector<ScoredCluster> selected;
  while (!open.empty() && selected.size() < b) {
    const Open top = open.top();
    open.pop();
    if (top.level == bottom) {
      selected.push_back({top.node, top.score});
    } else {
      for (std::uint32_t child : index.level(top.level).children_of(top.node)) push(top.level + 1, child);
    }
  }
  std::sort(selected.begin(), selected.end(), [](const ScoredCluster& a, const ScoredCluster& c) {
    return a.score != c.score ? a.score > c.score : a.id < c.id;
  });
  return selected;
}

void save_index(const ClusterIndex& index, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  detail::LeWriter w(out);
  w.magic(kIndexMagic);
  w.u32(kIndexFormatVersion);
  w.u8(static_cast<std::uint8_t>(index.modality()));
  w.u32(static_cast<std::uint32_t>(index.level_count()));
  w.u64(index.cluster_count());
  w.u64(index.seed());
  w.u32(index.dim());
  w.u64(index.item_count());
  for (const auto& level : index.levels()) {
    w.u64(level.size());
    for (std::size_t j = 0; j < level.size(); ++j) {
      w.u32(level.items[j]);
      w.u32(level.parent.empty() ? kNoParent : level.parent[j]);
      for (auto word : level.vectors[j].words) w.u64(word);
    }
  }
  for (std::uint32_t c = 0; c < index.cluster_count(); ++c) {
    const auto view = index.cluster(c);
    w.u64(view.size());
    for (ItemId id : view.items) w.u32(id);
  }
  if (!out) throw Error("write failed for " + path.string());
}

ClusterIndex load_index(const std::filesystem::path& path,
                        std::span<const CompressedVector> collection) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  detail::LeReader r(in);
  r.expect_magic(kIndexMagic);
  if (r.u32() != kIndexFormatVersion) throw Error("unsupported index version");
  const std::uint8_t modality = r.u8();
  if (modality > 1) throw Error("invalid modality in section header");
  const std::uint32_t level_count = r.u32();
  const std::uint64_t cluster_count = r.u64();
  const std::uint64_t seed = r.u64();
  const std::uint32_t dim = r.u32();
  const std::uint64_t item_count = r.u64();
  if (level_count == 0) throw Error("invalid level count in section header");
  if (item_count != collection.size()) throw Error("index item count does not match the collection");

  std::vector<IndexLevel> levels(level_count);
  for (std::uint32_t l = 0; l < level_count; ++l) {
    r.section("level " + std::to_string(l));
    const std::uint64_t size = r.u64();
    if (size == 0 || size > item_count) throw Error("invalid size in section level " + std::to_string(l));
    auto& level = levels[l];
    level.items.resize(size);
    level.vectors.resize(size);
    if (l > 0) level.parent.resize(size);
    for (std::uint64_t j = 0; j < size; ++j) {
      level.items[j] = r.u32();
      const std::uint32_t parent = r.u32();
      for (auto& word : level.vectors[j].words) word = r.u64();
      if (level.items[j] >= item_count || level.vectors[j] != collection[level.items[j]]) {
        throw Error("representative mismatch in section level " + std::to_string(l));
      }
      if (l > 0) {
        if (parent >= levels[l - 1].size()) throw Error("invalid parent in section level " + std::to_string(l));
        level.parent[j] = parent;
      }
    }
  }
  if (levels.back().size() != cluster_count) throw Error("cluster count mismatch in section header");

  std::vector<std::uint32_t> cluster_of_item(item_count, kNoParent);
  r.section("clusters");
  for (std::uint64_t c = 0; c < cluster_count; ++c) {
    const std::uint64_t size = r.u64();
    if (size > item_count) throw Error("invalid cluster size in section clusters");
    ItemId prev = 0;
    for (std::uint64_t k = 0; k < size; ++k) {
      const ItemId id = r.u32();
      if (id >= item_count || cluster_of_item[id] != kNoParent || (k > 0 && id <= prev)) {
        throw Error("item coverage violated in section clusters");
      }
      cluster_of_item[id] = static_cast<std::uint32_t>(c);
      prev = id;
    }
  }
  if (std::find(cluster_of_item.begin(), cluster_of_item.end(), kNoParent) != cluster_of_item.end()) {
    throw Error("item coverage violated in section clusters");
  }
  if (!r.at_end()) throw Error("trailing bytes after section clusters");
  return ClusterIndex::assemble(static_cast<Modality>(modality), dim, seed, std::move(levels),
                                std::move(cluster_of_item), collection);
}

}  // namespace exq
