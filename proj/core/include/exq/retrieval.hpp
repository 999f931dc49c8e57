#pragma once

// Suggestion retrieval: cluster selection per modality, top-r scoring inside
// the selected clusters, and average-rank fusion of the two modalities.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "exq/common.hpp"
#include "exq/index.hpp"
#include "exq/learner.hpp"

namespace exq {

struct RetrievalParams {
  std::size_t b = 64;         // clusters scored per modality
  std::size_t r = 50;         // candidates per modality
  std::size_t k = 25;         // suggestions returned
  std::size_t workers = 1;    // w
  std::size_t segments = 1;   // S_c
  std::uint64_t max_cluster_size = kUnlimited;  // S_m

  // Throws exq::Error describing the first violated constraint.
  void validate() const;

  bool operator==(const RetrievalParams&) const = default;
};

struct ScoredItem {
  ItemId id = 0;
  double score = 0.0;

  bool operator==(const ScoredItem&) const = default;
};

struct Candidate {
  ItemId id = 0;
  double score_visual = 0.0;
  double score_text = 0.0;
  std::uint32_t rank_visual = 0;
  std::uint32_t rank_text = 0;
  double avg_rank = 0.0;

  bool operator==(const Candidate&) const = default;
};

struct SuggestionList {
  std::vector<Candidate> items;

  std::vector<ItemId> ids() const;
  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
  bool operator==(const SuggestionList&) const = default;
};

struct RetrievalStats {
  double select_ms = 0.0;
  double score_ms = 0.0;
  double fuse_ms = 0.0;
  std::size_t clusters_scored = 0;
  std::size_t items_scored = 0;
};

struct RetrievalResult {
  SuggestionList suggestions;
  RetrievalStats stats;
};

// The two per-modality cluster indexes of one collection.
struct Corpus {
  ClusterIndex visual;
  ClusterIndex text;

  std::size_t size() const { return visual.item_count(); }
};

struct ModelPair {
  LinearModel visual;
  LinearModel text;
};

// Scores every item of `clusters` and keeps the best r by (score desc, id asc).
// Items in `excluded`, or in the ascending list `also_excluded`, are skipped.
std::vector<ScoredItem> score_cluster_set(const ClusterIndex& index,
                                          std::span<const std::uint32_t> clusters,
                                          const LinearModel& model, std::size_t r,
                                          const ItemFilter& excluded,
                                          std::span<const ItemId> also_excluded = {},
                                          std::size_t* items_scored = nullptr);

using ScoreLookup = std::function<double(ItemId)>;

// Pools both candidate lists (text entries already present in the visual list
// are dropped), fills in the missing modality score through the lookups,
// ranks the pool per modality and returns the k best by average rank.
SuggestionList fuse(std::span<const ScoredItem> visual, std::span<const ScoredItem> text,
                    std::size_t k, const ScoreLookup& visual_score, const ScoreLookup& text_score);

// Average-rank fusion over candidates whose two scores are already known.
// Duplicate ids keep their first occurrence.
SuggestionList fuse_candidates(std::vector<Candidate> pool, std::size_t k);

// Splits n selected clusters into `segments` contiguous runs; the first
// (n mod segments) runs get one extra cluster. Returns segments+1 offsets.
std::vector<std::size_t> segment_bounds(std::size_t n, std::size_t segments);

// Full round: select b clusters per modality, segment them, score and fuse
// each segment, then fuse the pooled segment suggestions. Segments are spread
// over `params.workers` threads; the result does not depend on the count.
RetrievalResult retrieve(const ModelPair& models, const RetrievalParams& params,
                         const Corpus& corpus, const ItemFilter& excluded);

}  // namespace exq
