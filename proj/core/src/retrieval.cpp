#include "exq/retrieval.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <thread>
#include <unordered_set>

namespace exq {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// Heap order: the worst kept item sits at the front.
bool better(const ScoredItem& a, const ScoredItem& b) {
  return a.score != b.score ? a.score > b.score : a.id < b.id;
}

struct SegmentOutput {
  SuggestionList suggestions;
  std::size_t clusters_scored = 0;
  std::size_t items_scored = 0;
};

}  // namespace

void RetrievalParams::validate() const {
  if (k < 1) throw Error("k must be at least 1");
  if (r < k) throw Error("r must be at least k");
  if (workers < 1) throw Error("workers must be at least 1");
  if (segments < 1) throw Error("segments must be at least 1");
  if (segments % workers != 0) throw Error("segments must be divisible by workers");
  if (b < segments) throw Error("b must be at least the segment count");
}

std::vector<ItemId> SuggestionList::ids() const {
  std::vector<ItemId> out;
  out.reserve(items.size());
  for (const auto& c : items) out.push_back(c.id);
  return out;
}

std::vector<ScoredItem> score_cluster_set(const ClusterIndex& index,
                                          std::span<const std::uint32_t> clusters,
                                          const LinearModel& model, std::size_t r,
                                          const ItemFilter& excluded,
                                          std::span<const ItemId> also_excluded,
                                          std::size_t* items_scored) {
  std::vector<ScoredItem> heap;
  if (r == 0) return heap;
  heap.reserve(r);
  std::size_t scored = 0;
  for (std::uint32_t c : clusters) {
    const ClusterView view = index.cluster(c);
    for (std::size_t i = 0; i < view.size(); ++i) {
      const ItemId id = view.items[i];
      if (excluded.contains(id)) continue;
      if (!also_excluded.empty() &&
          std::binary_search(also_excluded.begin(), also_excluded.end(), id)) {
        continue;
      }
      ++scored;
      const ScoredItem item{id, model.score(view.vectors[i])};
      if (heap.size() < r) {
        heap.push_back(item);
        std::push_heap(heap.begin(), heap.end(), better);
      } else if (better(item, heap.front())) {
        std::pop_heap(heap.begin(), heap.end(), better);
        heap.back() = item;
        std::push_heap(heap.begin(), heap.end(), better);
      }
    }
  }
  std::sort(heap.begin(), heap.end(), better);
  if (items_scored != nullptr) *items_scored += scored;
  return heap;
}

SuggestionList fuse_candidates(std::vector<Candidate> pool, std::size_t k) {
  {
    std::unordered_set<ItemId> seen;
    std::erase_if(pool, [&](const Candidate& c) { return !seen.insert(c.id).second; });
  }
  const std::size_t n = pool.size();
  std::vector<std::size_t> order(n);

  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = pool[a];
    const auto& y = pool[b];
    return x.score_visual != y.score_visual ? x.score_visual > y.score_visual : x.id < y.id;
  });
  for (std::size_t i = 0; i < n; ++i) pool[order[i]].rank_visual = static_cast<std::uint32_t>(i + 1);

  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = pool[a];
    const auto& y = pool[b];
    return x.score_text != y.score_text ? x.score_text > y.score_text : x.id < y.id;
  });
  for (std::size_t i = 0; i < n; ++i) pool[order[i]].rank_text = static_cast<std::uint32_t>(i + 1);

  for (auto& c : pool) c.avg_rank = (c.rank_visual + c.rank_text) / 2.0;
  std::sort(pool.begin(), pool.end(), [](const Candidate& a, const Candidate& b) {
    return a.avg_rank != b.avg_rank ? a.avg_rank < b.avg_rank : a.id < b.id;
  });
  if (pool.size() > k) pool.resize(k);
  return SuggestionList{std::move(pool)};
}

SuggestionList fuse(std::span<const ScoredItem> visual, std::span<const ScoredItem> text,
                    std::size_t k, const ScoreLookup& visual_score, const ScoreLookup& text_score) {
  std::vector<Candidate> pool;
  pool.reserve(visual.size() + text.size());
  std::unordered_set<ItemId> in_visual;
  for (const auto& v : visual) {
    if (!in_visual.insert(v.id).second) continue;
    pool.push_back({.id = v.id, .score_visual = v.score, .score_text = text_score(v.id)});
  }
  for (const auto& t : text) {
    if (in_visual.contains(t.id)) continue;
    pool.push_back({.id = t.id, .score_visual = visual_score(t.id), .score_text = t.score});
  }
  return fuse_candidates(std::move(pool), k);
}

std::vector<std::size_t> segment_bounds(std::size_t n, std::size_t segments) {
  std::vector<std::size_t> bounds(segments + 1, 0);
  const std::size_t base = n / segments;
  const std::size_t extra = n % segments;
  for (std::size_t s = 0; s < segments; ++s) {
    bounds[s + 1] = bounds[s] + base + (s < extra ? 1 : 0);
  }
  return bounds;
}

RetrievalResult retrieve(const ModelPair& models, const RetrievalParams& params,
                         const Corpus& corpus, const ItemFilter& excluded) {
  params.validate();
  if (models.visual.dim() != corpus.visual.dim() || models.text.dim() != corpus.text.dim()) {
    throw Error("no model");
  }

  RetrievalResult result;
  auto t0 = Clock::now();
  const auto sel_visual = select_clusters(corpus.visual, models.visual, params.b,
                                          params.max_cluster_size);
  const auto sel_text = select_clusters(corpus.text, models.text, params.b,
                                        params.max_cluster_size);
  result.stats.select_ms = ms_since(t0);

  auto ids_of = [](const std::vector<ScoredCluster>& sel) {
    std::vector<std::uint32_t> ids;
    ids.reserve(sel.size());
    for (const auto& s : sel) ids.push_back(s.id);
    return ids;
  };
  const auto clusters_visual = ids_of(sel_visual);
  const auto clusters_text = ids_of(sel_text);
  const auto bounds_visual = segment_bounds(clusters_visual.size(), params.segments);
  const auto bounds_text = segment_bounds(clusters_text.size(), params.segments);

  const ScoreLookup visual_score = [&](ItemId id) {
    return models.visual.score(corpus.visual.vector_of(id));
  };
  const ScoreLookup text_score = [&](ItemId id) {
    return models.text.score(corpus.text.vector_of(id));
  };

  std::vector<SegmentOutput> segments(params.segments);
  auto run_segment = [&](std::size_t s) {
    SegmentOutput& out = segments[s];
    std::span<const std::uint32_t> vis(clusters_visual.data() + bounds_visual[s],
                                       bounds_visual[s + 1] - bounds_visual[s]);
    std::span<const std::uint32_t> txt(clusters_text.data() + bounds_text[s],
                                       bounds_text[s + 1] - bounds_text[s]);
    out.clusters_scored = vis.size() + txt.size();
    const auto cand_visual = score_cluster_set(corpus.visual, vis, models.visual, params.r,
                                               excluded, {}, &out.items_scored);
    std::vector<ItemId> taken;
    taken.reserve(cand_visual.size());
    for (const auto& c : cand_visual) taken.push_back(c.id);
    std::sort(taken.begin(), taken.end());
    const auto cand_text = score_cluster_set(corpus.text, txt, models.text, params.r, excluded,
                                             taken, &out.items_scored);
    out.suggestions = fuse(cand_visual, cand_text, params.k, visual_score, text_score);
  };

  t0 = Clock::now();
  const std::size_t per_worker = params.segments / params.workers;
  auto run_worker = [&](std::size_t w) {
    for (std::size_t s = w * per_worker; s < (w + 1) * per_worker; ++s) run_segment(s);
  };
  if (params.workers == 1) {
    run_worker(0);
  } else {
    std::vector<std::jthread> threads;
    threads.reserve(params.workers);
    for (std::size_t w = 0; w < params.workers; ++w) threads.emplace_back(run_worker, w);
  }
  result.stats.score_ms = ms_since(t0);

  t0 = Clock::now();
  for (const auto& seg : segments) {
    result.stats.clusters_scored += seg.clusters_scored;
    result.stats.items_scored += seg.items_scored;
  }
  if (params.segments == 1) {
    result.suggestions = std::move(segments.front().suggestions);
  } else {
    std::vector<Candidate> pool;
    for (const auto& seg : segments) {
      pool.insert(pool.end(), seg.suggestions.items.begin(), seg.suggestions.items.end());
    }
    result.suggestions = fuse_candidates(std::move(pool), params.k);
  }
  result.stats.fuse_ms = ms_since(t0);
  return result;
}

}  // namespace exq
