#pragma once

// Desk-scale evaluation: synthetic collections with planted categories,
// simulated actors and parameter sweeps reporting precision and latency.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "exq/collection_io.hpp"
#include "exq/features.hpp"
#include "exq/retrieval.hpp"
#include "exq/session.hpp"

namespace exq {

inline constexpr std::int32_t kBackground = -1;
inline constexpr std::int32_t kDuplicate = -2;

struct SyntheticSpec {
  std::size_t n = 100'000;
  std::uint32_t dim_visual = 200;
  std::uint32_t dim_text = 50;
  std::size_t categories = 10;
  // Probability that a category member shows its category signal in a given
  // modality. Without it a member looks like background in the visual modality
  // and is untagged (all-zero) in the text modality.
  double category_strength = 0.8;
  // Share of the collection that belongs to some category (at least 200 items
  // per category are planted).
  double category_fraction = 0.2;
  // Share of identical "dead" items: one fixed visual vector, empty text.
  double duplicate_fraction = 0.0;
  std::uint64_t seed = 1;
};

// Rows are generated on demand from (seed, modality, item), so collections
// larger than memory can be streamed.
class SyntheticCollection {
 public:
  explicit SyntheticCollection(SyntheticSpec spec);

  const SyntheticSpec& spec() const { return spec_; }
  std::size_t size() const { return spec_.n; }
  std::uint32_t dim(Modality m) const {
    return m == Modality::kVisual ? spec_.dim_visual : spec_.dim_text;
  }
  std::int32_t category(ItemId item) const { return category_[item]; }
  const std::vector<std::int32_t>& categories() const { return category_; }
  std::vector<ItemId> members(std::int32_t category) const;

  void row(Modality m, ItemId item, std::span<float> out) const;
  RowSource source(Modality m) const;
  DenseCollection dense(Modality m) const;

 private:
  SyntheticSpec spec_;
  std::vector<std::int32_t> category_;
  std::vector<std::vector<std::uint32_t>> signal_visual_;
  std::vector<std::vector<std::uint32_t>> signal_text_;
};

// Writes visual.exqd, text.exqd and categories.csv ("item,category") into dir.
void write_synthetic_files(const SyntheticCollection& collection, const std::filesystem::path& dir);

// Statistics pass followed by compression, streaming over the rows.
CompressedCollection compress_source(const RowSource& source);

Corpus build_corpus(const CompressedCollection& visual, const CompressedCollection& text,
                    std::uint64_t seed);

struct ActorProfile {
  std::vector<ItemId> relevance;  // ascending
  ItemFilter relevant;
  std::vector<ItemId> pretrain_positives;
  std::vector<ItemId> pretrain_negatives;
};

// Draws up to `positives` pretraining positives from the relevance set and
// `negatives` random pretraining negatives from items outside the relevance set.
ActorProfile make_actor(std::vector<ItemId> relevance, std::size_t item_count, std::uint64_t seed,
                        std::size_t positives = 100, std::size_t negatives = 200);

struct RoundRecord {
  double precision = 0.0;
  double latency_ms = 0.0;    // whole round: training + retrieval
  double retrieval_ms = 0.0;  // select + score + fuse
  std::size_t items_scored = 0;
  std::vector<ItemId> suggestions;
};

struct RunReport {
  std::vector<RoundRecord> rounds;

  double mean_precision() const;
  // Median over rounds [from, end), 0-based.
  double median_latency_ms(std::size_t from = 1) const;
  double median_retrieval_ms(std::size_t from = 1) const;
  double mean_items_scored() const;
};

// Runs the protocol: pretrain, then per round take k suggestions, score them
// against the relevance set and feed the relevant ones back as positives.
RunReport run_actor(const Corpus& corpus, const ActorProfile& actor, const RetrievalParams& params,
                    std::size_t rounds = 10, std::uint64_t session_seed = 1,
                    const Retriever& retriever = {});

struct SweepConfig {
  std::string id;
  RetrievalParams params;
};

// Cross product of the listed values over a base configuration.
std::vector<SweepConfig> make_grid(const RetrievalParams& base, std::span<const std::size_t> b,
                                   std::span<const std::uint64_t> max_cluster_size,
                                   std::span<const std::size_t> segments,
                                   std::span<const std::size_t> workers);

inline constexpr const char* kSweepCsvHeader =
    "config_id,b,S_m,S_c,w,round,precision,latency_ms,items_scored";

// One row per (config, round); values averaged over actors.
std::string sweep(const Corpus& corpus, std::span<const ActorProfile> actors,
                  std::span<const SweepConfig> grid, std::size_t rounds = 10,
                  std::uint64_t session_seed = 1);

}  // namespace exq
