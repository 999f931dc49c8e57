#include "exq/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace exq {
namespace {

constexpr std::size_t kVisualSignal = 6;
constexpr std::size_t kTextSignal = 4;
constexpr std::size_t kSignalPerItem = 4;

std::vector<std::uint32_t> pick_features(std::uint32_t dim, std::size_t count, Rng& rng) {
  std::vector<std::uint32_t> all(dim);
  for (std::uint32_t f = 0; f < dim; ++f) all[f] = f;
  for (std::size_t i = 0; i < count; ++i) std::swap(all[i], all[i + rng.below(dim - i)]);
  all.resize(count);
  return all;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

std::string format_size(std::uint64_t v) {
  return v == kUnlimited ? std::string("inf") : std::to_string(v);
}

}  // namespace

SyntheticCollection::SyntheticCollection(SyntheticSpec spec) : spec_(spec) {
  if (spec_.n == 0) throw Error("synthetic collection must not be empty");
  if (spec_.n < spec_.categories * 200) throw Error("infeasible synthetic parameters: N < categories * 200");
  if (spec_.dim_visual < kVisualSignal || spec_.dim_text < kTextSignal ||
      spec_.dim_visual > kMaxDimension || spec_.dim_text > kMaxDimension) {
    throw Error("infeasible synthetic parameters: dimensionality");
  }
  if (spec_.duplicate_fraction < 0.0 || spec_.duplicate_fraction > 1.0 ||
      spec_.category_fraction < 0.0 || spec_.category_fraction > 1.0 ||
      spec_.category_strength < 0.0 || spec_.category_strength > 1.0) {
    throw Error("infeasible synthetic parameters: fractions must lie in [0, 1]");
  }

  const std::size_t n = spec_.n;
  const auto dead = static_cast<std::size_t>(std::llround(spec_.duplicate_fraction * static_cast<double>(n)));
  std::size_t per_category = 0;
  if (spec_.categories > 0) {
    per_category = std::max<std::size_t>(
        static_cast<std::size_t>(spec_.category_fraction * static_cast<double>(n)) / spec_.categories, 200);
    per_category = std::min(per_category, (n - dead) / spec_.categories);
  }

  std::vector<ItemId> order(n);
  for (ItemId i = 0; i < n; ++i) order[i] = i;
  Rng rng(mix_seed(spec_.seed, 0xCA7));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  category_.assign(n, kBackground);
  std::size_t at = 0;
  for (; at < dead; ++at) category_[order[at]] = kDuplicate;
  for (std::size_t c = 0; c < spec_.categories; ++c) {
    for (std::size_t j = 0; j < per_category; ++j) category_[order[at++]] = static_cast<std::int32_t>(c);
  }

  for (std::size_t c = 0; c < spec_.categories; ++c) {
    Rng frng(mix_seed(spec_.seed, 1000 + c));
    signal_visual_.push_back(pick_features(spec_.dim_visual, kVisualSignal, frng));
    signal_text_.push_back(pick_features(spec_.dim_text, kTextSignal, frng));
  }
}

std::vector<ItemId> SyntheticCollection::members(std::int32_t category) const {
  std::vector<ItemId> out;
  for (ItemId i = 0; i < category_.size(); ++i) {
    if (category_[i] == category) out.push_back(i);
  }
  return out;
}

void SyntheticCollection::row(Modality m, ItemId item, std::span<float> out) const {
  const std::uint32_t dim = this->dim(m);
  if (out.size() != dim) throw Error("row buffer has wrong dimensionality");
  std::fill(out.begin(), out.end(), 0.0F);
  const std::int32_t cat = category_[item];

  if (cat == kDuplicate) {
    // Every dead item shares one visual vector and has no text at all.
    if (m == Modality::kVisual) {
      out[dim - 1] = 0.92F;
      out[dim / 2] = 0.35F;
      out[1] = 0.12F;
    }
    return;
  }

  Rng rng(mix_seed(mix_seed(spec_.seed, static_cast<std::uint64_t>(m) + 1), item));
  const bool signal = cat >= 0 && rng.unit() < spec_.category_strength;
  // Members without text signal are untagged, like dead items.
  if (cat >= 0 && !signal && m == Modality::kText) return;
  for (auto& v : out) v = static_cast<float>(rng.uniform(0.0, 0.04));

  const std::size_t active = (cat >= 0 ? 2 : 4) + rng.below(2);
  for (std::size_t i = 0; i < active; ++i) {
    out[rng.below(dim)] = static_cast<float>(rng.uniform(0.2, 0.7));
  }

  if (signal) {
    const auto& features = m == Modality::kVisual ? signal_visual_[cat] : signal_text_[cat];
    for (std::uint32_t f : features) out[f] = static_cast<float>(rng.uniform(0.6, 1.0));
  }
}

RowSource SyntheticCollection::source(Modality m) const {
  return RowSource{dim(m), size(), [this, m](std::size_t i, std::span<float> out) {
                     row(m, static_cast<ItemId>(i), out);
                   }};
}

DenseCollection SyntheticCollection::dense(Modality m) const {
  DenseCollection d(dim(m), std::vector<float>(size() * dim(m)));
  for (ItemId i = 0; i < size(); ++i) row(m, i, d.row(i));
  return d;
}

void write_synthetic_files(const SyntheticCollection& collection, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_dense(dir / "visual.exqd", collection.dense(Modality::kVisual));
  save_dense(dir / "text.exqd", collection.dense(Modality::kText));
  std::ofstream out(dir / "categories.csv", std::ios::trunc);
  if (!out) throw Error("cannot write " + (dir / "categories.csv").string());
  out << "item,category\n";
  for (ItemId i = 0; i < collection.size(); ++i) out << i << ',' << collection.category(i) << '\n';
}

CompressedCollection compress_source(const RowSource& source) {
  const FeatureStats stats = compute_feature_stats(source);
  CompressedCollection out;
  out.dim = source.dim;
  out.vectors.reserve(source.count);
  std::vector<float> row(source.dim);
  for (std::size_t i = 0; i < source.count; ++i) {
    source.read(i, row);
    out.vectors.push_back(compress(row, stats));
  }
  return out;
}

Corpus build_corpus(const CompressedCollection& visual, const CompressedCollection& text,
                    std::uint64_t seed) {
  if (visual.size() != text.size()) throw Error("modality count mismatch");
  return Corpus{create_index(visual.vectors, Modality::kVisual, visual.dim, mix_seed(seed, 0)),
                create_index(text.vectors, Modality::kText, text.dim, mix_seed(seed, 1))};
}

ActorProfile make_actor(std::vector<ItemId> relevance, std::size_t item_count, std::uint64_t seed,
                        std::size_t positives, std::size_t negatives) {
  std::sort(relevance.begin(), relevance.end());
  relevance.erase(std::unique(relevance.begin(), relevance.end()), relevance.end());
  ActorProfile actor;
  actor.relevant = ItemFilter(item_count);
  for (ItemId id : relevance) actor.relevant.insert(id);

  Rng rng(seed);
  actor.pretrain_positives = sample_without_replacement(relevance, positives, rng);
  negatives = std::min(negatives, item_count - relevance.size());
  std::unordered_set<ItemId> picked;
  while (actor.pretrain_negatives.size() < negatives) {
    const auto id = static_cast<ItemId>(rng.below(item_count));
    if (actor.relevant.contains(id) || !picked.insert(id).second) continue;
    actor.pretrain_negatives.push_back(id);
  }
  std::sort(actor.pretrain_negatives.begin(), actor.pretrain_negatives.end());
  actor.relevance = std::move(relevance);
  return actor;
}

double RunReport::mean_precision() const {
  if (rounds.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& r : rounds) sum += r.precision;
  return sum / static_cast<double>(rounds.size());
}

double RunReport::median_latency_ms(std::size_t from) const {
  std::vector<double> v;
  for (std::size_t i = from; i < rounds.size(); ++i) v.push_back(rounds[i].latency_ms);
  return median(std::move(v));
}

double RunReport::median_retrieval_ms(std::size_t from) const {
  std::vector<double> v;
  for (std::size_t i = from; i < rounds.size(); ++i) v.push_back(rounds[i].retrieval_ms);
  return median(std::move(v));
}

double RunReport::mean_items_scored() const {
  if (rounds.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& r : rounds) sum += static_cast<double>(r.items_scored);
  return sum / static_cast<double>(rounds.size());
}

RunReport run_actor(const Corpus& corpus, const ActorProfile& actor, const RetrievalParams& params,
                    std::size_t rounds, std::uint64_t session_seed, const Retriever& retriever) {
  Session session("actor", params, session_seed, corpus.size());
  session.submit_feedback(actor.pretrain_positives, actor.pretrain_negatives);

  RunReport report;
  for (std::size_t round = 0; round < rounds; ++round) {
    const SuggestionList suggestions = session.next_round(corpus, retriever);
    const RoundStats& stats = session.history().back();

    RoundRecord record;
    record.suggestions = suggestions.ids();
    std::vector<ItemId> relevant;
    for (ItemId id : record.suggestions) {
      if (actor.relevant.contains(id)) relevant.push_back(id);
    }
    record.precision = static_cast<double>(relevant.size()) / static_cast<double>(params.k);
    record.latency_ms = stats.total_ms;
    record.retrieval_ms = stats.select_ms + stats.score_ms + stats.fuse_ms;
    record.items_scored = stats.items_scored;
    report.rounds.push_back(std::move(record));

    session.submit_feedback(relevant, {});
  }
  return report;
}

std::vector<SweepConfig> make_grid(const RetrievalParams& base, std::span<const std::size_t> b,
                                   std::span<const std::uint64_t> max_cluster_size,
                                   std::span<const std::size_t> segments,
                                   std::span<const std::size_t> workers) {
  std::vector<SweepConfig> grid;
  for (std::size_t bv : b) {
    for (std::uint64_t sm : max_cluster_size) {
      for (std::size_t sc : segments) {
        for (std::size_t w : workers) {
          SweepConfig cfg;
          cfg.params = base;
          cfg.params.b = bv;
          cfg.params.max_cluster_size = sm;
          cfg.params.segments = sc;
          cfg.params.workers = w;
          cfg.id = "b" + std::to_string(bv) + "-sm" + format_size(sm) + "-sc" +
                   std::to_string(sc) + "-w" + std::to_string(w);
          grid.push_back(std::move(cfg));
        }
      }
    }
  }
  return grid;
}

std::string sweep(const Corpus& corpus, std::span<const ActorProfile> actors,
                  std::span<const SweepConfig> grid, std::size_t rounds,
                  std::uint64_t session_seed) {
  std::ostringstream csv;
  csv << kSweepCsvHeader << '\n';
  for (const auto& cfg : grid) {
    std::vector<double> precision(rounds, 0.0);
    std::vector<double> latency(rounds, 0.0);
    std::vector<double> scored(rounds, 0.0);
    for (const auto& actor : actors) {
      const RunReport report = run_actor(corpus, actor, cfg.params, rounds, session_seed);
      for (std::size_t r = 0; r < rounds; ++r) {
        precision[r] += report.rounds[r].precision;
        latency[r] += report.rounds[r].latency_ms;
        scored[r] += static_cast<double>(report.rounds[r].items_scored);
      }
    }
    const double n = actors.empty() ? 1.0 : static_cast<double>(actors.size());
    for (std::size_t r = 0; r < rounds; ++r) {
      char line[256];
      std::snprintf(line, sizeof line, "%s,%zu,%s,%zu,%zu,%zu,%.6f,%.3f,%.1f", cfg.id.c_str(),
                    cfg.params.b, format_size(cfg.params.max_cluster_size).c_str(),
                    cfg.params.segments, cfg.params.workers, r + 1, precision[r] / n,
                    latency[r] / n, scored[r] / n);
      csv << line << '\n';
    }
  }
  return csv.str();
}

}  // namespace exq
