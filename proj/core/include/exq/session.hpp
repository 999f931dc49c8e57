#pragma once

// Interactive relevance-feedback loop state for one user.

#include <cstdint>
#include <functional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "exq/common.hpp"
#include "exq/learner.hpp"
#include "exq/retrieval.hpp"

namespace exq {

struct SessionOptions {
  std::size_t random_negatives = 100;
  TrainOptions train;
};

struct RoundStats {
  std::uint64_t round = 0;
  double train_ms = 0.0;
  double select_ms = 0.0;
  double score_ms = 0.0;
  double fuse_ms = 0.0;
  double total_ms = 0.0;
  std::size_t clusters_scored = 0;
  std::size_t items_scored = 0;
};

using Retriever = std::function<RetrievalResult(const ModelPair&, const RetrievalParams&,
                                                const Corpus&, const ItemFilter&)>;

class Session {
 public:
  Session(std::string id, RetrievalParams params, std::uint64_t seed, std::size_t item_count,
          SessionOptions options = {});

  const std::string& id() const { return id_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t round() const { return round_; }
  std::size_t item_count() const { return item_count_; }
  const RetrievalParams& params() const { return params_; }
  const SessionOptions& options() const { return options_; }
  void set_params(const RetrievalParams& params);

  const std::set<ItemId>& positives() const { return positives_; }
  const std::set<ItemId>& negatives() const { return negatives_; }
  const std::set<ItemId>& seen() const { return seen_; }

  // Adds labels; an id labelled before takes its latest label. Also used to
  // pre-seed a session before its first round.
  void submit_feedback(std::span<const ItemId> relevant, std::span<const ItemId> not_relevant);

  // True before the first round and whenever feedback arrived since the last one.
  bool needs_round() const { return round_ == 0 || feedback_pending_; }

  // Retrains both models on the labels plus freshly drawn random negatives,
  // retrieves the next suggestions and marks them seen.
  SuggestionList next_round(const Corpus& corpus, const Retriever& retriever = {});

  const SuggestionList& last_suggestions() const { return last_suggestions_; }
  const std::vector<ItemId>& last_random_negatives() const { return last_random_negatives_; }
  const std::vector<RoundStats>& history() const { return history_; }
  const ModelPair& models() const { return models_; }
  bool trained() const { return trained_; }

  // JSON snapshot: id, seed, round, params, options, labels, seen, models.
  std::string snapshot() const;
  static Session restore(const std::string& json, std::size_t item_count);

 private:
  std::vector<ItemId> draw_random_negatives() const;

  std::string id_;
  RetrievalParams params_;
  std::uint64_t seed_;
  std::size_t item_count_;
  SessionOptions options_;
  std::uint64_t round_ = 0;
  std::set<ItemId> positives_;
  std::set<ItemId> negatives_;
  std::set<ItemId> seen_;
  ItemFilter excluded_;  // seen or labelled; never suggested
  bool feedback_pending_ = false;
  bool trained_ = false;
  ModelPair models_;
  SuggestionList last_suggestions_;
  std::vector<ItemId> last_random_negatives_;
  std::vector<RoundStats> history_;
};

Session create_session(const RetrievalParams& params, std::uint64_t seed, std::size_t item_count,
                       SessionOptions options = {});

}  // namespace exq
