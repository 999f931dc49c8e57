#include "exq/session.hpp"

#include <algorithm>
#include <chrono>
#include <unordered_set>

#include "json.hpp"

namespace exq {
namespace {

using Clock = std::chrono::steady_clock;
using nlohmann::json;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

json params_to_json(const RetrievalParams& p) {
  return {{"b", p.b},
          {"r", p.r},
          {"k", p.k},
          {"workers", p.workers},
          {"segments", p.segments},
          {"max_cluster_size", p.max_cluster_size}};
}

RetrievalParams params_from_json(const json& j) {
  RetrievalParams p;
  p.b = j.value("b", p.b);
  p.r = j.value("r", p.r);
  p.k = j.value("k", p.k);
  p.workers = j.value("workers", p.workers);
  p.segments = j.value("segments", p.segments);
  p.max_cluster_size = j.value("max_cluster_size", p.max_cluster_size);
  return p;
}

json model_to_json(const LinearModel& m) {
  return {{"weights", m.weights}, {"bias", m.bias}, {"C", m.c}};
}

LinearModel model_from_json(const json& j) {
  LinearModel m;
  m.weights = j.at("weights").get<std::vector<double>>();
  m.bias = j.at("bias").get<double>();
  m.c = j.at("C").get<double>();
  return m;
}

}  // namespace

Session::Session(std::string id, RetrievalParams params, std::uint64_t seed,
                 std::size_t item_count, SessionOptions options)
    : id_(std::move(id)),
      params_(params),
      seed_(seed),
      item_count_(item_count),
      options_(options),
      excluded_(item_count) {
  params_.validate();
}

Session create_session(const RetrievalParams& params, std::uint64_t seed, std::size_t item_count,
                       SessionOptions options) {
  return Session("session-" + std::to_string(seed), params, seed, item_count, options);
}

void Session::set_params(const RetrievalParams& params) {
  params.validate();
  params_ = params;
}

void Session::submit_feedback(std::span<const ItemId> relevant,
                              std::span<const ItemId> not_relevant) {
  std::unordered_set<ItemId> rel(relevant.begin(), relevant.end());
  for (ItemId id : not_relevant) {
    if (rel.contains(id)) throw Error("conflicting label");
  }
  for (ItemId id : relevant) {
    if (id >= item_count_) throw Error("item id out of range");
  }
  for (ItemId id : not_relevant) {
    if (id >= item_count_) throw Error("item id out of range");
  }
  for (ItemId id : relevant) {
    negatives_.erase(id);
    positives_.insert(id);
    excluded_.insert(id);
  }
  for (ItemId id : not_relevant) {
    positives_.erase(id);
    negatives_.insert(id);
    excluded_.insert(id);
  }
  feedback_pending_ = true;
}

std::vector<ItemId> Session::draw_random_negatives() const {
  const std::size_t want = options_.random_negatives;
  const std::size_t available = item_count_ - excluded_.count();

  std::vector<ItemId> out;
  if (want == 0 || available == 0) return out;
  Rng rng(mix_seed(seed_, round_));

  if (available <= want || available < 4 * want) {
    std::vector<ItemId> pool;
    pool.reserve(available);
    for (ItemId id = 0; id < item_count_; ++id) {
      if (!excluded_.contains(id)) pool.push_back(id);
    }
    if (available <= want) return pool;
    for (std::size_t i = 0; i < want; ++i) {
      std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
    }
    pool.resize(want);
    return pool;
  }

  std::unordered_set<ItemId> picked;
  out.reserve(want);
  while (out.size() < want) {
    const auto id = static_cast<ItemId>(rng.below(item_count_));
    if (excluded_.contains(id) || !picked.insert(id).second) continue;
    out.push_back(id);
  }
  return out;
}

SuggestionList Session::next_round(const Corpus& corpus, const Retriever& retriever) {
  if (positives_.empty()) throw Error("cold session");
  if (corpus.size() != item_count_ || corpus.text.item_count() != item_count_) {
    throw Error("collection does not match the session");
  }
  const auto t_round = Clock::now();
  RoundStats stats;
  stats.round = round_ + 1;

  auto t0 = Clock::now();
  last_random_negatives_ = draw_random_negatives();
  std::vector<CompressedVector> pos_v, pos_t, neg_v, neg_t;
  pos_v.reserve(positives_.size());
  pos_t.reserve(positives_.size());
  for (ItemId id : positives_) {
    pos_v.push_back(corpus.visual.vector_of(id));
    pos_t.push_back(corpus.text.vector_of(id));
  }
  auto add_negative = [&](ItemId id) {
    neg_v.push_back(corpus.visual.vector_of(id));
    neg_t.push_back(corpus.text.vector_of(id));
  };
  for (ItemId id : negatives_) add_negative(id);
  for (ItemId id : last_random_negatives_) add_negative(id);
  if (neg_v.empty()) throw Error("need both classes");
  models_.visual = train(pos_v, neg_v, corpus.visual.dim(), options_.train);
  models_.text = train(pos_t, neg_t, corpus.text.dim(), options_.train);
  trained_ = true;
  stats.train_ms = ms_since(t0);

  RetrievalResult result = retriever ? retriever(models_, params_, corpus, excluded_)
                                     : retrieve(models_, params_, corpus, excluded_);
  for (const auto& c : result.suggestions.items) {
    seen_.insert(c.id);
    excluded_.insert(c.id);
  }
  ++round_;
  feedback_pending_ = false;

  stats.select_ms = result.stats.select_ms;
  stats.score_ms = result.stats.score_ms;
  stats.fuse_ms = result.stats.fuse_ms;
  stats.clusters_scored = result.stats.clusters_scored;
  stats.items_scored = result.stats.items_scored;
  stats.total_ms = ms_since(t_round);
  history_.push_back(stats);
  last_suggestions_ = std::move(result.suggestions);
  return last_suggestions_;
}

std::string Session::snapshot() const {
  json j;
  j["id"] = id_;
  j["seed"] = seed_;
  j["round"] = round_;
  j["item_count"] = item_count_;
  j["params"] = params_to_json(params_);
  j["options"] = {{"random_negatives", options_.random_negatives},
                  {"C", options_.train.c},
                  {"bias_feature", options_.train.bias_feature},
                  {"tolerance", options_.train.tolerance},
                  {"max_epochs", options_.train.max_epochs}};
  j["labels"] = {{"positives", positives_}, {"negatives", negatives_}};
  j["seen"] = seen_;
  j["feedback_pending"] = feedback_pending_;
  if (trained_) {
    j["models"] = {{"visual", model_to_json(models_.visual)},
                   {"text", model_to_json(models_.text)}};
  }
  return j.dump();
}

Session Session::restore(const std::string& text, std::size_t item_count) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("invalid session snapshot: ") + e.what());
  }
  try {
    if (j.at("item_count").get<std::size_t>() != item_count) {
      throw Error("snapshot belongs to a collection of different size");
    }
    SessionOptions options;
    const auto& o = j.at("options");
    options.random_negatives = o.at("random_negatives").get<std::size_t>();
    options.train.c = o.at("C").get<double>();
    options.train.bias_feature = o.at("bias_feature").get<double>();
    options.train.tolerance = o.at("tolerance").get<double>();
    options.train.max_epochs = o.at("max_epochs").get<int>();

    Session s(j.at("id").get<std::string>(), params_from_json(j.at("params")),
              j.at("seed").get<std::uint64_t>(), item_count, options);
    const auto pos = j.at("labels").at("positives").get<std::vector<ItemId>>();
    const auto neg = j.at("labels").at("negatives").get<std::vector<ItemId>>();
    s.submit_feedback(pos, neg);
    for (ItemId id : j.at("seen").get<std::vector<ItemId>>()) {
      if (id >= item_count) throw Error("item id out of range");
      s.seen_.insert(id);
      s.excluded_.insert(id);
    }
    s.round_ = j.at("round").get<std::uint64_t>();
    s.feedback_pending_ = j.at("feedback_pending").get<bool>();
    if (j.contains("models")) {
      s.models_.visual = model_from_json(j["models"].at("visual"));
      s.models_.text = model_from_json(j["models"].at("text"));
      s.trained_ = true;
    }
    return s;
  } catch (const json::exception& e) {
    throw Error(std::string("invalid session snapshot: ") + e.what());
  }
}

}  // namespace exq
