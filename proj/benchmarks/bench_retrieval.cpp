#include <benchmark/benchmark.h>

#include "exq/harness.hpp"
#include "exq/retrieval.hpp"

namespace {

struct World {
  exq::SyntheticCollection synth{[] {
    exq::SyntheticSpec s;
    s.n = 100'000;
    return s;
  }()};
  exq::Corpus corpus;
  exq::ModelPair models;
};

const World& world() {
  static const World w = [] {
    World out;
    const auto cv = exq::compress_source(out.synth.source(exq::Modality::kVisual));
    const auto ct = exq::compress_source(out.synth.source(exq::Modality::kText));
    out.corpus = exq::build_corpus(cv, ct, 1);
    const auto actor = exq::make_actor(out.synth.members(0), out.synth.size(), 3);
    std::vector<exq::CompressedVector> pv, pt, nv, nt;
    for (auto id : actor.pretrain_positives) {
      pv.push_back(out.corpus.visual.vector_of(id));
      pt.push_back(out.corpus.text.vector_of(id));
    }
    for (auto id : actor.pretrain_negatives) {
      nv.push_back(out.corpus.visual.vector_of(id));
      nt.push_back(out.corpus.text.vector_of(id));
    }
    out.models.visual = exq::train(pv, nv, out.corpus.visual.dim());
    out.models.text = exq::train(pt, nt, out.corpus.text.dim());
    return out;
  }();
  return w;
}

void BM_SelectClusters(benchmark::State& state) {
  const auto& w = world();
  for (auto _ : state) {
    benchmark::DoNotOptimize(exq::select_clusters(w.corpus.visual, w.models.visual, state.range(0)));
  }
}
BENCHMARK(BM_SelectClusters)->Arg(1)->Arg(8)->Arg(64)->Arg(256);

void BM_Retrieve(benchmark::State& state) {
  const auto& w = world();
  exq::RetrievalParams p;
  p.b = static_cast<std::size_t>(state.range(0));
  exq::ItemFilter excluded(w.corpus.size());
  std::size_t scored = 0;
  for (auto _ : state) {
    const auto r = exq::retrieve(w.models, p, w.corpus, excluded);
    scored = r.stats.items_scored;
    benchmark::DoNotOptimize(r);
  }
  state.counters["items_scored"] = static_cast<double>(scored);
}
BENCHMARK(BM_Retrieve)->Arg(8)->Arg(16)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace
