#include <benchmark/benchmark.h>

#include "exq/features.hpp"
#include "exq/learner.hpp"

namespace {

struct Data {
  std::vector<exq::CompressedVector> vectors;
  std::vector<double> weights;
};

const Data& data() {
  static const Data d = [] {
    constexpr std::uint32_t dim = 200;
    exq::Rng rng(1);
    exq::DenseCollection dense(dim);
    std::vector<float> row(dim);
    for (int i = 0; i < 4096; ++i) {
      for (auto& v : row) v = rng.unit() < 0.1 ? static_cast<float>(rng.unit()) : 0.0F;
      dense.push_back(row);
    }
    const auto stats = exq::compute_feature_stats(dense);
    Data out;
    for (std::size_t i = 0; i < dense.size(); ++i) out.vectors.push_back(exq::compress(dense.row(i), stats));
    out.weights.resize(dim);
    for (auto& w : out.weights) w = rng.uniform(-1, 1);
    return out;
  }();
  return d;
}

void BM_Dot(benchmark::State& state) {
  const auto& d = data();
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(exq::dot(d.vectors[i++ & 4095], d.weights));
  }
}
BENCHMARK(BM_Dot);

void BM_Distance(benchmark::State& state) {
  const auto& d = data();
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(exq::distance(d.vectors[i & 4095], d.vectors[(i * 31 + 7) & 4095]));
    ++i;
  }
}
BENCHMARK(BM_Distance);

void BM_DistanceIdSorted(benchmark::State& state) {
  const auto& d = data();
  std::vector<exq::IdSortedVector> sorted;
  for (const auto& v : d.vectors) sorted.push_back(exq::sort_by_id(exq::decompress(v)));
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(exq::distance(sorted[i & 4095], sorted[(i * 31 + 7) & 4095]));
    ++i;
  }
}
BENCHMARK(BM_DistanceIdSorted);

void BM_Decompress(benchmark::State& state) {
  const auto& d = data();
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(exq::decompress(d.vectors[i++ & 4095]));
}
BENCHMARK(BM_Decompress);

void BM_Train(benchmark::State& state) {
  const auto& d = data();
  const std::vector<exq::CompressedVector> pos(d.vectors.begin(), d.vectors.begin() + state.range(0));
  const std::vector<exq::CompressedVector> neg(d.vectors.begin() + 2048, d.vectors.begin() + 2048 + 2 * state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(exq::train(pos, neg, 200));
}
BENCHMARK(BM_Train)->Arg(25)->Arg(100)->Unit(benchmark::kMillisecond);

}  // namespace
