#include "fixtures.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace exq::fixture {

DenseCollection random_dense(std::size_t n, std::uint32_t dim, std::uint64_t seed, double density) {
  Rng rng(seed);
  DenseCollection d(dim, std::vector<float>(n * dim, 0.0F));
  for (std::size_t i = 0; i < n; ++i) {
    auto row = d.row(i);
    for (auto& v : row) {
      if (rng.unit() < density) v = static_cast<float>(rng.unit());
    }
  }
  return d;
}

CompressedCollection compress_all(const DenseCollection& dense) {
  return compress_collection(dense, compute_feature_stats(dense));
}

World make_world(const SyntheticSpec& spec, std::uint64_t index_seed) {
  SyntheticCollection synth(spec);
  auto visual = compress_source(synth.source(Modality::kVisual));
  auto text = compress_source(synth.source(Modality::kText));
  auto corpus = build_corpus(visual, text, index_seed);
  return World{std::move(synth), std::move(visual), std::move(text), std::move(corpus)};
}

ModelPair train_pair(const Corpus& corpus, const std::vector<ItemId>& positives,
                     const std::vector<ItemId>& negatives) {
  std::vector<CompressedVector> pv, pt, nv, nt;
  for (ItemId id : positives) {
    pv.push_back(corpus.visual.vector_of(id));
    pt.push_back(corpus.text.vector_of(id));
  }
  for (ItemId id : negatives) {
    nv.push_back(corpus.visual.vector_of(id));
    nt.push_back(corpus.text.vector_of(id));
  }
  return ModelPair{train(pv, nv, corpus.visual.dim()), train(pt, nt, corpus.text.dim())};
}

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("exq-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_bytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << bytes;
}

}  // namespace exq::fixture
