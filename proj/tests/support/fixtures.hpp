#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "exq/collection_io.hpp"
#include "exq/harness.hpp"
#include "exq/retrieval.hpp"

namespace exq::fixture {

// Random sparse rows: each value is nonzero with probability `density`.
DenseCollection random_dense(std::size_t n, std::uint32_t dim, std::uint64_t seed,
                             double density = 0.1);

CompressedCollection compress_all(const DenseCollection& dense);

// Synthetic planted-category collection with both indexes built.
struct World {
  SyntheticCollection synth;
  CompressedCollection visual;
  CompressedCollection text;
  Corpus corpus;
};
World make_world(const SyntheticSpec& spec, std::uint64_t index_seed = 1);

// Models trained on `positives` against `negatives` in both modalities.
ModelPair train_pair(const Corpus& corpus, const std::vector<ItemId>& positives,
                     const std::vector<ItemId>& negatives);

class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::string read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, const std::string& bytes);

}  // namespace exq::fixture
