#pragma once

// Collection files.
//
// Dense ("EXQD"):      magic, u32 version, u32 D, u64 count, count*D f32 (row-major)
// Compressed ("EXQC"): magic, u32 version, u32 D, u64 count, count*3 u64 words
// One file per modality; everything little-endian.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "exq/features.hpp"

namespace exq {

inline constexpr std::uint32_t kCollectionFormatVersion = 1;

struct CompressedCollection {
  std::uint32_t dim = 0;
  std::vector<CompressedVector> vectors;  // indexed by item id

  std::size_t size() const { return vectors.size(); }
};

void write_dense(std::ostream& out, const DenseCollection& collection);
DenseCollection read_dense(std::istream& in);
void save_dense(const std::filesystem::path& path, const DenseCollection& collection);
DenseCollection load_dense(const std::filesystem::path& path);

void write_compressed(std::ostream& out, const CompressedCollection& collection);
CompressedCollection read_compressed(std::istream& in);
void save_compressed(const std::filesystem::path& path, const CompressedCollection& collection);
CompressedCollection load_compressed(const std::filesystem::path& path);

CompressedCollection compress_collection(const DenseCollection& dense, const FeatureStats& stats);

}  // namespace exq
