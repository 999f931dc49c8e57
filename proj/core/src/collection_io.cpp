#include "exq/collection_io.hpp"

#include <fstream>

#include "binary_io.hpp"

namespace exq {
namespace {

constexpr std::string_view kDenseMagic = "EXQD";
constexpr std::string_view kCompressedMagic = "EXQC";

void check_version(std::uint32_t version) {
  if (version != kCollectionFormatVersion) throw Error("unsupported collection version");
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

}  // namespace

void write_dense(std::ostream& out, const DenseCollection& collection) {
  detail::LeWriter w(out);
  w.magic(kDenseMagic);
  w.u32(kCollectionFormatVersion);
  w.u32(collection.dim());
  w.u64(collection.size());
  for (float v : collection.values()) w.f32(v);
  if (!out) throw Error("write failed");
}

DenseCollection read_dense(std::istream& in) {
  detail::LeReader r(in);
  r.expect_magic(kDenseMagic);
  check_version(r.u32());
  const std::uint32_t dim = r.u32();
  const std::uint64_t count = r.u64();
  if (dim == 0) throw Error("dense file has zero dimensionality");
  r.section("vectors");
  std::vector<float> values(count * dim);
  r.f32_array(values.data(), values.size());
  return DenseCollection(dim, std::move(values));
}

void save_dense(const std::filesystem::path& path, const DenseCollection& collection) {
  auto out = open_out(path);
  write_dense(out, collection);
}

DenseCollection load_dense(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_dense(in);
}

void write_compressed(std::ostream& out, const CompressedCollection& collection) {
  detail::LeWriter w(out);
  w.magic(kCompressedMagic);
  w.u32(kCollectionFormatVersion);
  w.u32(collection.dim);
  w.u64(collection.vectors.size());
  for (const auto& cv : collection.vectors) {
    for (auto word : cv.words) w.u64(word);
  }
  if (!out) throw Error("write failed");
}

CompressedCollection read_compressed(std::istream& in) {
  detail::LeReader r(in);
  r.expect_magic(kCompressedMagic);
  check_version(r.u32());
  CompressedCollection c;
  c.dim = r.u32();
  const std::uint64_t count = r.u64();
  r.section("vectors");
  c.vectors.resize(count);
  for (auto& cv : c.vectors) {
    for (auto& word : cv.words) word = r.u64();
  }
  return c;
}

void save_compressed(const std::filesystem::path& path, const CompressedCollection& collection) {
  auto out = open_out(path);
  write_compressed(out, collection);
}

CompressedCollection load_compressed(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_compressed(in);
}

CompressedCollection compress_collection(const DenseCollection& dense, const FeatureStats& stats) {
  CompressedCollection c;
  c.dim = dense.dim();
  c.vectors.reserve(dense.size());
  for (std::size_t i = 0; i < dense.size(); ++i) c.vectors.push_back(compress(dense.row(i), stats));
  return c;
}

}  // namespace exq
