#pragma once

// Little-endian primitive encoding shared by the collection and index files.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "exq/common.hpp"

namespace exq::detail {

class LeWriter {
 public:
  explicit LeWriter(std::ostream& out) : out_(out) {}

  void magic(std::string_view m) { out_.write(m.data(), static_cast<std::streamsize>(m.size())); }
  void u8(std::uint8_t v) { put(v, 1); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put(bits, 4);
  }

 private:
  void put(std::uint64_t v, int bytes) {
    std::array<char, 8> buf{};
    for (int i = 0; i < bytes; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out_.write(buf.data(), bytes);
  }
  std::ostream& out_;
};

// Every read names the section it belongs to so truncation errors point at
// the failing part of the file.
class LeReader {
 public:
  explicit LeReader(std::istream& in) : in_(in) {}

  void section(std::string name) { section_ = std::move(name); }

  void expect_magic(std::string_view m) {
    std::string got(m.size(), '\0');
    in_.read(got.data(), static_cast<std::streamsize>(got.size()));
    if (!in_) truncated();
    if (got != m) throw Error("bad magic: expected \"" + std::string(m) + "\"");
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  float f32() {
    const auto bits = static_cast<std::uint32_t>(get(4));
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

  // Bulk little-endian f32 read into `out`.
  void f32_array(float* out, std::size_t n) {
    static_assert(sizeof(float) == 4);
    in_.read(reinterpret_cast<char*>(out), static_cast<std::streamsize>(n * 4));
    if (!in_) truncated();
    if constexpr (std::endian::native != std::endian::little) {
      for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t b;
        std::memcpy(&b, out + i, 4);
        b = __builtin_bswap32(b);
        std::memcpy(out + i, &b, 4);
      }
    }
  }

  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  [[noreturn]] void truncated() const { throw Error("truncated file in section " + section_); }

  std::uint64_t get(int bytes) {
    std::array<unsigned char, 8> buf{};
    in_.read(reinterpret_cast<char*>(buf.data()), bytes);
    if (!in_) truncated();
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
  }

  std::istream& in_;
  std::string section_ = "header";
};

}  // namespace exq::detail
