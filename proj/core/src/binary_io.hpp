#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "semtok/error.hpp"

namespace semtok::detail {

// Little-endian byte buffer used by every binary model/feature format.
class ByteWriter {
 public:
  void magic(std::string_view m) { bytes_.insert(bytes_.end(), m.begin(), m.end()); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f32(float v) { put(std::bit_cast<std::uint32_t>(v), 4); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }

  const std::vector<char>& bytes() const { return bytes_; }

 private:
  void put(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
  std::vector<char> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

  bool has_magic(std::string_view m) {
    if (bytes_.size() < m.size() || std::memcmp(bytes_.data(), m.data(), m.size()) != 0)
      return false;
    pos_ = m.size();
    return true;
  }
  std::uint32_t u32(ErrorCode on_short) { return static_cast<std::uint32_t>(get(4, on_short)); }
  std::uint64_t u64(ErrorCode on_short) { return get(8, on_short); }
  float f32(ErrorCode on_short) { return std::bit_cast<float>(u32(on_short)); }
  double f64(ErrorCode on_short) { return std::bit_cast<double>(u64(on_short)); }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::uint64_t get(int width, ErrorCode on_short) {
    if (remaining() < static_cast<std::size_t>(width))
      fail(on_short, "unexpected end of file");
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += width;
    return v;
  }
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

std::vector<char> read_all_bytes(const std::filesystem::path& path);
void write_all_bytes(const std::vector<char>& bytes, const std::filesystem::path& path);
std::string read_all_text(const std::filesystem::path& path);
void write_all_text(const std::string& text, const std::filesystem::path& path);

}  // namespace semtok::detail
