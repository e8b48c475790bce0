#pragma once

// Little-endian byte buffers shared by the feature and bank file codecs.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string_view>
#include <vector>

#include "tosca/data.hpp"

namespace tosca::detail {

class ByteWriter {
 public:
  void raw(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

  template <typename U>
  void uint(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
  }

  void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }

  std::size_t size() const { return buf_.size(); }
  std::span<const std::uint8_t> bytes_from(std::size_t offset) const {
    return std::span<const std::uint8_t>(buf_).subspan(offset);
  }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> b) : b_(b) {}

  bool starts_with(std::string_view magic) const {
    return b_.size() >= magic.size() && std::memcmp(b_.data(), magic.data(), magic.size()) == 0;
  }

  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }

  template <typename U>
  U uint() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(b_[pos_ + i]) << (8 * i));
    pos_ += sizeof(U);
    return v;
  }

  float f32() { return std::bit_cast<float>(uint<std::uint32_t>()); }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return b_.size() - pos_; }
  std::span<const std::uint8_t> slice(std::size_t from, std::size_t to) const {
    return b_.subspan(from, to - from);
  }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw FormatError("unexpected end of file");
  }

  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace tosca::detail
