// SPDX-License-Identifier: Apache-2.0
// Little-endian byte framing shared by the CDGF/CDGT/CDGS/CDGX files.
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "codegraph/error.hpp"

namespace codegraph::detail {

class ByteWriter {
 public:
  void magic(std::string_view tag) { bytes_.insert(bytes_.end(), tag.begin(), tag.end()); }

  void u32(std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) bytes_.push_back(static_cast<char>((v >> s) & 0xFF));
  }

  void u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }

  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

  void f32s(std::span<const float> values) {
    if constexpr (std::endian::native == std::endian::little) {
      const auto* p = reinterpret_cast<const char*>(values.data());
      bytes_.insert(bytes_.end(), p, p + values.size_bytes());
    } else {
      for (float v : values) f32(v);
    }
  }

  void u8s(std::span<const std::uint8_t> values) {
    bytes_.insert(bytes_.end(), values.begin(), values.end());
  }

  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }

  const std::string& bytes() const noexcept { return bytes_; }

 private:
  std::string bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  void expect_magic(std::string_view tag) {
    if (bytes_.size() < tag.size() || bytes_.substr(0, tag.size()) != tag)
      fail(ErrorCode::kBadMagic, "expected magic '" + std::string(tag) + "'");
    pos_ = tag.size();
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
    pos_ += 4;
    return v;
  }

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }

  void f32s(std::span<float> out) {
    need(out.size_bytes());
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(out.data(), bytes_.data() + pos_, out.size_bytes());
      pos_ += out.size_bytes();
    } else {
      for (float& v : out) v = std::bit_cast<float>(u32());
    }
  }

  void u8s(std::span<std::uint8_t> out) {
    need(out.size());
    std::memcpy(out.data(), bytes_.data() + pos_, out.size());
    pos_ += out.size();
  }

  std::string str() {
    const std::uint32_t len = u32();
    need(len);
    std::string s(bytes_.substr(pos_, len));
    pos_ += len;
    return s;
  }

  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

  void expect_end() const {
    if (remaining() != 0)
      fail(ErrorCode::kDimensionError,
           std::to_string(remaining()) + " trailing bytes after the declared payload");
  }

  void need(std::size_t n) const {
    if (remaining() < n)
      fail(ErrorCode::kDimensionError, "payload shorter than the header declares");
  }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace codegraph::detail
