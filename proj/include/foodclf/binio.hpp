#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "foodclf/error.hpp"

namespace foodclf::binio {

/// Little-endian byte sink.
class Writer {
 public:
  void bytes(std::span<const std::uint8_t> data) { out_.insert(out_.end(), data.begin(), data.end()); }
  void text(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);

  const std::vector<std::uint8_t>& buffer() const& { return out_; }
  std::vector<std::uint8_t> take() && { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

/// Bounds-checked little-endian byte source. Running past the end raises
/// `Error(parse_code, ...)` so every format reports its own parse error.
class Reader {
 public:
  Reader(std::span<const std::uint8_t> data, ErrorCode parse_code)
      : data_(data), code_(parse_code) {}

  std::span<const std::uint8_t> bytes(std::size_t n);
  std::string text(std::size_t n);
  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();

  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  std::size_t position() const noexcept { return pos_; }
  void expect_magic(std::string_view magic);

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  ErrorCode code_;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data);

}  // namespace foodclf::binio
