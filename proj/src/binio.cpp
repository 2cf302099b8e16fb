#include "foodclf/binio.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace foodclf::binio {

namespace {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
}

template <typename T>
T get_le(std::span<const std::uint8_t> in) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(in[i]) << (8 * i);
  }
  return value;
}

}  // namespace

void Writer::u16(std::uint16_t v) { put_le(out_, v); }
void Writer::u32(std::uint32_t v) { put_le(out_, v); }
void Writer::u64(std::uint64_t v) { put_le(out_, v); }
void Writer::f32(float v) { put_le(out_, std::bit_cast<std::uint32_t>(v)); }
void Writer::f64(double v) { put_le(out_, std::bit_cast<std::uint64_t>(v)); }

std::span<const std::uint8_t> Reader::bytes(std::size_t n) {
  if (n > remaining()) {
    fail(code_, "unexpected end of data at byte " + std::to_string(pos_) + " (wanted " +
                    std::to_string(n) + ", have " + std::to_string(remaining()) + ")");
  }
  auto out = data_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::string Reader::text(std::size_t n) {
  auto raw = bytes(n);
  return std::string(raw.begin(), raw.end());
}

std::uint8_t Reader::u8() { return bytes(1)[0]; }
std::uint16_t Reader::u16() { return get_le<std::uint16_t>(bytes(2)); }
std::uint32_t Reader::u32() { return get_le<std::uint32_t>(bytes(4)); }
std::uint64_t Reader::u64() { return get_le<std::uint64_t>(bytes(8)); }
float Reader::f32() { return std::bit_cast<float>(get_le<std::uint32_t>(bytes(4))); }
double Reader::f64() { return std::bit_cast<double>(get_le<std::uint64_t>(bytes(8))); }

void Reader::expect_magic(std::string_view magic) {
  if (remaining() < magic.size() || text(magic.size()) != magic) {
    fail(code_, "bad magic, expected \"" + std::string(magic) + "\"");
  }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) fail(ErrorCode::Io, "write failed for " + path.string());
}

}  // namespace foodclf::binio
