#pragma once

// Little-endian byte access over plain buffers. Every on-disk integer in the
// toolkit goes through these helpers; nothing here validates semantics.

#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace papora {

using Bytes = std::vector<uint8_t>;
using ByteSpan = std::span<const uint8_t>;
using MutByteSpan = std::span<uint8_t>;

inline uint8_t rd_u8(ByteSpan b, size_t off) { return b[off]; }

inline uint16_t rd_u16(ByteSpan b, size_t off) {
  return static_cast<uint16_t>(b[off] | (uint16_t(b[off + 1]) << 8));
}

inline uint32_t rd_u32(ByteSpan b, size_t off) {
  uint32_t v;
  std::memcpy(&v, b.data() + off, 4);
  return v;  // build targets are little-endian only
}

inline uint64_t rd_u64(ByteSpan b, size_t off) {
  uint64_t v;
  std::memcpy(&v, b.data() + off, 8);
  return v;
}

inline void wr_u8(MutByteSpan b, size_t off, uint8_t v) { b[off] = v; }

inline void wr_u16(MutByteSpan b, size_t off, uint16_t v) {
  b[off] = uint8_t(v);
  b[off + 1] = uint8_t(v >> 8);
}

inline void wr_u32(MutByteSpan b, size_t off, uint32_t v) { std::memcpy(b.data() + off, &v, 4); }
inline void wr_u64(MutByteSpan b, size_t off, uint64_t v) { std::memcpy(b.data() + off, &v, 8); }

inline void wr_bytes(MutByteSpan b, size_t off, ByteSpan src) {
  std::memcpy(b.data() + off, src.data(), src.size());
}

// Checked read: true iff [off, off+len) lies inside the buffer. Callers decide
// what an out-of-range access means (errno, validation error, simulated crash).
inline bool in_bounds(size_t buf_size, uint64_t off, uint64_t len) {
  return off <= buf_size && len <= buf_size - off;
}

constexpr uint64_t align8(uint64_t v) { return (v + 7) & ~uint64_t(7); }
constexpr bool is_pow2(uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

inline std::string to_hex(ByteSpan b) {
  static const char digits[] = "0123456789abcdef";
  std::string s;
  s.reserve(b.size() * 2);
  for (uint8_t c : b) {
    s.push_back(digits[c >> 4]);
    s.push_back(digits[c & 15]);
  }
  return s;
}

inline Bytes from_hex(const std::string& s) {
  if (s.size() % 2) throw std::invalid_argument("hex string has odd length");
  auto nib = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw std::invalid_argument("bad hex digit");
  };
  Bytes out(s.size() / 2);
  for (size_t i = 0; i < out.size(); i++)
    out[i] = uint8_t(nib(s[2 * i]) << 4 | nib(s[2 * i + 1]));
  return out;
}

}  // namespace papora
