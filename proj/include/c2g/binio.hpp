#pragma once

// Little-endian primitives shared by the C2G container and model checkpoints.
// Byte order is explicit so the formats read identically on any host.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "c2g/error.hpp"

namespace c2g::binio {

inline void put_u8(std::ostream& os, std::uint8_t v) {
  os.put(static_cast<char>(v));
}

inline void put_u16(std::ostream& os, std::uint16_t v) {
  for (int i = 0; i < 2; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::ostream& os, float v) {
  put_u32(os, std::bit_cast<std::uint32_t>(v));
}

inline void put_f64(std::ostream& os, double v) {
  put_u64(os, std::bit_cast<std::uint64_t>(v));
}

inline std::uint8_t get_u8(std::istream& is) {
  int c = is.get();
  if (c == std::istream::traits_type::eof()) {
    throw Error(ErrorCode::TruncatedFile, "unexpected end of file");
  }
  return static_cast<std::uint8_t>(c);
}

inline std::uint16_t get_u16(std::istream& is) {
  std::uint16_t v = 0;
  for (int i = 0; i < 2; ++i) v |= std::uint16_t(get_u8(is)) << (8 * i);
  return v;
}

inline std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(get_u8(is)) << (8 * i);
  return v;
}

inline std::uint64_t get_u64(std::istream& is) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(get_u8(is)) << (8 * i);
  return v;
}

inline float get_f32(std::istream& is) { return std::bit_cast<float>(get_u32(is)); }
inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

// Bulk float32 payloads. The host is little-endian on every supported target;
// fall back to per-value writes elsewhere.
inline void put_f32_block(std::ostream& os, const float* data, std::size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 4));
  } else {
    for (std::size_t i = 0; i < count; ++i) put_f32(os, data[i]);
  }
}

inline void get_f32_block(std::istream& is, float* data, std::size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * 4));
    if (static_cast<std::size_t>(is.gcount()) != count * 4) {
      throw Error(ErrorCode::TruncatedFile, "float payload shorter than header implies");
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) data[i] = get_f32(is);
  }
}

inline void put_magic(std::ostream& os, const char (&magic)[17]) {
  os.write(magic, 16);
}

inline void check_magic(std::istream& is, const char (&magic)[17], const std::string& what) {
  char buf[16];
  is.read(buf, 16);
  if (is.gcount() != 16) throw Error(ErrorCode::TruncatedFile, what + ": file shorter than magic");
  if (std::memcmp(buf, magic, 16) != 0) {
    throw Error(ErrorCode::BadMagic, what + ": magic bytes do not match");
  }
}

}  // namespace c2g::binio
