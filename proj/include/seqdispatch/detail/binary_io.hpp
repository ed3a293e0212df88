#pragma once

// Little-endian stream helpers shared by the binary cache/checkpoint formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "seqdispatch/error.hpp"

namespace seqdispatch::detail {

template <typename U>
void write_le(std::ostream& os, U value) {
  static_assert(std::is_unsigned_v<U>);
  unsigned char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<unsigned char>(value >> (8 * i));
  os.write(reinterpret_cast<const char*>(bytes), sizeof(U));
}

template <typename U>
U read_le(std::istream& is) {
  static_assert(std::is_unsigned_v<U>);
  unsigned char bytes[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(U))) {
    throw Error(ErrorCode::IoError, "unexpected end of binary stream");
  }
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

inline void write_u8(std::ostream& os, std::uint8_t v) { write_le<std::uint8_t>(os, v); }
inline void write_u32(std::ostream& os, std::uint32_t v) { write_le(os, v); }
inline void write_u64(std::ostream& os, std::uint64_t v) { write_le(os, v); }
inline void write_i64(std::ostream& os, std::int64_t v) {
  write_le(os, std::bit_cast<std::uint64_t>(v));
}
inline void write_f64(std::ostream& os, double v) { write_le(os, std::bit_cast<std::uint64_t>(v)); }
inline void write_string(std::ostream& os, std::string_view s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::uint8_t read_u8(std::istream& is) { return read_le<std::uint8_t>(is); }
inline std::uint32_t read_u32(std::istream& is) { return read_le<std::uint32_t>(is); }
inline std::uint64_t read_u64(std::istream& is) { return read_le<std::uint64_t>(is); }
inline std::int64_t read_i64(std::istream& is) {
  return std::bit_cast<std::int64_t>(read_le<std::uint64_t>(is));
}
inline double read_f64(std::istream& is) { return std::bit_cast<double>(read_le<std::uint64_t>(is)); }
inline std::string read_string(std::istream& is, std::size_t max_len = 1 << 20) {
  const auto n = read_u32(is);
  if (n > max_len) throw Error(ErrorCode::IoError, "string length out of range in binary stream");
  std::string s(n, '\0');
  if (n > 0 && !is.read(s.data(), n)) throw Error(ErrorCode::IoError, "truncated string");
  return s;
}

inline void expect_magic(std::istream& is, std::string_view magic, std::string_view what) {
  std::string got(magic.size(), '\0');
  if (!is.read(got.data(), static_cast<std::streamsize>(magic.size())) || got != magic) {
    throw Error(ErrorCode::IoError, std::string(what) + ": bad magic/version header");
  }
}

}  // namespace seqdispatch::detail
