#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "newsrec/error.hpp"

namespace newsrec::binary {

// Little-endian scalar encoding, independent of host byte order.

template <typename U>
void write_le(std::ostream& out, U value) {
  char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  }
  out.write(bytes, sizeof(U));
}

template <typename U>
U read_le(std::istream& in, const std::string& what) {
  unsigned char bytes[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(U))) {
    throw FormatError("truncated " + what);
  }
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

inline void write_f32(std::ostream& out, float v) { write_le(out, std::bit_cast<std::uint32_t>(v)); }

inline float read_f32(std::istream& in, const std::string& what) {
  return std::bit_cast<float>(read_le<std::uint32_t>(in, what));
}

inline void write_short_string(std::ostream& out, const std::string& s) {
  if (s.size() > 0xFFFF) throw FormatError("string too long for record: " + s.substr(0, 32));
  write_le(out, static_cast<std::uint16_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_short_string(std::istream& in, const std::string& what) {
  const auto len = read_le<std::uint16_t>(in, what);
  std::string s(len, '\0');
  if (len && !in.read(s.data(), len)) throw FormatError("truncated " + what);
  return s;
}

inline void write_long_string(std::ostream& out, const std::string& s) {
  write_le(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_long_string(std::istream& in, const std::string& what) {
  const auto len = read_le<std::uint32_t>(in, what);
  std::string s(len, '\0');
  if (len && !in.read(s.data(), len)) throw FormatError("truncated " + what);
  return s;
}

}  // namespace newsrec::binary
