#pragma once

// Little-endian primitive IO shared by the checkpoint and embedding formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

namespace semret::binio {

template <class UInt>
inline void write_le(std::ostream& out, UInt v) {
  char buf[sizeof(UInt)];
  for (std::size_t i = 0; i < sizeof(UInt); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(buf, sizeof(UInt));
}

template <class UInt>
inline UInt read_le(std::istream& in) {
  unsigned char buf[sizeof(UInt)] = {};
  in.read(reinterpret_cast<char*>(buf), sizeof(UInt));
  UInt v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(buf[i]) << (8 * i);
  return v;
}

inline void write_u32(std::ostream& out, std::uint32_t v) { write_le(out, v); }
inline void write_u64(std::ostream& out, std::uint64_t v) { write_le(out, v); }
inline std::uint32_t read_u32(std::istream& in) { return read_le<std::uint32_t>(in); }
inline std::uint64_t read_u64(std::istream& in) { return read_le<std::uint64_t>(in); }

inline void write_f32(std::ostream& out, float v) { write_u32(out, std::bit_cast<std::uint32_t>(v)); }
inline float read_f32(std::istream& in) { return std::bit_cast<float>(read_u32(in)); }

}  // namespace semret::binio
