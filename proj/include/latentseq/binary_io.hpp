#pragma once

// Little-endian primitive encoding shared by the frame file and checkpoint formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "latentseq/errors.hpp"

namespace latentseq::binary {

template <class UInt>
void write_uint(std::ostream& os, UInt value) {
    char bytes[sizeof(UInt)];
    for (std::size_t i = 0; i < sizeof(UInt); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFFu);
    os.write(bytes, sizeof(UInt));
}

template <class UInt>
UInt read_uint(std::istream& is) {
    unsigned char bytes[sizeof(UInt)];
    if (!is.read(reinterpret_cast<char*>(bytes), sizeof(UInt))) throw DataError("unexpected end of file");
    UInt value = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) value |= static_cast<UInt>(bytes[i]) << (8 * i);
    return value;
}

inline void write_f32(std::ostream& os, float v) { write_uint<std::uint32_t>(os, std::bit_cast<std::uint32_t>(v)); }
inline float read_f32(std::istream& is) { return std::bit_cast<float>(read_uint<std::uint32_t>(is)); }
inline void write_f64(std::ostream& os, double v) { write_uint<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v)); }
inline double read_f64(std::istream& is) { return std::bit_cast<double>(read_uint<std::uint64_t>(is)); }

inline void write_string(std::ostream& os, const std::string& s) {
    write_uint<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is, std::size_t max_length = 1u << 26) {
    const auto n = read_uint<std::uint32_t>(is);
    if (n > max_length) throw DataError("string length " + std::to_string(n) + " exceeds limit");
    std::string s(n, '\0');
    if (n && !is.read(s.data(), n)) throw DataError("unexpected end of file");
    return s;
}

}  // namespace latentseq::binary
