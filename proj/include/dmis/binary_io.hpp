#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>

#include "dmis/error.hpp"

namespace dmis {

// Little-endian float64 arrays, independent of host byte order.

inline void write_f64_le(std::ostream& out, std::span<const double> values) {
  for (double v : values) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(bytes), 8);
  }
}

inline void read_f64_le(std::istream& in, std::span<double> values) {
  for (double& v : values) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) {
      throw ArtifactError("truncated float64 payload");
    }
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    v = std::bit_cast<double>(bits);
  }
}

}  // namespace dmis
