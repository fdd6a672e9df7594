#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "scenefusion/common/error.hpp"

namespace scenefusion {

// Doubles as concatenated 16-digit hex bit patterns: lossless and compact.
inline std::string encode_doubles_hex(std::span<const double> values) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(values.size() * 16);
  for (double v : values) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    for (int shift = 60; shift >= 0; shift -= 4) out.push_back(kDigits[(bits >> shift) & 0xf]);
  }
  return out;
}

inline std::vector<double> decode_doubles_hex(const std::string& text) {
  require(text.size() % 16 == 0, "hex-encoded doubles: length not a multiple of 16");
  std::vector<double> out(text.size() / 16);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (std::size_t j = 0; j < 16; ++j) {
      const char c = text[i * 16 + j];
      std::uint64_t nibble;
      if (c >= '0' && c <= '9') nibble = static_cast<std::uint64_t>(c - '0');
      else if (c >= 'a' && c <= 'f') nibble = static_cast<std::uint64_t>(c - 'a' + 10);
      else if (c >= 'A' && c <= 'F') nibble = static_cast<std::uint64_t>(c - 'A' + 10);
      else throw InvalidArgument("hex-encoded doubles: bad digit");
      bits = (bits << 4) | nibble;
    }
    std::memcpy(&out[i], &bits, sizeof bits);
  }
  return out;
}

}  // namespace scenefusion
