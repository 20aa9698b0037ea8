#pragma once

#include <bit>
#include <cstdint>

namespace wsca {

inline int hamming_weight(uint32_t v) { return std::popcount(v); }

inline int hamming_distance(uint32_t a, uint32_t b) { return std::popcount(a ^ b); }

inline uint32_t f32_bits(float f) { return std::bit_cast<uint32_t>(f); }

inline float f32_from_bits(uint32_t u) { return std::bit_cast<float>(u); }

// bfloat16 is the top half of an IEEE-754 binary32; widening is lossless.
inline float bf16_to_f32(uint16_t bits) { return std::bit_cast<float>(uint32_t(bits) << 16); }

// Round-to-nearest-even truncation of a binary32 to bfloat16.
inline uint16_t f32_to_bf16(float f) {
  uint32_t u = std::bit_cast<uint32_t>(f);
  if ((u & 0x7F800000u) == 0x7F800000u && (u & 0x007FFFFFu) != 0)
    return uint16_t((u >> 16) | 0x0040u); // keep NaNs quiet
  uint32_t lsb = (u >> 16) & 1u;
  return uint16_t((u + 0x7FFFu + lsb) >> 16);
}

inline bool bf16_is_finite(uint16_t bits) { return (bits & 0x7F80u) != 0x7F80u; }

inline bool bf16_is_negative(uint16_t bits) { return (bits & 0x8000u) != 0; }

// S32 accumulator arithmetic wraps modulo 2^32.
inline int32_t wrap_add(int32_t a, int32_t b) {
  return int32_t(uint32_t(a) + uint32_t(b));
}

inline int32_t wrap_mac_i8(int32_t acc, int8_t a, int8_t b) {
  return wrap_add(acc, int32_t(a) * int32_t(b));
}

} // namespace wsca
