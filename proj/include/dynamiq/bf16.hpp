#pragma once

#include <bit>
#include <cstdint>
#include <limits>

namespace dynamiq {

// 16-bit brain float helpers. A bf16 value is the upper half of an IEEE-754
// binary32, so widening is exact and never overflows.

inline float bf16_to_float(std::uint16_t bits) {
  return std::bit_cast<float>(static_cast<std::uint32_t>(bits) << 16);
}

// Round to nearest, ties to even. Used by the 16-bit passthrough width.
inline std::uint16_t float_to_bf16_rne(float v) {
  std::uint32_t u = std::bit_cast<std::uint32_t>(v);
  std::uint32_t exp = (u >> 23) & 0xff;
  if (exp == 0xff) {  // inf/nan pass through truncated
    std::uint16_t hi = static_cast<std::uint16_t>(u >> 16);
    if ((u & 0x7fffffu) != 0 && (hi & 0x7f) == 0) hi |= 1;  // keep nan a nan
    return hi;
  }
  std::uint32_t lsb = (u >> 16) & 1u;
  u += 0x7fffu + lsb;
  return static_cast<std::uint16_t>(u >> 16);
}

// Round away from zero toward +inf; input must be non-negative and finite.
// Guarantees bf16_to_float(result) >= v, so magnitudes normalized by a
// rounded-up scale never exceed 1.
inline std::uint16_t float_to_bf16_round_up(float v) {
  std::uint32_t u = std::bit_cast<std::uint32_t>(v);
  if ((u & 0xffffu) == 0) return static_cast<std::uint16_t>(u >> 16);
  std::uint16_t hi = static_cast<std::uint16_t>(u >> 16);
  std::uint16_t up = static_cast<std::uint16_t>(hi + 1);
  if ((up & 0x7f80u) == 0x7f80u) return 0x7f7fu;  // clamp below +inf
  return up;
}

}  // namespace dynamiq
