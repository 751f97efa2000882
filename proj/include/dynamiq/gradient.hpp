#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace dynamiq {

// A flat gradient partitioned into groups of s entries and super-groups of S
// entries (S a multiple of s). Data is zero-padded to a whole number of
// super-groups; logical_size tracks the unpadded length so padding can be
// stripped on output.
struct Gradient {
  std::vector<float> data;
  std::size_t logical_size = 0;
  std::uint32_t group_size = 16;        // s
  std::uint32_t super_group_size = 256; // S

  static Gradient from_values(std::vector<float> values, std::uint32_t s, std::uint32_t S);

  std::size_t padded_size() const { return data.size(); }
  std::size_t super_group_count() const { return data.size() / super_group_size; }
  std::size_t groups_per_super_group() const { return super_group_size / group_size; }

  std::span<const float> super_group(std::size_t j) const {
    return {data.data() + j * super_group_size, super_group_size};
  }
  std::span<float> super_group(std::size_t j) {
    return {data.data() + j * super_group_size, super_group_size};
  }
};

}  // namespace dynamiq
