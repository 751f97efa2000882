#pragma once

#include <cassert>
#include <cstdint>
#include <span>
#include <vector>

namespace dynamiq {

// Fixed-width bit packing, LSB-first within each byte, little-endian byte
// order. Entry k of width w occupies bits [k*w, (k+1)*w) of the stream.

class BitWriter {
 public:
  void write(std::uint32_t value, unsigned bits) {
    assert(bits > 0 && bits <= 32);
    assert(bits == 32 || value < (1u << bits));
    scratch_ |= static_cast<std::uint64_t>(value) << filled_;
    filled_ += bits;
    while (filled_ >= 8) {
      bytes_.push_back(static_cast<std::uint8_t>(scratch_ & 0xff));
      scratch_ >>= 8;
      filled_ -= 8;
    }
  }

  // Pads the final partial byte with zero bits.
  std::vector<std::uint8_t> finish() {
    if (filled_ > 0) {
      bytes_.push_back(static_cast<std::uint8_t>(scratch_ & 0xff));
      scratch_ = 0;
      filled_ = 0;
    }
    return std::move(bytes_);
  }

 private:
  std::vector<std::uint8_t> bytes_;
  std::uint64_t scratch_ = 0;
  unsigned filled_ = 0;
};

class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t read(unsigned bits) {
    assert(bits > 0 && bits <= 32);
    while (filled_ < bits) {
      assert(pos_ < bytes_.size());
      scratch_ |= static_cast<std::uint64_t>(bytes_[pos_++]) << filled_;
      filled_ += 8;
    }
    std::uint32_t value = static_cast<std::uint32_t>(
        scratch_ & ((std::uint64_t{1} << bits) - 1));
    scratch_ >>= bits;
    filled_ -= bits;
    return value;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::uint64_t scratch_ = 0;
  unsigned filled_ = 0;
  std::size_t pos_ = 0;
};

// Little-endian scalar helpers for headers and scale fields.
inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}
inline std::uint16_t get_u16(std::span<const std::uint8_t> in, std::size_t at) {
  return static_cast<std::uint16_t>(in[at] | (in[at + 1] << 8));
}
inline std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t at) {
  return static_cast<std::uint32_t>(in[at]) | (static_cast<std::uint32_t>(in[at + 1]) << 8) |
         (static_cast<std::uint32_t>(in[at + 2]) << 16) |
         (static_cast<std::uint32_t>(in[at + 3]) << 24);
}

}  // namespace dynamiq
