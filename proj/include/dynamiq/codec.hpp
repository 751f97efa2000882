#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dynamiq/codebook.hpp"
#include "dynamiq/random.hpp"

namespace dynamiq {

// Wire layout per super-group of S entries (see FORMAT.md):
//   widths 2/4/8, hierarchical scales:
//     [sg_scale bf16][S/s group scale codes u8][S packed entries]
//   widths 2/4/8, flat scales:
//     [S/s group scales bf16][S packed entries]
//   width 16: [S bf16 entries]  (no scales, no randomness)
// Packed entry = 1 sign bit (low, 1 = negative) + (width-1) index bits,
// LSB-first within bytes.
struct CompressedSuperGroup {
  std::uint8_t width = 0;
  std::uint16_t sg_scale = 0;                 // bf16 bits; 0 when width 16 or flat
  std::vector<std::uint8_t> group_scales;     // u8 codes, or bf16 pairs when flat
  std::vector<std::uint8_t> payload;          // ceil(S*width/8) bytes
};

struct CompressedChunk {
  std::uint32_t chunk_index = 0;
  std::vector<std::uint8_t> widths;           // per super-group, body order
  std::vector<CompressedSuperGroup> groups;
};

struct CodecConfig {
  std::uint32_t group_size = 16;        // s
  std::uint32_t super_group_size = 256; // S
  bool hierarchical_scales = true;

  void validate() const;
  std::uint32_t groups_per_super_group() const { return super_group_size / group_size; }
};

// Randomness binding for one compression site. hop_slot is the compression's
// position along the chunk's aggregation path, n_slots the total number of
// compressions on that path; correlated rounding keys its permutation on
// (chunk, super-group, entry) and spreads the slots over distinct 1/n
// intervals.
struct QuantContext {
  SharedSeed seed;
  std::uint32_t chunk_index = 0;
  std::uint32_t hop_slot = 0;
  std::uint32_t n_slots = 1;
  bool correlated = true;
};

CompressedSuperGroup compress_supergroup(std::span<const float> values, int width,
                                         const Codebook& cb, const CodecConfig& cfg,
                                         const QuantContext& qctx, std::uint32_t sg_index);

void decompress_supergroup(const CompressedSuperGroup& csg, const Codebook& cb,
                           const CodecConfig& cfg, std::span<float> out);

// Chunk-level kernels. Widths are per super-group in body order and stay
// fixed for the whole round.
CompressedChunk compress_chunk(std::span<const float> values,
                               std::span<const std::uint8_t> widths, const CodebookSet& books,
                               const CodecConfig& cfg, const QuantContext& qctx,
                               std::uint32_t first_sg_index);

void decompress_chunk(const CompressedChunk& chunk, const CodebookSet& books,
                      const CodecConfig& cfg, std::span<float> out);

// acc += decompress(chunk), one pass, no full-size temporary.
void decompress_accumulate(const CompressedChunk& chunk, std::span<float> acc,
                           const CodebookSet& books, const CodecConfig& cfg);

// Bit-identical to compress_chunk(decompress(chunk) + local) under the same
// context; runs one pass per super-group.
CompressedChunk decompress_accumulate_recompress(const CompressedChunk& chunk,
                                                 std::span<const float> local,
                                                 const CodebookSet& books,
                                                 const CodecConfig& cfg,
                                                 const QuantContext& qctx,
                                                 std::uint32_t first_sg_index);

// Exact wire size of one chunk, headers included.
std::uint64_t compressed_size_bits(std::span<const std::uint8_t> widths, std::uint32_t S,
                                   std::uint32_t s, bool hierarchical_scales);
std::uint64_t chunk_header_bits();
std::uint64_t supergroup_payload_bits(std::uint8_t width, std::uint32_t S);
std::uint64_t supergroup_scale_bits(std::uint8_t width, std::uint32_t S, std::uint32_t s,
                                    bool hierarchical_scales);

std::vector<std::uint8_t> serialize_chunk(const CompressedChunk& chunk, const CodecConfig& cfg);
// Throws std::runtime_error on any malformed buffer.
CompressedChunk parse_chunk(std::span<const std::uint8_t> bytes, const CodecConfig& cfg);

}  // namespace dynamiq
