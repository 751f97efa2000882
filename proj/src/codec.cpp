#include "dynamiq/codec.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

#include "dynamiq/bf16.hpp"
#include "dynamiq/bitio.hpp"

namespace dynamiq {

namespace {

void check_width(int width) {
  if (width != 2 && width != 4 && width != 8 && width != 16)
    throw std::invalid_argument("unsupported codec width " + std::to_string(width));
}

[[noreturn]] void malformed(const std::string& what) {
  throw std::runtime_error("malformed compressed buffer: " + what);
}

float decode_group_scale(std::uint8_t code, float sg_scale) {
  return static_cast<float>(code) * sg_scale / 255.0f;
}

// Unbiased stochastic rounding of a non-negative ratio onto {0..255}.
std::uint8_t quantize_group_scale(float ratio, double u) {
  if (ratio >= 255.0f) return 255;
  float lo = std::floor(ratio);
  float p_up = ratio - lo;
  float code = (u < static_cast<double>(p_up)) ? lo + 1.0f : lo;
  return static_cast<std::uint8_t>(code);
}

// Stochastic rounding of a non-negative value onto the bf16 grid,
// E[decoded] = value.
std::uint16_t stochastic_bf16(float value, double u) {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(value);
  std::uint16_t lo = static_cast<std::uint16_t>(bits >> 16);
  if ((bits & 0xffffu) == 0) return lo;
  std::uint16_t hi = static_cast<std::uint16_t>(lo + 1);
  float flo = bf16_to_float(lo), fhi = bf16_to_float(hi);
  float p_up = (value - flo) / (fhi - flo);
  return (u < static_cast<double>(p_up)) ? hi : lo;
}

double entry_u(const QuantContext& qctx, std::uint32_t sg_index, std::uint32_t entry_index) {
  RandomKey key{Purpose::kEntryQuant, qctx.chunk_index, sg_index, entry_index};
  if (qctx.correlated)
    return correlated_uniform(qctx.seed, key, qctx.hop_slot, qctx.n_slots);
  return uniform_at(qctx.seed, with_slot(key, qctx.hop_slot));
}

double scale_u(const QuantContext& qctx, std::uint32_t sg_index, std::uint32_t group_index) {
  RandomKey key{Purpose::kScaleQuant, qctx.chunk_index, sg_index, group_index};
  return uniform_at(qctx.seed, with_slot(key, qctx.hop_slot));
}

}  // namespace

void CodecConfig::validate() const {
  if (group_size == 0 || super_group_size == 0 || super_group_size % group_size != 0)
    throw std::invalid_argument("super-group size must be a positive multiple of the group size");
  if (super_group_size % 4 != 0)
    throw std::invalid_argument("super-group size must be a multiple of 4 for byte alignment");
}

CompressedSuperGroup compress_supergroup(std::span<const float> values, int width,
                                         const Codebook& cb, const CodecConfig& cfg,
                                         const QuantContext& qctx, std::uint32_t sg_index) {
  cfg.validate();
  check_width(width);
  const std::uint32_t S = cfg.super_group_size;
  const std::uint32_t s = cfg.group_size;
  if (values.size() != S) throw std::invalid_argument("super-group length mismatch");

  CompressedSuperGroup out;
  out.width = static_cast<std::uint8_t>(width);

  if (width == 16) {
    out.payload.reserve(S * 2);
    for (float v : values) put_u16(out.payload, float_to_bf16_rne(v));
    return out;
  }

  float max_abs = 0.0f;
  for (float v : values) max_abs = std::max(max_abs, std::fabs(v));

  float sg_scale = 0.0f;
  if (cfg.hierarchical_scales) {
    out.sg_scale = float_to_bf16_round_up(max_abs);
    sg_scale = bf16_to_float(out.sg_scale);
  }

  BitWriter writer;
  for (std::uint32_t g = 0; g < S / s; ++g) {
    std::span<const float> group = values.subspan(g * s, s);
    float m = 0.0f;
    for (float v : group) m = std::max(m, std::fabs(v));

    if (cfg.hierarchical_scales) {
      std::uint8_t code = 0;
      if (m > 0.0f && sg_scale > 0.0f)
        code = quantize_group_scale(m / sg_scale * 255.0f, scale_u(qctx, sg_index, g));
      out.group_scales.push_back(code);
    } else {
      std::uint16_t bits = m > 0.0f ? stochastic_bf16(m, scale_u(qctx, sg_index, g)) : 0;
      put_u16(out.group_scales, bits);
    }

    for (std::uint32_t k = 0; k < s; ++k) {
      const float x = group[k];
      std::uint32_t sign = x < 0.0f ? 1u : 0u;
      std::uint32_t index = 0;
      if (m > 0.0f) {
        const float v = std::fabs(x) / m;
        index = stochastic_index(cb, v, entry_u(qctx, sg_index, g * s + k));
      }
      writer.write(sign | (index << 1), static_cast<unsigned>(width));
    }
  }
  out.payload = writer.finish();
  return out;
}

void decompress_supergroup(const CompressedSuperGroup& csg, const Codebook& cb,
                           const CodecConfig& cfg, std::span<float> out) {
  cfg.validate();
  const std::uint32_t S = cfg.super_group_size;
  const std::uint32_t s = cfg.group_size;
  if (out.size() != S) throw std::invalid_argument("output length mismatch");

  if (csg.width == 16) {
    if (csg.payload.size() != S * 2) malformed("width-16 payload length");
    for (std::uint32_t k = 0; k < S; ++k)
      out[k] = bf16_to_float(get_u16(csg.payload, k * 2));
    return;
  }

  const std::size_t expected_scales =
      cfg.hierarchical_scales ? S / s : static_cast<std::size_t>(S / s) * 2;
  if (csg.group_scales.size() != expected_scales) malformed("group scale length");
  if (csg.payload.size() != static_cast<std::size_t>(S) * csg.width / 8)
    malformed("payload length");

  const float sg_scale = bf16_to_float(csg.sg_scale);
  BitReader reader(csg.payload);
  for (std::uint32_t g = 0; g < S / s; ++g) {
    const float sf_g = cfg.hierarchical_scales
                           ? decode_group_scale(csg.group_scales[g], sg_scale)
                           : bf16_to_float(get_u16(csg.group_scales, g * 2));
    for (std::uint32_t k = 0; k < s; ++k) {
      std::uint32_t code = reader.read(csg.width);
      std::uint32_t index = code >> 1;
      if (index >= cb.values.size()) malformed("index out of range");
      float mag = cb.values[index] * sf_g;
      out[g * s + k] = (code & 1u) ? -mag : mag;
    }
  }
}

CompressedChunk compress_chunk(std::span<const float> values,
                               std::span<const std::uint8_t> widths, const CodebookSet& books,
                               const CodecConfig& cfg, const QuantContext& qctx,
                               std::uint32_t first_sg_index) {
  cfg.validate();
  const std::uint32_t S = cfg.super_group_size;
  if (values.size() != widths.size() * S)
    throw std::invalid_argument("chunk length does not match widths");
  CompressedChunk chunk;
  chunk.chunk_index = qctx.chunk_index;
  chunk.widths.assign(widths.begin(), widths.end());
  chunk.groups.reserve(widths.size());
  static const Codebook passthrough{};  // width 16 never consults it
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const Codebook& cb = widths[i] == 16 ? passthrough : books.at(widths[i]);
    chunk.groups.push_back(compress_supergroup(values.subspan(i * S, S), widths[i], cb, cfg,
                                               qctx, first_sg_index + static_cast<std::uint32_t>(i)));
  }
  return chunk;
}

void decompress_chunk(const CompressedChunk& chunk, const CodebookSet& books,
                      const CodecConfig& cfg, std::span<float> out) {
  const std::uint32_t S = cfg.super_group_size;
  if (out.size() != chunk.groups.size() * S)
    throw std::invalid_argument("output length does not match chunk");
  static const Codebook passthrough{};
  for (std::size_t i = 0; i < chunk.groups.size(); ++i) {
    const auto& csg = chunk.groups[i];
    const Codebook& cb = csg.width == 16 ? passthrough : books.at(csg.width);
    decompress_supergroup(csg, cb, cfg, out.subspan(i * S, S));
  }
}

void decompress_accumulate(const CompressedChunk& chunk, std::span<float> acc,
                           const CodebookSet& books, const CodecConfig& cfg) {
  cfg.validate();
  const std::uint32_t S = cfg.super_group_size;
  const std::uint32_t s = cfg.group_size;
  if (acc.size() != chunk.groups.size() * S)
    throw std::invalid_argument("accumulator length does not match chunk");

  for (std::size_t i = 0; i < chunk.groups.size(); ++i) {
    const auto& csg = chunk.groups[i];
    std::span<float> slice = acc.subspan(i * S, S);
    if (csg.width == 16) {
      if (csg.payload.size() != S * 2) malformed("width-16 payload length");
      for (std::uint32_t k = 0; k < S; ++k)
        slice[k] += bf16_to_float(get_u16(csg.payload, k * 2));
      continue;
    }
    const Codebook& cb = books.at(csg.width);
    const std::size_t expected_scales =
        cfg.hierarchical_scales ? S / s : static_cast<std::size_t>(S / s) * 2;
    if (csg.group_scales.size() != expected_scales) malformed("group scale length");
    if (csg.payload.size() != static_cast<std::size_t>(S) * csg.width / 8)
      malformed("payload length");
    const float sg_scale = bf16_to_float(csg.sg_scale);
    BitReader reader(csg.payload);
    for (std::uint32_t g = 0; g < S / s; ++g) {
      const float sf_g = cfg.hierarchical_scales
                             ? decode_group_scale(csg.group_scales[g], sg_scale)
                             : bf16_to_float(get_u16(csg.group_scales, g * 2));
      for (std::uint32_t k = 0; k < s; ++k) {
        std::uint32_t code = reader.read(csg.width);
        std::uint32_t index = code >> 1;
        if (index >= cb.values.size()) malformed("index out of range");
        float mag = cb.values[index] * sf_g;
        slice[g * s + k] += (code & 1u) ? -mag : mag;
      }
    }
  }
}

CompressedChunk decompress_accumulate_recompress(const CompressedChunk& chunk,
                                                 std::span<const float> local,
                                                 const CodebookSet& books,
                                                 const CodecConfig& cfg,
                                                 const QuantContext& qctx,
                                                 std::uint32_t first_sg_index) {
  cfg.validate();
  const std::uint32_t S = cfg.super_group_size;
  if (local.size() != chunk.groups.size() * S)
    throw std::invalid_argument("local buffer length does not match chunk");

  CompressedChunk out;
  out.chunk_index = qctx.chunk_index;
  out.widths = chunk.widths;
  out.groups.reserve(chunk.groups.size());
  static const Codebook passthrough{};
  std::vector<float> sum(S);
  for (std::size_t i = 0; i < chunk.groups.size(); ++i) {
    const auto& csg = chunk.groups[i];
    if (csg.width != chunk.widths[i]) malformed("width/header mismatch");
    const Codebook& cb = csg.width == 16 ? passthrough : books.at(csg.width);
    decompress_supergroup(csg, cb, cfg, sum);
    const float* add = local.data() + i * S;
    for (std::uint32_t k = 0; k < S; ++k) sum[k] += add[k];
    out.groups.push_back(compress_supergroup(sum, csg.width, cb, cfg, qctx,
                                             first_sg_index + static_cast<std::uint32_t>(i)));
  }
  return out;
}

std::uint64_t chunk_header_bits() { return 6 * 32; }

std::uint64_t supergroup_payload_bits(std::uint8_t width, std::uint32_t S) {
  return static_cast<std::uint64_t>(S) * width;
}

std::uint64_t supergroup_scale_bits(std::uint8_t width, std::uint32_t S, std::uint32_t s,
                                    bool hierarchical_scales) {
  if (width == 16) return 0;
  return hierarchical_scales ? 16 + static_cast<std::uint64_t>(S / s) * 8
                             : static_cast<std::uint64_t>(S / s) * 16;
}

std::uint64_t compressed_size_bits(std::span<const std::uint8_t> widths, std::uint32_t S,
                                   std::uint32_t s, bool hierarchical_scales) {
  std::uint64_t bits = chunk_header_bits();
  for (std::uint8_t w : widths) {
    check_width(w);
    bits += supergroup_scale_bits(w, S, s, hierarchical_scales);
    bits += supergroup_payload_bits(w, S);
  }
  return bits;
}

namespace {

struct WidthCounts {
  std::uint32_t n8 = 0, n4 = 0, n2 = 0, n16 = 0;
};

WidthCounts count_widths(std::span<const std::uint8_t> widths) {
  WidthCounts c;
  int cls_prev = -1;
  for (std::uint8_t w : widths) {
    int cls;
    switch (w) {
      case 8: cls = 0; ++c.n8; break;
      case 4: cls = 1; ++c.n4; break;
      case 2: cls = 2; ++c.n2; break;
      case 16: cls = 3; ++c.n16; break;
      default: throw std::invalid_argument("unsupported width on wire");
    }
    if (cls < cls_prev)
      throw std::invalid_argument("chunk body must be ordered by width class 8,4,2,16");
    cls_prev = cls;
  }
  return c;
}

}  // namespace

std::vector<std::uint8_t> serialize_chunk(const CompressedChunk& chunk, const CodecConfig& cfg) {
  cfg.validate();
  if (chunk.widths.size() != chunk.groups.size())
    throw std::invalid_argument("widths/groups mismatch");
  WidthCounts counts = count_widths(chunk.widths);

  std::vector<std::uint8_t> bytes;
  put_u32(bytes, chunk.chunk_index);
  put_u32(bytes, static_cast<std::uint32_t>(chunk.groups.size()));
  put_u32(bytes, counts.n8);
  put_u32(bytes, counts.n4);
  put_u32(bytes, counts.n2);
  put_u32(bytes, counts.n16);

  for (std::size_t i = 0; i < chunk.groups.size(); ++i) {
    const auto& csg = chunk.groups[i];
    if (csg.width != chunk.widths[i]) throw std::invalid_argument("width/header mismatch");
    if (csg.width != 16) {
      if (cfg.hierarchical_scales) put_u16(bytes, csg.sg_scale);
      bytes.insert(bytes.end(), csg.group_scales.begin(), csg.group_scales.end());
    }
    bytes.insert(bytes.end(), csg.payload.begin(), csg.payload.end());
  }
  return bytes;
}

CompressedChunk parse_chunk(std::span<const std::uint8_t> bytes, const CodecConfig& cfg) {
  cfg.validate();
  const std::uint32_t S = cfg.super_group_size;
  const std::uint32_t s = cfg.group_size;
  if (bytes.size() < chunk_header_bits() / 8) malformed("truncated header");

  CompressedChunk chunk;
  chunk.chunk_index = get_u32(bytes, 0);
  const std::uint32_t count = get_u32(bytes, 4);
  const std::uint32_t runs[4] = {get_u32(bytes, 8), get_u32(bytes, 12), get_u32(bytes, 16),
                                 get_u32(bytes, 20)};
  if (static_cast<std::uint64_t>(runs[0]) + runs[1] + runs[2] + runs[3] != count)
    malformed("width run-lengths do not sum to the super-group count");

  static constexpr std::uint8_t kRunWidth[4] = {8, 4, 2, 16};
  for (int r = 0; r < 4; ++r)
    for (std::uint32_t i = 0; i < runs[r]; ++i) chunk.widths.push_back(kRunWidth[r]);

  std::size_t at = chunk_header_bits() / 8;
  chunk.groups.reserve(count);
  for (std::uint8_t w : chunk.widths) {
    CompressedSuperGroup csg;
    csg.width = w;
    if (w == 16) {
      const std::size_t len = static_cast<std::size_t>(S) * 2;
      if (bytes.size() - at < len) malformed("truncated width-16 body");
      csg.payload.assign(bytes.begin() + at, bytes.begin() + at + len);
      at += len;
    } else {
      const std::size_t scale_len =
          cfg.hierarchical_scales ? S / s : static_cast<std::size_t>(S / s) * 2;
      const std::size_t payload_len = static_cast<std::size_t>(S) * w / 8;
      const std::size_t sg_scale_len = cfg.hierarchical_scales ? 2 : 0;
      if (bytes.size() - at < sg_scale_len + scale_len + payload_len)
        malformed("truncated super-group body");
      if (cfg.hierarchical_scales) {
        csg.sg_scale = get_u16(bytes, at);
        at += 2;
      }
      csg.group_scales.assign(bytes.begin() + at, bytes.begin() + at + scale_len);
      at += scale_len;
      csg.payload.assign(bytes.begin() + at, bytes.begin() + at + payload_len);
      at += payload_len;
      if (cfg.hierarchical_scales && csg.sg_scale == 0) {
        for (std::uint8_t c : csg.group_scales)
          if (c != 0) malformed("zero super-group scale with nonzero group scale");
        for (std::uint8_t b : csg.payload)
          if (b != 0) malformed("zero super-group scale with nonzero payload");
      }
    }
    chunk.groups.push_back(std::move(csg));
  }
  if (at != bytes.size()) malformed("trailing bytes after chunk body");
  return chunk;
}

}  // namespace dynamiq
