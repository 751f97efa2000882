#include "dynamiq/synth.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "dynamiq/random.hpp"

namespace dynamiq {

namespace {

constexpr char kMagic[8] = {'D', 'Y', 'N', 'Q', 'G', 'R', 'A', 'D'};

// Box-Muller over two keyed draws; stateless so generation order is free.
double keyed_normal(SharedSeed seed, Purpose purpose, std::uint64_t stream,
                    std::uint64_t index) {
  RandomKey k1{purpose, stream, 0, index};
  RandomKey k2{purpose, stream, 1, index};
  double u1 = uniform_at(seed, k1);
  double u2 = uniform_at(seed, k2);
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

std::vector<float> generate_worker(const GeneratorSpec& spec, std::uint32_t super_group_size,
                                   std::uint32_t rank) {
  if (spec.d == 0) throw std::invalid_argument("generator requires d > 0");
  if (spec.kind == GeneratorKind::kFile) return load_raw(spec.path);
  if (spec.sigma_log < 0.0) throw std::invalid_argument("sigma_log must be non-negative");
  if (super_group_size == 0) throw std::invalid_argument("super-group size must be positive");

  SharedSeed seed{spec.seed, 0};
  std::vector<float> out(spec.d);
  if (spec.kind == GeneratorKind::kIidGaussian || spec.sigma_log == 0.0) {
    for (std::size_t i = 0; i < spec.d; ++i)
      out[i] = static_cast<float>(keyed_normal(seed, Purpose::kGenEntry, rank, i));
    return out;
  }

  const std::size_t sg_count = (spec.d + super_group_size - 1) / super_group_size;
  std::vector<double> sigma(sg_count);
  for (std::size_t j = 0; j < sg_count; ++j)
    sigma[j] = std::exp(spec.sigma_log * keyed_normal(seed, Purpose::kGenScale, 0, j));
  for (std::size_t i = 0; i < spec.d; ++i)
    out[i] = static_cast<float>(sigma[i / super_group_size] *
                                keyed_normal(seed, Purpose::kGenEntry, rank, i));
  return out;
}

std::vector<float> generate(const GeneratorSpec& spec, std::uint32_t super_group_size) {
  return generate_worker(spec, super_group_size, 0);
}

void save_raw(const std::string& path, const std::vector<float>& values) {
  if (values.empty()) throw std::invalid_argument("refusing to write an empty gradient file");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(kMagic, sizeof(kMagic));
  const std::uint32_t d = static_cast<std::uint32_t>(values.size());
  char len[4] = {static_cast<char>(d & 0xff), static_cast<char>((d >> 8) & 0xff),
                 static_cast<char>((d >> 16) & 0xff), static_cast<char>((d >> 24) & 0xff)};
  out.write(len, 4);
  for (float v : values) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    char b[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                 static_cast<char>((bits >> 16) & 0xff), static_cast<char>((bits >> 24) & 0xff)};
    out.write(b, 4);
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::vector<float> load_raw(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open gradient file " + path);
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error(path + ": bad magic, not a raw gradient file");
  unsigned char len[4];
  if (!in.read(reinterpret_cast<char*>(len), 4))
    throw std::runtime_error(path + ": truncated length field");
  const std::uint32_t d = static_cast<std::uint32_t>(len[0]) | (len[1] << 8) | (len[2] << 16) |
                          (static_cast<std::uint32_t>(len[3]) << 24);
  if (d == 0) throw std::runtime_error(path + ": empty gradient (d = 0) rejected");

  std::vector<float> values(d);
  std::vector<unsigned char> body(static_cast<std::size_t>(d) * 4);
  in.read(reinterpret_cast<char*>(body.data()), static_cast<std::streamsize>(body.size()));
  const std::size_t got = static_cast<std::size_t>(in.gcount());
  if (got != body.size())
    throw std::runtime_error(path + ": truncated body, expected " + std::to_string(body.size()) +
                             " bytes after the header, got " + std::to_string(got));
  in.peek();
  if (!in.eof())
    throw std::runtime_error(path + ": trailing bytes after " + std::to_string(body.size()) +
                             " body bytes");
  for (std::uint32_t i = 0; i < d; ++i) {
    std::uint32_t bits = static_cast<std::uint32_t>(body[i * 4]) | (body[i * 4 + 1] << 8) |
                         (body[i * 4 + 2] << 16) |
                         (static_cast<std::uint32_t>(body[i * 4 + 3]) << 24);
    std::memcpy(&values[i], &bits, 4);
  }
  return values;
}

}  // namespace dynamiq
