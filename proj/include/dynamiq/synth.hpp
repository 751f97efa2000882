#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dynamiq {

enum class GeneratorKind { kIidGaussian, kLocality, kFile };

// Synthetic gradient source. The locality kind draws one log-normal scale per
// super-group, sigma_j = exp(sigma_log * z_j) with z_j ~ N(0,1), then fills
// entries with N(0, sigma_j^2); sigma_log = 0 degenerates to iid N(0,1).
struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::kIidGaussian;
  std::size_t d = 1u << 20;
  std::uint64_t seed = 1;
  double sigma_log = 4.0;
  std::string path;  // file kind
};

std::vector<float> generate(const GeneratorSpec& spec, std::uint32_t super_group_size);

// Per-worker variant: entries are keyed by the worker rank while the locality
// scale layout stays shared, the way replicas of one model see correlated
// per-coordinate magnitudes. generate() is rank 0.
std::vector<float> generate_worker(const GeneratorSpec& spec, std::uint32_t super_group_size,
                                   std::uint32_t rank);

// Raw gradient file: magic "DYNQGRAD", u32 little-endian length, then d
// float32 little-endian values. See FORMAT.md.
void save_raw(const std::string& path, const std::vector<float>& values);
std::vector<float> load_raw(const std::string& path);

}  // namespace dynamiq
