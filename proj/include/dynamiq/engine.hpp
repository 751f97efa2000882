#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dynamiq/allocation.hpp"
#include "dynamiq/codec.hpp"
#include "dynamiq/gradient.hpp"
#include "dynamiq/metrics.hpp"
#include "dynamiq/random.hpp"
#include "dynamiq/stats.hpp"
#include "dynamiq/topology.hpp"

namespace dynamiq {

enum class TopologyKind { kRing, kButterfly };
enum class AllocatorKind { kGeneral, kFast, kFixed };
enum class CodecKind { kQuantized, kLossless };

struct PipelineConfig {
  std::uint32_t n_workers = 4;
  std::uint32_t group_size = 16;         // s
  std::uint32_t super_group_size = 256;  // S
  double budget_bits = 5.0;              // b

  bool non_uniform = true;
  bool variable_width = true;
  bool hierarchical_scales = true;
  bool correlated = true;
  int fixed_width = 4;  // used when variable_width is off

  AllocatorKind allocator = AllocatorKind::kFast;
  TopologyKind topology = TopologyKind::kRing;
  CodecKind codec = CodecKind::kQuantized;

  SharedSeed seed{1, 0};
  unsigned threads = 1;  // worker threads over chunks; results are identical

  void validate() const;
  double scale_overhead_bits() const;  // 8/s + 16/S hierarchical, 16/s flat
};

struct RoundResult {
  std::vector<float> synced;   // estimate of the sum of worker gradients
  std::vector<double> exact;   // direct double-precision summation oracle
  double vnmse = 0.0;
  double mse = 0.0;
  WireVolume wire;
  std::vector<HopError> hop_errors;  // per compression event, schedule order
  std::uint64_t wire_hash = 0;       // over all transmitted bytes, chunk-major
  BitAllocation allocation;          // widths in original super-group order
};

// Direct double-precision summation of the worker gradients.
std::vector<double> run_exact(const std::vector<std::vector<float>>& worker_values);

// Executes one full round: local stats, exact stats all-reduce, normalize,
// width allocation, width-sorted reorder, chunked reduce-scatter with
// compression at the leaves and fused decompress-accumulate(-recompress) at
// internal nodes, compressed all-gather, reorder back, denormalize.
RoundResult run_round(const std::vector<std::vector<float>>& worker_values,
                      const PipelineConfig& config);

// The cumulative variant ladder: uniform fixed-width, non-uniform
// fixed-width, + variable bitwidth, + hierarchical scales (group size halved
// to 16), + correlated rounding.
std::vector<std::pair<std::string, PipelineConfig>> ablation_ladder(const PipelineConfig& base);

}  // namespace dynamiq
