#pragma once

#include <cstdint>
#include <vector>

#include "dynamiq/gradient.hpp"
#include "dynamiq/random.hpp"

namespace dynamiq {

// Per-super-group statistics: mean and sum of squared entries. Aggregated
// exactly across workers by the initial all-reduce; the wire charges
// 2 x 32 bits per super-group per hop for them.
struct SuperGroupStats {
  float mean = 0.0f;     // mu_j
  float sq_norm = 0.0f;  // F_j
};

std::vector<SuperGroupStats> compute_stats(const Gradient& g);

// Global mean = average of worker means, global sq_norm = sum of worker
// sq_norms; accumulated in double.
std::vector<SuperGroupStats> reduce_stats(const std::vector<std::vector<SuperGroupStats>>& per_worker);

// Subtracts the global mean from every entry of its super-group (padding
// entries included; denormalize undoes the shift).
void normalize(Gradient& g, const std::vector<SuperGroupStats>& global);

// Adds n_workers * mean back to every entry, recovering an estimate of the
// sum of worker gradients, and strips the padding.
std::vector<float> denormalize(const Gradient& aggregated,
                               const std::vector<SuperGroupStats>& global,
                               std::uint32_t n_workers);

enum class Granularity { kGroup, kSuperGroup };

// Sorted per-block l2 norms over the logical entries, optionally after a
// keyed uniform shuffle. Feeds the locality CDF output of the CLI.
std::vector<double> locality_cdf(const Gradient& g, Granularity granularity,
                                 bool shuffle, SharedSeed seed);

}  // namespace dynamiq
