#include "dynamiq/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dynamiq {

Gradient Gradient::from_values(std::vector<float> values, std::uint32_t s, std::uint32_t S) {
  if (s == 0 || S == 0 || S % s != 0)
    throw std::invalid_argument("super-group size must be a positive multiple of the group size");
  Gradient g;
  g.logical_size = values.size();
  g.group_size = s;
  g.super_group_size = S;
  std::size_t padded = (values.size() + S - 1) / S * S;
  values.resize(padded, 0.0f);
  g.data = std::move(values);
  return g;
}

std::vector<SuperGroupStats> compute_stats(const Gradient& g) {
  std::vector<SuperGroupStats> stats(g.super_group_count());
  for (std::size_t j = 0; j < stats.size(); ++j) {
    double sum = 0.0, sq = 0.0;
    for (float x : g.super_group(j)) {
      sum += x;
      sq += static_cast<double>(x) * x;
    }
    stats[j].mean = static_cast<float>(sum / g.super_group_size);
    stats[j].sq_norm = static_cast<float>(sq);
  }
  return stats;
}

std::vector<SuperGroupStats> reduce_stats(const std::vector<std::vector<SuperGroupStats>>& per_worker) {
  if (per_worker.empty()) throw std::invalid_argument("reduce_stats needs at least one worker");
  const std::size_t count = per_worker.front().size();
  for (const auto& w : per_worker)
    if (w.size() != count)
      throw std::invalid_argument("reduce_stats: stats length mismatch across workers");
  std::vector<SuperGroupStats> global(count);
  for (std::size_t j = 0; j < count; ++j) {
    double mean_sum = 0.0, sq_sum = 0.0;
    for (const auto& w : per_worker) {
      mean_sum += w[j].mean;
      sq_sum += w[j].sq_norm;
    }
    global[j].mean = static_cast<float>(mean_sum / per_worker.size());
    global[j].sq_norm = static_cast<float>(sq_sum);
  }
  return global;
}

void normalize(Gradient& g, const std::vector<SuperGroupStats>& global) {
  if (global.size() != g.super_group_count())
    throw std::invalid_argument("normalize: stats length mismatch");
  for (std::size_t j = 0; j < global.size(); ++j) {
    const float mu = global[j].mean;
    for (float& x : g.super_group(j)) x -= mu;
  }
}

std::vector<float> denormalize(const Gradient& aggregated,
                               const std::vector<SuperGroupStats>& global,
                               std::uint32_t n_workers) {
  if (global.size() != aggregated.super_group_count())
    throw std::invalid_argument("denormalize: stats length mismatch");
  std::vector<float> out(aggregated.data);
  for (std::size_t j = 0; j < global.size(); ++j) {
    const float shift = static_cast<float>(n_workers) * global[j].mean;
    for (std::size_t k = 0; k < aggregated.super_group_size; ++k)
      out[j * aggregated.super_group_size + k] += shift;
  }
  out.resize(aggregated.logical_size);
  return out;
}

std::vector<double> locality_cdf(const Gradient& g, Granularity granularity,
                                 bool shuffle, SharedSeed seed) {
  const std::size_t block =
      granularity == Granularity::kGroup ? g.group_size : g.super_group_size;
  const std::size_t d = g.logical_size;

  std::vector<float> entries(g.data.begin(), g.data.begin() + d);
  if (shuffle) {
    RandomKey key{Purpose::kShuffle, 0, 0, 0};
    std::vector<std::uint32_t> pi = permutation_at(seed, key, static_cast<std::uint32_t>(d));
    std::vector<float> shuffled(d);
    for (std::size_t i = 0; i < d; ++i) shuffled[i] = entries[pi[i]];
    entries = std::move(shuffled);
  }

  std::vector<double> norms;
  norms.reserve((d + block - 1) / block);
  for (std::size_t start = 0; start < d; start += block) {
    const std::size_t end = std::min(start + block, d);
    double sq = 0.0;
    for (std::size_t i = start; i < end; ++i)
      sq += static_cast<double>(entries[i]) * entries[i];
    norms.push_back(std::sqrt(sq));
  }
  std::sort(norms.begin(), norms.end());
  return norms;
}

}  // namespace dynamiq
