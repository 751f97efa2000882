#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "dynamiq/random.hpp"

namespace dynamiq::testutil {

// Deterministic standard normals for test inputs, independent of the
// library's quantization streams.
inline double test_normal(std::uint64_t seed, std::uint64_t index) {
  SharedSeed s{seed, 0};
  RandomKey k1{Purpose::kGenEntry, 0xfeed, 0, index};
  RandomKey k2{Purpose::kGenEntry, 0xfeed, 1, index};
  double u1 = uniform_at(s, k1);
  double u2 = uniform_at(s, k2);
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline std::vector<float> normal_vector(std::uint64_t seed, std::size_t count,
                                        double scale = 1.0) {
  std::vector<float> v(count);
  for (std::size_t i = 0; i < count; ++i)
    v[i] = static_cast<float>(scale * test_normal(seed, i));
  return v;
}

inline double test_uniform(std::uint64_t seed, std::uint64_t index) {
  SharedSeed s{seed, 0};
  return uniform_at(s, RandomKey{Purpose::kGenEntry, 0xabba, 0, index});
}

// Kolmogorov-Smirnov statistic against U[0,1).
inline double ks_uniform(std::vector<double> samples) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double ks = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    ks = std::max({ks, std::fabs(samples[i] - lo), std::fabs(samples[i] - hi)});
  }
  return ks;
}

// Two-sample KS between sorted samples.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double ks = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j])
      ++i;
    else
      ++j;
    const double fa = static_cast<double>(i) / a.size();
    const double fb = static_cast<double>(j) / b.size();
    ks = std::max(ks, std::fabs(fa - fb));
  }
  return ks;
}

}  // namespace dynamiq::testutil
