#include "dynamiq/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dynamiq {

namespace {

void check_bitwidth(int bitwidth) {
  if (bitwidth != 2 && bitwidth != 4 && bitwidth != 8)
    throw std::invalid_argument("codebook bitwidth must be 2, 4 or 8, got " +
                                std::to_string(bitwidth));
}

}  // namespace

double nonuniform_value(int bitwidth, double epsilon, int r) {
  check_bitwidth(bitwidth);
  const int top = (1 << (bitwidth - 1)) - 1;
  if (r < 0 || r > top) throw std::invalid_argument("codebook index out of range");
  if (r == 0) return 0.0;
  if (r == top) return 1.0;
  const double base = 1.0 + 2.0 * epsilon * epsilon;
  return (std::pow(base, r) - 1.0) / (std::pow(base, top) - 1.0);
}

Codebook build_codebook(int bitwidth, double epsilon) {
  check_bitwidth(bitwidth);
  if (!(epsilon > 0.0))
    throw std::invalid_argument("codebook epsilon must be positive");
  Codebook cb;
  cb.bitwidth = bitwidth;
  cb.epsilon = epsilon;
  cb.uniform = false;
  const int count = 1 << (bitwidth - 1);
  cb.values.resize(count);
  for (int r = 0; r < count; ++r)
    cb.values[r] = static_cast<float>(nonuniform_value(bitwidth, epsilon, r));
  // Large eps can underflow adjacent small values to the same float; keep the
  // stored sequence strictly increasing.
  for (int r = 1; r < count; ++r)
    if (cb.values[r] <= cb.values[r - 1])
      cb.values[r] = std::nextafter(cb.values[r - 1], 2.0f);
  return cb;
}

Codebook uniform_codebook(int bitwidth) {
  check_bitwidth(bitwidth);
  Codebook cb;
  cb.bitwidth = bitwidth;
  cb.epsilon = 0.0;
  cb.uniform = true;
  const int count = 1 << (bitwidth - 1);
  cb.values.resize(count);
  for (int r = 0; r < count; ++r)
    cb.values[r] = static_cast<float>(static_cast<double>(r) / (count - 1));
  return cb;
}

double default_epsilon(int bitwidth) {
  check_bitwidth(bitwidth);
  // Argmin of empirical vNMSE over the grid {0.05, 0.10, ..., 2.00} with 1e6
  // standard-normal groups of size 16 and exact group scales; derivation in
  // tools/epsilon_grid.cpp. b=2 only ever has the values {0,1}, so eps is
  // inert there and the grid argmin is recorded for uniformity.
  switch (bitwidth) {
    case 2: return 0.05;
    case 4: return 0.25;
    case 8: return 0.05;
  }
  return 0.0;  // unreachable
}

std::pair<std::uint32_t, std::uint32_t> bracket(const Codebook& cb, float v) {
  if (!(v >= 0.0f && v <= 1.0f))
    throw std::invalid_argument("bracket input outside [0, 1]");
  const auto& q = cb.values;
  auto it = std::lower_bound(q.begin(), q.end(), v);  // first value >= v
  std::uint32_t hi = static_cast<std::uint32_t>(it - q.begin());
  if (q[hi] == v) return {hi, hi};
  return {hi - 1, hi};
}

std::uint32_t stochastic_index(const Codebook& cb, float v, double u) {
  auto [lo, hi] = bracket(cb, v);
  if (lo == hi) return lo;
  const float p_up = (v - cb.values[lo]) / (cb.values[hi] - cb.values[lo]);
  return u < static_cast<double>(p_up) ? hi : lo;
}

const Codebook& CodebookSet::at(int width) const {
  switch (width) {
    case 2: return b2;
    case 4: return b4;
    case 8: return b8;
  }
  throw std::invalid_argument("no codebook for width " + std::to_string(width));
}

CodebookSet CodebookSet::non_uniform_defaults() {
  return {build_codebook(2, default_epsilon(2)),
          build_codebook(4, default_epsilon(4)),
          build_codebook(8, default_epsilon(8))};
}

CodebookSet CodebookSet::uniform_all() {
  return {uniform_codebook(2), uniform_codebook(4), uniform_codebook(8)};
}

}  // namespace dynamiq
