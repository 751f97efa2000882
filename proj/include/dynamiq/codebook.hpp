#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace dynamiq {

// Quantization value set for one bitwidth. With b bits per entry we spend one
// bit on the sign and index into 2^(b-1) non-negative values in [0, 1].
//
// Non-uniform sets follow f(eps, r) = ((1+2*eps^2)^r - 1) / ((1+2*eps^2)^(N-1) - 1)
// with N = 2^(b-1): eps near zero approaches uniform spacing, larger eps packs
// more values near zero. Values are evaluated in double and stored as float;
// all quantization arithmetic downstream runs in single precision so the wire
// behavior does not depend on platform pow() rounding.
struct Codebook {
  int bitwidth = 0;          // 2, 4 or 8
  double epsilon = 0.0;      // 0 only for uniform codebooks
  bool uniform = false;
  std::vector<float> values; // strictly increasing, values.front()==0, back()==1

  std::size_t size() const { return values.size(); }
};

// f(eps, r) evaluated in double precision.
double nonuniform_value(int bitwidth, double epsilon, int r);

Codebook build_codebook(int bitwidth, double epsilon);
Codebook uniform_codebook(int bitwidth);

// Per-bitwidth curvature defaults, chosen by the grid search implemented in
// tools/epsilon_grid.cpp (argmin of empirical vNMSE over standard-normal
// groups of 16). See the table in codebook.cpp.
double default_epsilon(int bitwidth);

// Indices (lo, hi) with values[lo] <= v <= values[hi] and hi - lo <= 1;
// lo == hi exactly when v is a codebook value. Requires v in [0, 1].
std::pair<std::uint32_t, std::uint32_t> bracket(const Codebook& cb, float v);

// One stochastic-quantization step: rounds v to the upper bracket value with
// probability (v - lo) / (hi - lo), where u ~ U[0,1) supplies the coin.
std::uint32_t stochastic_index(const Codebook& cb, float v, double u);

// Codebooks for every codec width; width 16 bypasses codebooks entirely.
struct CodebookSet {
  Codebook b2, b4, b8;

  const Codebook& at(int width) const;
  static CodebookSet non_uniform_defaults();
  static CodebookSet uniform_all();
};

}  // namespace dynamiq
