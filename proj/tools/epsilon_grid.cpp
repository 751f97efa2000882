// Derivation of the per-bitwidth default epsilon constants in codebook.cpp.
//
// For each bitwidth and each epsilon on the grid {0.05, 0.10, ..., 2.00},
// quantizes standard-normal groups of size 16 (exact group scales, unbiased
// stochastic rounding) and reports the aggregate vNMSE; the stored default is
// the argmin. Common random numbers are shared across the grid so the curves
// are directly comparable.
//
// Usage: epsilon_grid [groups]    (default 1000000)

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>
#include <vector>

#include "dynamiq/codebook.hpp"
#include "dynamiq/random.hpp"

using namespace dynamiq;

namespace {

double keyed_normal(SharedSeed seed, std::uint64_t index) {
  RandomKey k1{Purpose::kGenEntry, 0, 0, index};
  RandomKey k2{Purpose::kGenEntry, 0, 1, index};
  double u1 = uniform_at(seed, k1);
  double u2 = uniform_at(seed, k2);
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double grid_vnmse(const Codebook& cb, std::size_t groups, std::size_t group_size,
                  SharedSeed seed) {
  double err2 = 0.0, norm2 = 0.0;
  std::vector<float> g(group_size);
  for (std::size_t t = 0; t < groups; ++t) {
    float m = 0.0f;
    for (std::size_t k = 0; k < group_size; ++k) {
      g[k] = static_cast<float>(keyed_normal(seed, t * group_size + k));
      m = std::max(m, std::fabs(g[k]));
    }
    if (m == 0.0f) continue;
    for (std::size_t k = 0; k < group_size; ++k) {
      const float v = std::fabs(g[k]) / m;
      RandomKey key{Purpose::kEntryQuant, 0, t, k};
      std::uint32_t idx = stochastic_index(cb, v, uniform_at(seed, key));
      const float dec = std::copysign(cb.values[idx] * m, g[k]);
      const double e = static_cast<double>(dec) - g[k];
      err2 += e * e;
      norm2 += static_cast<double>(g[k]) * g[k];
    }
  }
  return err2 / norm2;
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t groups = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 1000000;
  const std::size_t group_size = 16;
  SharedSeed seed{20240817, 0};

  for (int b : {2, 4, 8}) {
    std::printf("bitwidth %d (%zu groups of %zu)\n", b, groups, group_size);
    double best_eps = 0.0, best = 1e300;
    for (int i = 1; i <= 40; ++i) {
      const double eps = 0.05 * i;
      const double v = grid_vnmse(build_codebook(b, eps), groups, group_size, seed);
      std::printf("  eps %.2f  vnmse %.6e\n", eps, v);
      if (v < best) {
        best = v;
        best_eps = eps;
      }
    }
    std::printf("  -> argmin eps %.2f (vnmse %.6e)\n\n", best_eps, best);
  }
  return 0;
}
