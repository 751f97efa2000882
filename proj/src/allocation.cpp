#include "dynamiq/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace dynamiq {

namespace {

constexpr int kAllowedWidths[] = {1, 2, 4, 8, 16};

void check_widths(std::span<const int> widths) {
  if (widths.empty()) throw std::invalid_argument("width set is empty");
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (std::find(std::begin(kAllowedWidths), std::end(kAllowedWidths), widths[i]) ==
        std::end(kAllowedWidths))
      throw std::invalid_argument("unsupported width " + std::to_string(widths[i]));
    if (i > 0 && widths[i] <= widths[i - 1])
      throw std::invalid_argument("width set must be strictly ascending");
  }
}

long long ipow4(int e) {
  long long r = 1;
  for (int i = 0; i < e; ++i) r *= 4;
  return r;
}

// log2(512/17); z_j = (4 / kLogRatio) * log2(F_j) + u.
const double kLogRatio = std::log2(512.0 / 17.0);
const double kAlpha = 4.0 / kLogRatio;

std::uint64_t payload_of(std::span<const std::uint8_t> widths, std::uint32_t S) {
  std::uint64_t bits = 0;
  for (std::uint8_t w : widths) bits += static_cast<std::uint64_t>(w) * S;
  return bits;
}

}  // namespace

double payload_budget(const BudgetSpec& spec) {
  check_widths(spec.widths);
  if (spec.group_size == 0 || spec.super_group_size % spec.group_size != 0)
    throw std::invalid_argument("invalid group sizes");
  const double overhead = spec.hierarchical_scales
                              ? 8.0 / spec.group_size + 16.0 / spec.super_group_size
                              : 16.0 / spec.group_size;
  const double bbar = spec.total_bits_per_coordinate - overhead;
  if (!(bbar > spec.widths.front()))
    throw InfeasibleBudget("payload budget " + std::to_string(bbar) +
                                " does not exceed the minimum width " +
                                std::to_string(spec.widths.front()));
  return bbar;
}

double per_bit_benefit(double threshold, int a, int b) {
  if (a >= b) throw std::invalid_argument("per_bit_benefit requires a < b");
  const double num = std::pow(4.0, b - a) - 1.0;
  const double den = std::pow(4.0, b) * (b - a);
  return threshold * num / den;
}

std::vector<Rational> threshold_ratios(std::span<const int> widths) {
  check_widths(widths);
  std::vector<Rational> ratios;
  // Equating per-bit benefits of pairs (a,b) and (b,c) gives
  // T_{a,b} / T_{b,c} = (4^(c-b) - 1)(b - a) / (4^(c-b) (c - b)(4^(b-a) - 1)).
  for (std::size_t i = 0; i + 2 < widths.size(); ++i) {
    const int a = widths[i], b = widths[i + 1], c = widths[i + 2];
    long long num = (ipow4(c - b) - 1) * (b - a);
    long long den = ipow4(c - b) * (c - b) * (ipow4(b - a) - 1);
    long long g = std::gcd(num, den);
    ratios.push_back({num / g, den / g});
  }
  return ratios;
}

namespace {

// Chain coefficients relative to the base threshold: threshold k (between
// widths[k] and widths[k+1]) equals base * chain[k].
std::vector<double> threshold_chain(std::span<const int> widths) {
  std::vector<Rational> ratios = threshold_ratios(widths);
  std::vector<double> chain(widths.size() - 1, 1.0);
  for (std::size_t k = 0; k + 1 < chain.size(); ++k)
    chain[k + 1] = chain[k] / ratios[k].value();
  return chain;
}

std::vector<std::uint8_t> general_widths_at(std::span<const float> sq_norms,
                                            std::span<const int> widths,
                                            std::span<const double> chain, double base) {
  std::vector<std::uint8_t> out(sq_norms.size());
  for (std::size_t j = 0; j < sq_norms.size(); ++j) {
    const double f = sq_norms[j];
    int level = 0;  // index into widths; F in [T_{a,b}, T_{b,c}) takes width b
    for (std::size_t k = 0; k < chain.size(); ++k)
      if (f >= base * chain[k]) level = static_cast<int>(k) + 1;
    out[j] = static_cast<std::uint8_t>(widths[level]);
  }
  return out;
}

void finalize(BitAllocation& alloc, std::uint32_t S) {
  alloc.payload_bits = payload_of(alloc.widths, S);
  alloc.permutation = build_permutation(alloc.widths);
}

}  // namespace

BitAllocation allocate_general(std::span<const float> sq_norms, const BudgetSpec& spec) {
  const double bbar = payload_budget(spec);
  const std::uint32_t S = spec.super_group_size;
  const std::uint64_t d = static_cast<std::uint64_t>(sq_norms.size()) * S;
  const double budget = static_cast<double>(d) * bbar;
  for (float f : sq_norms)
    if (!(f >= 0.0f)) throw std::invalid_argument("squared norms must be non-negative");

  BitAllocation alloc;
  if (spec.widths.size() == 1) {
    alloc.widths.assign(sq_norms.size(), static_cast<std::uint8_t>(spec.widths[0]));
    alloc.u = 0.0;
    finalize(alloc, S);
    return alloc;
  }

  const std::vector<double> chain = threshold_chain(spec.widths);

  // The payload is a non-increasing step function of the base threshold with
  // steps exactly where some F_j crosses some threshold; bisect over those
  // crossing points for the largest payload within budget.
  std::vector<double> points;
  points.reserve(sq_norms.size() * chain.size() + 1);
  for (float f : sq_norms) {
    if (f <= 0.0f) continue;
    for (double c : chain) points.push_back(static_cast<double>(f) / c);
  }
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());
  points.push_back(points.empty() ? 1.0 : points.back() * 2.0 + 1.0);  // all-min plateau

  auto payload_at = [&](double base) {
    return payload_of(general_widths_at(sq_norms, spec.widths, chain, base), S);
  };

  std::size_t lo = 0, hi = points.size() - 1;
  if (payload_at(points[lo]) > budget) {
    while (lo + 1 < hi) {
      std::size_t mid = (lo + hi) / 2;
      if (payload_at(points[mid]) <= budget)
        hi = mid;
      else
        lo = mid;
    }
    lo = hi;
  }
  const double base = points[lo];
  alloc.widths = general_widths_at(sq_norms, spec.widths, chain, base);
  alloc.u = base;  // resolved base threshold
  finalize(alloc, S);
  if (static_cast<double>(alloc.payload_bits) > budget)
    throw InfeasibleBudget("bit allocation infeasible within budget");
  return alloc;
}

double fast_threshold_24(double u) { return std::exp2((4.0 - u) / kAlpha); }
double fast_threshold_48(double u) { return std::exp2((8.0 - u) / kAlpha); }

std::vector<std::uint8_t> fast_widths_at(std::span<const float> sq_norms, double u) {
  // q_j = 2^clamp([1,3], floor(log2 z_j)) phrased as threshold comparisons:
  // z_j >= 4 iff F_j >= T_{2,4}(u), z_j >= 8 iff F_j >= T_{4,8}(u). The
  // norms live in float (they arrive over the 32-bit stats wire), so the
  // decoded thresholds are compared at float precision and a norm planted
  // exactly at a boundary ties upward.
  const float t24 = static_cast<float>(fast_threshold_24(u));
  const float t48 = static_cast<float>(fast_threshold_48(u));
  std::vector<std::uint8_t> widths(sq_norms.size());
  for (std::size_t j = 0; j < sq_norms.size(); ++j) {
    const float f = sq_norms[j];
    widths[j] = f >= t48 ? 8 : (f >= t24 ? 4 : 2);
  }
  return widths;
}

namespace {

constexpr double kFastSearchLo = -1e6;
constexpr double kFastSearchHi = 1e6;

void check_fast_spec(const BudgetSpec& spec) {
  if (spec.widths != std::vector<int>{2, 4, 8})
    throw std::invalid_argument("allocate_fast requires W = {2,4,8}");
}

// Midpoints of the plateaus of payload(u), which jumps where some z_j crosses
// 4 or 8. Evaluating between crossings keeps the search exact.
std::vector<double> fast_sample_points(std::span<const float> sq_norms) {
  std::vector<double> flips;
  flips.reserve(sq_norms.size() * 2);
  for (float f : sq_norms) {
    if (f <= 0.0f) continue;  // log2(0) = -inf never crosses
    const double l = kAlpha * std::log2(static_cast<double>(f));
    flips.push_back(4.0 - l);
    flips.push_back(8.0 - l);
  }
  std::sort(flips.begin(), flips.end());
  flips.erase(std::unique(flips.begin(), flips.end()), flips.end());
  std::vector<double> samples;
  samples.reserve(flips.size() + 1);
  if (flips.empty()) {
    samples.push_back(0.0);
    return samples;
  }
  samples.push_back(flips.front() - 1.0);
  for (std::size_t i = 0; i + 1 < flips.size(); ++i)
    samples.push_back(0.5 * (flips[i] + flips[i + 1]));
  samples.push_back(flips.back() + 1.0);
  for (double& s : samples) s = std::clamp(s, kFastSearchLo, kFastSearchHi);
  return samples;
}

}  // namespace

BitAllocation allocate_fast(std::span<const float> sq_norms, const BudgetSpec& spec) {
  check_fast_spec(spec);
  const double bbar = payload_budget(spec);
  const std::uint32_t S = spec.super_group_size;
  const double budget = static_cast<double>(sq_norms.size()) * S * bbar;

  const std::vector<double> samples = fast_sample_points(sq_norms);
  auto payload_u = [&](double u) { return payload_of(fast_widths_at(sq_norms, u), S); };

  // payload(u) is non-decreasing in u; take the largest sample within budget.
  std::size_t lo = 0, hi = samples.size() - 1;
  if (payload_u(samples[lo]) > budget)
    throw InfeasibleBudget("bit allocation infeasible within budget");
  if (payload_u(samples[hi]) <= budget) {
    lo = hi;
  } else {
    while (lo + 1 < hi) {
      std::size_t mid = (lo + hi) / 2;
      if (payload_u(samples[mid]) <= budget)
        lo = mid;
      else
        hi = mid;
    }
  }

  BitAllocation alloc;
  alloc.u = samples[lo];
  alloc.widths = fast_widths_at(sq_norms, alloc.u);
  finalize(alloc, S);
  if (static_cast<double>(alloc.payload_bits) > budget)
    throw InfeasibleBudget("bit allocation infeasible within budget");
  return alloc;
}

BitAllocation allocate_fast_stateful(std::span<const float> sq_norms, const BudgetSpec& spec,
                                     FastAllocatorState& state) {
  check_fast_spec(spec);
  const double bbar = payload_budget(spec);
  const std::uint32_t S = spec.super_group_size;
  const double budget = static_cast<double>(sq_norms.size()) * S * bbar;

  BitAllocation alloc;
  alloc.widths = fast_widths_at(sq_norms, state.u);
  const bool over = static_cast<double>(payload_of(alloc.widths, S)) > budget;
  if (over) {
    // Ship a compliant allocation this round: largest in-budget step at or
    // below the carried u.
    std::vector<double> samples = fast_sample_points(sq_norms);
    samples.erase(std::remove_if(samples.begin(), samples.end(),
                                 [&](double s) { return s > state.u; }),
                  samples.end());
    double chosen = kFastSearchLo;
    for (auto it = samples.rbegin(); it != samples.rend(); ++it) {
      if (static_cast<double>(payload_of(fast_widths_at(sq_norms, *it), S)) <= budget) {
        chosen = *it;
        break;
      }
    }
    alloc.widths = fast_widths_at(sq_norms, chosen);
    if (static_cast<double>(payload_of(alloc.widths, S)) > budget)
      throw InfeasibleBudget("bit allocation infeasible within budget");
  }
  alloc.u = state.u;
  finalize(alloc, S);

  // One bisection step on u for the next round.
  if (over)
    state.hi = state.u;
  else
    state.lo = state.u;
  state.u = 0.5 * (state.lo + state.hi);
  return alloc;
}

std::vector<std::uint32_t> build_permutation(std::span<const std::uint8_t> widths) {
  std::vector<std::uint32_t> perm(widths.size());
  for (std::uint32_t i = 0; i < perm.size(); ++i) perm[i] = i;
  auto rank = [](std::uint8_t w) { return w == 16 ? 0x100 : 16 - static_cast<int>(w); };
  std::stable_sort(perm.begin(), perm.end(), [&](std::uint32_t a, std::uint32_t b) {
    return rank(widths[a]) < rank(widths[b]);
  });
  return perm;
}

std::vector<std::uint32_t> invert_permutation(std::span<const std::uint32_t> perm) {
  std::vector<std::uint32_t> inv(perm.size());
  for (std::uint32_t k = 0; k < perm.size(); ++k) inv[perm[k]] = k;
  return inv;
}

void apply_permutation_blocks(std::span<const float> in, std::span<float> out,
                              std::span<const std::uint32_t> perm, std::uint32_t block) {
  if (in.size() != out.size() || in.size() != perm.size() * block)
    throw std::invalid_argument("apply_permutation_blocks: size mismatch");
  for (std::size_t k = 0; k < perm.size(); ++k)
    std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(perm[k]) * block, block,
                out.begin() + static_cast<std::ptrdiff_t>(k) * block);
}

}  // namespace dynamiq
