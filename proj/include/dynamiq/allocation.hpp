#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dynamiq {

// Thrown when no allocation fits the budget (e.g. b-bar does not exceed the
// minimum width); distinct from configuration errors so the CLI can report
// runtime infeasibility separately.
struct InfeasibleBudget : std::runtime_error {
  explicit InfeasibleBudget(const std::string& what) : std::runtime_error(what) {}
};

// Bit budget for the main all-reduce. The payload budget deducts the scale
// metadata from the per-coordinate budget b: 8-bit group scale per s entries
// plus a 16-bit super-group scale per S entries. Stats-phase volume is
// charged separately by the metrics.
struct BudgetSpec {
  double total_bits_per_coordinate = 5.0;  // b
  std::uint32_t group_size = 16;           // s
  std::uint32_t super_group_size = 256;    // S
  std::vector<int> widths = {2, 4, 8};     // W, sorted ascending
  bool hierarchical_scales = true;         // flat scales cost 16/s instead
};

double payload_budget(const BudgetSpec& spec);  // returns b-bar, throws when <= min(W)

// Estimated per-bit MSE benefit of lowering threshold T_{a,b}:
// T * (4^(b-a) - 1) / (4^b * (b - a)).
double per_bit_benefit(double threshold, int a, int b);

struct Rational {
  long long num = 0;
  long long den = 1;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

// Consecutive-threshold ratios T_{a,b} / T_{b,c} obtained by equating the
// per-bit benefit of adjacent threshold pairs, reduced exactly.
std::vector<Rational> threshold_ratios(std::span<const int> widths);

struct BitAllocation {
  std::vector<std::uint8_t> widths;         // one per super-group
  std::vector<std::uint32_t> permutation;   // position k holds super-group permutation[k]
  std::uint64_t payload_bits = 0;           // sum of widths[j] * S
  double u = 0.0;                           // fast-allocator search state
};

// Threshold-family allocator for any width set: super-groups with
// F_j in [T_{a,b}, T_{b,c}) get b bits, boundary ties taking the higher
// width. The single free threshold is resolved by bisection over the sorted
// crossing points so the payload is the largest value not exceeding d*b-bar.
BitAllocation allocate_general(std::span<const float> sq_norms, const BudgetSpec& spec);

// Fast log-domain allocator for W = {2,4,8}:
//   z_j = 4/log2(512/17) * log2(F_j) + u,  q_j = 2 if z_j < 4,
//   4 if z_j in [4,8), 8 if z_j >= 8,
// with u found by in-call bisection so the payload is maximal within budget.
BitAllocation allocate_fast(std::span<const float> sq_norms, const BudgetSpec& spec);

// Width map for a fixed u (the cross-round mode evaluates this directly).
std::vector<std::uint8_t> fast_widths_at(std::span<const float> sq_norms, double u);

// Thresholds decoded from the search state: T_{2,4} at z = 4, T_{4,8} at z = 8.
double fast_threshold_24(double u);
double fast_threshold_48(double u);

// Cross-round variant: uses the carried u for this round (projected down to
// the nearest budget-compliant step when needed) and nudges it by one
// bisection step for the next round.
struct FastAllocatorState {
  double lo = -1e6;
  double hi = 1e6;
  double u = 0.0;
};
BitAllocation allocate_fast_stateful(std::span<const float> sq_norms, const BudgetSpec& spec,
                                     FastAllocatorState& state);

// Stable order by width class: 8, 4, 2, then 16 (the passthrough class sits
// last on the wire).
std::vector<std::uint32_t> build_permutation(std::span<const std::uint8_t> widths);
std::vector<std::uint32_t> invert_permutation(std::span<const std::uint32_t> perm);

// Reorders super-group blocks: output block k = input block perm[k].
void apply_permutation_blocks(std::span<const float> in, std::span<float> out,
                              std::span<const std::uint32_t> perm, std::uint32_t block);

}  // namespace dynamiq
