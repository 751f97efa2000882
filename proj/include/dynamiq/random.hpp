#pragma once

#include <cstdint>
#include <vector>

namespace dynamiq {

// Deterministic shared randomness. Every draw in the system is a pure
// function of (seed, round, key), so any number of simulated workers can
// reproduce the same value without coordination, in any order.

struct SharedSeed {
  std::uint64_t seed = 0;
  std::uint64_t round = 0;
};

enum class Purpose : std::uint32_t {
  kEntryQuant = 1,
  kScaleQuant = 2,
  kPermutation = 3,
  kShuffle = 4,
  kGenEntry = 5,
  kGenScale = 6,
};

struct RandomKey {
  Purpose purpose = Purpose::kEntryQuant;
  std::uint64_t chunk = 0;
  std::uint64_t super_group = 0;
  std::uint64_t entry = 0;
};

// Packs a slot index into the key's entry field so sequential re-quantizations
// of the same entry draw fresh values. Entry indices stay below 2^32.
inline RandomKey with_slot(RandomKey key, std::uint32_t slot) {
  key.entry |= static_cast<std::uint64_t>(slot) << 32;
  return key;
}

std::uint64_t random_bits(SharedSeed seed, RandomKey key);

// Uniform draw in [0, 1).
double uniform_at(SharedSeed seed, RandomKey key);

// Uniform permutation of {0, ..., n-1}, identical for every caller with the
// same inputs.
std::vector<std::uint32_t> permutation_at(SharedSeed seed, RandomKey key, std::uint32_t n);

// permutation_at(seed, key, n)[slot] without the heap allocation; the codec
// calls this once per entry per hop.
std::uint32_t permutation_slot(SharedSeed seed, RandomKey key, std::uint32_t slot, std::uint32_t n);

// Correlated rounding variable (pi[slot] + gamma[slot]) / n. For a fixed key
// the n slot values land in pairwise-distinct intervals [k/n, (k+1)/n), each
// marginally uniform on [0, 1).
double correlated_uniform(SharedSeed seed, RandomKey key, std::uint32_t slot, std::uint32_t n);

}  // namespace dynamiq
