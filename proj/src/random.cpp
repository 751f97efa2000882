#include "dynamiq/random.hpp"

#include <stdexcept>

namespace dynamiq {

namespace {

// splitmix64 finalizer; full-avalanche mix of one 64-bit word.
inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 33;
  z *= 0xff51afd7ed558ccdULL;
  z ^= z >> 33;
  z *= 0xc4ceb9fe1a85ec53ULL;
  z ^= z >> 33;
  return z;
}

inline std::uint64_t absorb(std::uint64_t h, std::uint64_t word) {
  return mix64(h ^ (word + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

// Counter word lets internal consumers (Fisher-Yates steps) derive multiple
// independent draws from one key without touching the public key fields.
inline std::uint64_t keyed_bits(SharedSeed seed, const RandomKey& key, std::uint64_t counter) {
  std::uint64_t h = mix64(seed.seed ^ 0x6a09e667f3bcc909ULL);
  h = absorb(h, seed.round);
  h = absorb(h, static_cast<std::uint64_t>(key.purpose));
  h = absorb(h, key.chunk);
  h = absorb(h, key.super_group);
  h = absorb(h, key.entry);
  h = absorb(h, counter);
  return h;
}

inline double bits_to_unit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace

std::uint64_t random_bits(SharedSeed seed, RandomKey key) {
  return keyed_bits(seed, key, 0);
}

double uniform_at(SharedSeed seed, RandomKey key) {
  return bits_to_unit(keyed_bits(seed, key, 0));
}

namespace {

// Fisher-Yates; the modulo bias is ~n/2^64 and immaterial at simulator n.
template <typename Out>
void fill_permutation(SharedSeed seed, const RandomKey& key, std::uint32_t n, Out pi) {
  for (std::uint32_t i = 0; i < n; ++i) pi[i] = i;
  for (std::uint32_t i = n - 1; i > 0; --i) {
    std::uint64_t r = keyed_bits(seed, key, i);
    std::uint32_t j = static_cast<std::uint32_t>(r % (i + 1));
    std::swap(pi[i], pi[j]);
  }
}

}  // namespace

std::vector<std::uint32_t> permutation_at(SharedSeed seed, RandomKey key, std::uint32_t n) {
  if (n == 0) throw std::invalid_argument("permutation_at requires n >= 1");
  std::vector<std::uint32_t> pi(n);
  fill_permutation(seed, key, n, pi.data());
  return pi;
}

std::uint32_t permutation_slot(SharedSeed seed, RandomKey key, std::uint32_t slot, std::uint32_t n) {
  if (n == 0 || slot >= n) throw std::invalid_argument("permutation_slot out of range");
  constexpr std::uint32_t kStackCap = 128;
  if (n <= kStackCap) {
    std::uint32_t pi[kStackCap];
    fill_permutation(seed, key, n, pi);
    return pi[slot];
  }
  return permutation_at(seed, key, n)[slot];
}

double correlated_uniform(SharedSeed seed, RandomKey key, std::uint32_t slot, std::uint32_t n) {
  if (n == 0 || slot >= n) throw std::invalid_argument("correlated_uniform slot out of range");
  RandomKey perm_key = key;
  perm_key.purpose = Purpose::kPermutation;
  std::uint32_t interval = permutation_slot(seed, perm_key, slot, n);
  double gamma = uniform_at(seed, with_slot(key, slot));
  return (static_cast<double>(interval) + gamma) / static_cast<double>(n);
}

}  // namespace dynamiq
