#include <doctest.h>

#include <map>
#include <vector>

#include "dynamiq/random.hpp"
#include "testutil.hpp"

using namespace dynamiq;

TEST_CASE("uniform_at is a pure function of its inputs") {
  SharedSeed seed{123, 7};
  RandomKey key{Purpose::kEntryQuant, 3, 5, 9};
  CHECK(uniform_at(seed, key) == uniform_at(seed, key));
  CHECK(uniform_at(seed, key) != uniform_at(SharedSeed{124, 7}, key));
  CHECK(uniform_at(seed, key) != uniform_at(SharedSeed{123, 8}, key));
}

TEST_CASE("distinct purpose tags give distinct draws") {
  SharedSeed seed{5, 0};
  RandomKey a{Purpose::kEntryQuant, 1, 2, 3};
  RandomKey b{Purpose::kScaleQuant, 1, 2, 3};
  RandomKey c{Purpose::kPermutation, 1, 2, 3};
  RandomKey d{Purpose::kShuffle, 1, 2, 3};
  CHECK(uniform_at(seed, a) != uniform_at(seed, b));
  CHECK(uniform_at(seed, a) != uniform_at(seed, c));
  CHECK(uniform_at(seed, b) != uniform_at(seed, d));
}

TEST_CASE("uniform_at passes a KS test at 1e6 draws") {
  SharedSeed seed{99, 1};
  std::vector<double> draws;
  draws.reserve(1000000);
  for (std::uint64_t i = 0; i < 1000000; ++i)
    draws.push_back(uniform_at(seed, RandomKey{Purpose::kEntryQuant, 0, 0, i}));
  CHECK(testutil::ks_uniform(std::move(draws)) < 0.01);
}

TEST_CASE("permutation_at basics") {
  SharedSeed seed{11, 0};
  RandomKey key{Purpose::kPermutation, 0, 0, 0};
  CHECK(permutation_at(seed, key, 1) == std::vector<std::uint32_t>{0});
  CHECK_THROWS(permutation_at(seed, key, 0));

  auto pi = permutation_at(seed, key, 17);
  std::vector<bool> hit(17, false);
  for (std::uint32_t v : pi) {
    REQUIRE(v < 17);
    CHECK(!hit[v]);
    hit[v] = true;
  }
  CHECK(pi == permutation_at(seed, key, 17));  // two workers agree byte for byte

  for (std::uint32_t slot = 0; slot < 17; ++slot)
    CHECK(permutation_slot(seed, key, slot, 17) == pi[slot]);
}

TEST_CASE("n=2 permutations are balanced over 1e4 keys") {
  SharedSeed seed{31, 0};
  int identity = 0;
  for (std::uint64_t k = 0; k < 10000; ++k) {
    auto pi = permutation_at(seed, RandomKey{Purpose::kPermutation, 0, 0, k}, 2);
    if (pi[0] == 0) ++identity;
  }
  CHECK(identity > 5000 - 300);
  CHECK(identity < 5000 + 300);
}

TEST_CASE("permutations are uniform over n=4 arrangements") {
  SharedSeed seed{77, 0};
  std::map<std::vector<std::uint32_t>, int> counts;
  const int trials = 48000;
  for (std::uint64_t k = 0; k < trials; ++k)
    counts[permutation_at(seed, RandomKey{Purpose::kPermutation, 0, 1, k}, 4)]++;
  CHECK(counts.size() == 24);
  for (const auto& [pi, c] : counts) {
    CHECK(c > 2000 - 300);  // expectation 2000, sigma ~44
    CHECK(c < 2000 + 300);
  }
}

TEST_CASE("correlated_uniform partitions the unit interval") {
  SharedSeed seed{3, 2};
  CHECK_THROWS(correlated_uniform(seed, RandomKey{}, 1, 1));

  // n=1 is a plain uniform draw.
  RandomKey key{Purpose::kEntryQuant, 0, 0, 42};
  double u = correlated_uniform(seed, key, 0, 1);
  CHECK(u >= 0.0);
  CHECK(u < 1.0);

  for (std::uint32_t n : {2u, 3u, 4u, 8u, 16u, 33u, 64u}) {
    for (std::uint64_t trial = 0; trial < (n <= 4 ? 1000u : 100u); ++trial) {
      RandomKey k{Purpose::kEntryQuant, 9, trial, 7};
      std::vector<bool> interval_hit(n, false);
      for (std::uint32_t slot = 0; slot < n; ++slot) {
        const double v = correlated_uniform(seed, k, slot, n);
        const std::uint32_t cell = static_cast<std::uint32_t>(v * n);
        REQUIRE(cell < n);
        CHECK(!interval_hit[cell]);
        interval_hit[cell] = true;
      }
    }
  }
}

TEST_CASE("correlated_uniform slots are marginally uniform") {
  SharedSeed seed{8, 0};
  for (std::uint32_t slot : {0u, 3u}) {
    std::vector<double> draws;
    draws.reserve(100000);
    for (std::uint64_t k = 0; k < 100000; ++k)
      draws.push_back(correlated_uniform(seed, RandomKey{Purpose::kEntryQuant, 1, k, 0}, slot, 4));
    CHECK(testutil::ks_uniform(std::move(draws)) < 0.01);
  }
}

TEST_CASE("exactly one slot falls under a p=1/2 threshold when n=2") {
  SharedSeed seed{21, 0};
  for (std::uint64_t k = 0; k < 2000; ++k) {
    RandomKey key{Purpose::kEntryQuant, 0, k, 1};
    const bool low0 = correlated_uniform(seed, key, 0, 2) < 0.5;
    const bool low1 = correlated_uniform(seed, key, 1, 2) < 0.5;
    CHECK(low0 != low1);
  }
}
