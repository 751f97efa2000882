#include <doctest.h>

#include <cmath>
#include <numeric>

#include "dynamiq/stats.hpp"
#include "dynamiq/synth.hpp"
#include "testutil.hpp"

using namespace dynamiq;

TEST_CASE("gradient padding") {
  Gradient g = Gradient::from_values({1, 2, 3, 4, 5}, 2, 4);
  CHECK(g.logical_size == 5);
  CHECK(g.padded_size() == 8);
  CHECK(g.super_group_count() == 2);
  for (std::size_t i = 5; i < 8; ++i) CHECK(g.data[i] == 0.0f);
  CHECK_THROWS(Gradient::from_values({1.0f}, 3, 4));
}

TEST_CASE("compute_stats basics") {
  Gradient zeros = Gradient::from_values(std::vector<float>(8, 0.0f), 4, 4);
  for (const auto& st : compute_stats(zeros)) {
    CHECK(st.mean == 0.0f);
    CHECK(st.sq_norm == 0.0f);
  }

  Gradient ones = Gradient::from_values({1, 1, 1, 1}, 4, 4);
  auto st = compute_stats(ones);
  REQUIRE(st.size() == 1);
  CHECK(st[0].mean == doctest::Approx(1.0));
  CHECK(st[0].sq_norm == doctest::Approx(4.0));
}

TEST_CASE("compute_stats matches a double-precision loop") {
  auto values = testutil::normal_vector(3, 2048, 2.5);
  Gradient g = Gradient::from_values(values, 16, 256);
  auto stats = compute_stats(g);
  for (std::size_t j = 0; j < stats.size(); ++j) {
    double sum = 0.0, sq = 0.0;
    for (std::size_t k = 0; k < 256; ++k) {
      const double x = values[j * 256 + k];
      sum += x;
      sq += x * x;
    }
    CHECK(stats[j].mean == doctest::Approx(sum / 256).epsilon(1e-6));
    CHECK(stats[j].sq_norm == doctest::Approx(sq).epsilon(1e-6));
  }
}

TEST_CASE("reduce_stats") {
  std::vector<SuperGroupStats> w0{{1.0f, 4.0f}};
  std::vector<SuperGroupStats> w1{{3.0f, 5.0f}};
  auto global = reduce_stats({w0, w1});
  REQUIRE(global.size() == 1);
  CHECK(global[0].mean == doctest::Approx(2.0));
  CHECK(global[0].sq_norm == doctest::Approx(9.0));

  auto identity = reduce_stats({w0});
  CHECK(identity[0].mean == w0[0].mean);
  CHECK(identity[0].sq_norm == w0[0].sq_norm);

  CHECK_THROWS(reduce_stats({w0, {}}));
  CHECK_THROWS(reduce_stats({}));
}

TEST_CASE("reduce_stats is order-independent within tolerance") {
  std::vector<std::vector<SuperGroupStats>> workers;
  for (int w = 0; w < 4; ++w) {
    Gradient g = Gradient::from_values(testutil::normal_vector(100 + w, 1024), 16, 256);
    workers.push_back(compute_stats(g));
  }
  auto a = reduce_stats(workers);
  std::reverse(workers.begin(), workers.end());
  auto b = reduce_stats(workers);
  for (std::size_t j = 0; j < a.size(); ++j) {
    CHECK(a[j].mean == doctest::Approx(b[j].mean).epsilon(1e-6));
    CHECK(a[j].sq_norm == doctest::Approx(b[j].sq_norm).epsilon(1e-6));
  }
}

TEST_CASE("normalize and denormalize") {
  auto values = testutil::normal_vector(17, 1000, 1.5);
  Gradient g = Gradient::from_values(values, 16, 256);

  SUBCASE("zero means leave the data unchanged") {
    Gradient copy = g;
    std::vector<SuperGroupStats> zero_stats(g.super_group_count());
    normalize(copy, zero_stats);
    CHECK(copy.data == g.data);
    auto out = denormalize(copy, zero_stats, 3);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == g.data[i]);
  }

  SUBCASE("single-worker round trip") {
    Gradient copy = g;
    auto stats = compute_stats(g);
    normalize(copy, stats);
    auto out = denormalize(copy, stats, 1);
    REQUIRE(out.size() == values.size());
    for (std::size_t i = 0; i < out.size(); ++i)
      CHECK(out[i] == doctest::Approx(values[i]).epsilon(1e-6));
  }

  SUBCASE("constant super-group normalizes to zero") {
    Gradient c = Gradient::from_values(std::vector<float>(256, 3.25f), 16, 256);
    auto stats = compute_stats(c);
    normalize(c, stats);
    for (float x : c.data) CHECK(x == 0.0f);
  }

  SUBCASE("stats length mismatch") {
    Gradient copy = g;
    std::vector<SuperGroupStats> wrong(1);
    CHECK_THROWS(normalize(copy, wrong));
    CHECK_THROWS(denormalize(copy, wrong, 1));
  }
}

TEST_CASE("normalized super-groups have zero mean across workers") {
  const int n = 4;
  std::vector<Gradient> grads;
  std::vector<std::vector<SuperGroupStats>> local;
  for (int w = 0; w < n; ++w) {
    grads.push_back(Gradient::from_values(testutil::normal_vector(200 + w, 4096, 3.0), 16, 256));
    local.push_back(compute_stats(grads.back()));
  }
  auto global = reduce_stats(local);
  for (auto& g : grads) normalize(g, global);
  for (std::size_t j = 0; j < global.size(); ++j) {
    double sum = 0.0;
    for (const auto& g : grads)
      for (float x : g.super_group(j)) sum += x;
    CHECK(std::fabs(sum / (n * 256)) < 1e-5);
  }
}

TEST_CASE("lossless pipeline through normalize/denormalize reproduces the sum") {
  const int n = 4;
  std::vector<std::vector<float>> values;
  std::vector<Gradient> grads;
  std::vector<std::vector<SuperGroupStats>> local;
  for (int w = 0; w < n; ++w) {
    values.push_back(testutil::normal_vector(300 + w, 3000, 2.0));
    grads.push_back(Gradient::from_values(values.back(), 16, 256));
    local.push_back(compute_stats(grads.back()));
  }
  auto global = reduce_stats(local);
  for (auto& g : grads) normalize(g, global);

  Gradient agg = grads[0];
  for (int w = 1; w < n; ++w)
    for (std::size_t i = 0; i < agg.data.size(); ++i) agg.data[i] += grads[w].data[i];
  auto synced = denormalize(agg, global, n);

  for (std::size_t i = 0; i < synced.size(); ++i) {
    double exact = 0.0;
    for (int w = 0; w < n; ++w) exact += values[w][i];
    CHECK(synced[i] == doctest::Approx(exact).epsilon(1e-5));
  }
}

TEST_CASE("parallel-axis identity for normalized squared norms") {
  Gradient g = Gradient::from_values(testutil::normal_vector(55, 2048, 1.2), 16, 256);
  auto stats = compute_stats(g);
  // Normalize against perturbed means so mu differs from the local mean.
  std::vector<SuperGroupStats> global = stats;
  for (auto& st : global) st.mean *= 1.5f;

  Gradient norm = g;
  normalize(norm, global);
  auto after = compute_stats(norm);
  for (std::size_t j = 0; j < stats.size(); ++j) {
    const double mu = global[j].mean;
    const double local_mean = stats[j].mean;
    const double expected = stats[j].sq_norm - 2.0 * mu * 256 * local_mean + 256 * mu * mu;
    CHECK(after[j].sq_norm == doctest::Approx(expected).epsilon(1e-4));
  }
}

TEST_CASE("locality_cdf") {
  SUBCASE("all-equal entries are shuffle-invariant") {
    Gradient g = Gradient::from_values(std::vector<float>(1024, 0.5f), 16, 256);
    auto original = locality_cdf(g, Granularity::kSuperGroup, false, SharedSeed{1, 0});
    auto shuffled = locality_cdf(g, Granularity::kSuperGroup, true, SharedSeed{1, 0});
    CHECK(original == shuffled);
  }

  SUBCASE("locality gradients separate, iid gradients do not") {
    const std::size_t d = 1 << 18;
    GeneratorSpec loc{GeneratorKind::kLocality, d, 5, 4.0, ""};
    Gradient g = Gradient::from_values(generate(loc, 256), 16, 256);

    auto orig = locality_cdf(g, Granularity::kSuperGroup, false, SharedSeed{5, 0});
    auto shuf = locality_cdf(g, Granularity::kSuperGroup, true, SharedSeed{5, 0});
    const double median = orig[orig.size() / 2];
    auto below = [&](const std::vector<double>& v) {
      return static_cast<double>(std::count_if(v.begin(), v.end(),
                                               [&](double x) { return x < median / 100.0; })) /
             v.size();
    };
    CHECK(below(orig) >= 0.10);
    CHECK(below(shuf) < 0.01);

    GeneratorSpec iid{GeneratorKind::kIidGaussian, d, 6, 0.0, ""};
    Gradient gi = Gradient::from_values(generate(iid, 256), 16, 256);
    auto orig_i = locality_cdf(gi, Granularity::kGroup, false, SharedSeed{6, 0});
    auto shuf_i = locality_cdf(gi, Granularity::kGroup, true, SharedSeed{6, 0});
    CHECK(testutil::ks_two_sample(orig_i, shuf_i) < 0.02);
  }
}
