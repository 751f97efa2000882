#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "dynamiq/synth.hpp"
#include "testutil.hpp"

using namespace dynamiq;

TEST_CASE("generation is deterministic and kinds behave") {
  GeneratorSpec spec{GeneratorKind::kLocality, 4096, 9, 2.0, ""};
  auto a = generate(spec, 256);
  auto b = generate(spec, 256);
  CHECK(a == b);

  // sigma_log = 0 degenerates to the iid stream.
  GeneratorSpec flat{GeneratorKind::kLocality, 4096, 9, 0.0, ""};
  GeneratorSpec iid{GeneratorKind::kIidGaussian, 4096, 9, 0.0, ""};
  CHECK(generate(flat, 256) == generate(iid, 256));

  // Workers share the locality layout but draw distinct entries.
  auto w0 = generate_worker(spec, 256, 0);
  auto w1 = generate_worker(spec, 256, 1);
  CHECK(w0 != w1);
  CHECK(w0 == a);

  CHECK_THROWS(generate(GeneratorSpec{GeneratorKind::kIidGaussian, 0, 1, 0.0, ""}, 256));
  CHECK_THROWS(generate(GeneratorSpec{GeneratorKind::kLocality, 64, 1, -1.0, ""}, 256));
}

TEST_CASE("iid output is roughly standard normal") {
  GeneratorSpec spec{GeneratorKind::kIidGaussian, 1 << 16, 3, 0.0, ""};
  auto v = generate(spec, 256);
  double sum = 0.0, sq = 0.0;
  for (float x : v) {
    sum += x;
    sq += static_cast<double>(x) * x;
  }
  const double mean = sum / v.size();
  const double var = sq / v.size() - mean * mean;
  CHECK(std::fabs(mean) < 0.02);
  CHECK(var == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("locality gradients have the heavy left norm tail") {
  GeneratorSpec spec{GeneratorKind::kLocality, 1 << 20, 11, 0.0, ""};
  spec.sigma_log = GeneratorSpec{}.sigma_log;  // the shipped default
  auto v = generate(spec, 256);
  std::vector<double> norms;
  for (std::size_t start = 0; start < v.size(); start += 256) {
    double sq = 0.0;
    for (std::size_t i = start; i < start + 256; ++i)
      sq += static_cast<double>(v[i]) * v[i];
    norms.push_back(std::sqrt(sq));
  }
  std::sort(norms.begin(), norms.end());
  const double median = norms[norms.size() / 2];
  const double below = static_cast<double>(std::count_if(
                           norms.begin(), norms.end(),
                           [&](double x) { return x < median / 100.0; })) /
                       norms.size();
  CHECK(below >= 0.10);
}

TEST_CASE("raw gradient file round trip and error paths") {
  const std::string path = "test_gradient.dynq";
  auto values = testutil::normal_vector(77, 1000, 2.0);

  save_raw(path, values);
  auto loaded = load_raw(path);
  CHECK(loaded == values);

  SUBCASE("empty gradient rejected on write") {
    CHECK_THROWS(save_raw(path + ".empty", {}));
  }
  SUBCASE("bad magic") {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << "NOTMAGIC" << std::string(8, '\0');
    out.close();
    CHECK_THROWS_WITH_AS(load_raw(path), doctest::Contains("bad magic"), std::runtime_error);
  }
  SUBCASE("truncated body names the byte counts") {
    save_raw(path, values);
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 12));
    out.close();
    try {
      load_raw(path);
      FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
      const std::string what = e.what();
      CHECK(what.find("4000") != std::string::npos);  // expected body bytes
      CHECK(what.find("3988") != std::string::npos);  // actual
    }
  }
  SUBCASE("zero-length gradient rejected on read") {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << "DYNQGRAD" << std::string(4, '\0');
    out.close();
    CHECK_THROWS_WITH_AS(load_raw(path), doctest::Contains("d = 0"), std::runtime_error);
  }
  std::remove(path.c_str());
}
