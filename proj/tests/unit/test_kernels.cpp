#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "doctest.h"
#include "itpatch/kernels.hpp"

using namespace itpatch::kernels;

namespace {

std::vector<float> random_floats(std::size_t n, std::uint32_t seed, float lo = 0, float hi = 1) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(lo, hi);
  std::vector<float> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

bool bit_equal(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

TEST_CASE("scalar table is always available and listed first") {
  const auto tables = available();
  REQUIRE(!tables.empty());
  CHECK(std::string(tables.front()->name) == "scalar");
  MESSAGE("active kernel table: " << active().name);
}

TEST_CASE("blend_weighted: every variant matches scalar bit for bit") {
  for (std::size_t n : {0u, 1u, 7u, 8u, 9u, 31u, 3072u, 3077u}) {
    const auto base = random_floats(n, 1);
    auto weight = random_floats(n, 2);
    const auto target = random_floats(n, 3);
    // Exercise the exact 0 and 1 weights that carry the identity contracts.
    for (std::size_t i = 1; i < n; i += 5) weight[i] = 1.0f;
    for (std::size_t i = 0; i < n; i += 3) weight[i] = 0.0f;
    auto reference = base;
    scalar().blend_weighted(reference.data(), weight.data(), target.data(), n);
    for (std::size_t i = 0; i < n; i += 3) CHECK(reference[i] == base[i]);
    for (std::size_t i = 1; i < n; i += 5) {
      if (i % 3 != 0) CHECK(reference[i] == target[i]);
    }
    for (const auto* table : available()) {
      auto out = base;
      table->blend_weighted(out.data(), weight.data(), target.data(), n);
      CHECK_MESSAGE(bit_equal(out, reference), table->name << " n=" << n);
    }
  }
}

TEST_CASE("squared_distance: variants agree to rounding") {
  for (std::size_t n : {0u, 3u, 8u, 17u, 3072u, 10001u}) {
    const auto a = random_floats(n, 10, -1, 1);
    const auto b = random_floats(n, 11, -1, 1);
    const double reference = scalar().squared_distance(a.data(), b.data(), n);
    double brute = 0;
    for (std::size_t i = 0; i < n; ++i) brute += double(a[i] - b[i]) * double(a[i] - b[i]);
    CHECK(reference == doctest::Approx(brute).epsilon(1e-12));
    for (const auto* table : available()) {
      const double got = table->squared_distance(a.data(), b.data(), n);
      CHECK_MESSAGE(got == doctest::Approx(reference).epsilon(1e-12), table->name);
    }
  }
}

TEST_CASE("convolutions: variants match scalar bit for bit") {
  const std::vector<float> taps{0.1f, 0.2f, 0.4f, 0.2f, 0.1f};
  for (auto [w, h] : {std::pair{1, 1}, {3, 2}, {5, 9}, {16, 16}, {37, 11}, {64, 3}}) {
    const auto src = random_floats(static_cast<std::size_t>(w * h), 42);
    std::vector<float> rows_ref(src.size()), cols_ref(src.size());
    scalar().convolve_rows(src.data(), rows_ref.data(), w, h, taps.data(), 5);
    scalar().convolve_cols(src.data(), cols_ref.data(), w, h, taps.data(), 5);
    for (const auto* table : available()) {
      std::vector<float> rows(src.size()), cols(src.size());
      table->convolve_rows(src.data(), rows.data(), w, h, taps.data(), 5);
      table->convolve_cols(src.data(), cols.data(), w, h, taps.data(), 5);
      CHECK_MESSAGE(bit_equal(rows, rows_ref), table->name << " " << w << "x" << h);
      CHECK_MESSAGE(bit_equal(cols, cols_ref), table->name << " " << w << "x" << h);
    }
  }
}

TEST_CASE("convolve_rows replicates edges") {
  const std::vector<float> src{1, 2, 3};
  const std::vector<float> taps{1, 1, 1};
  std::vector<float> out(3);
  scalar().convolve_rows(src.data(), out.data(), 3, 1, taps.data(), 3);
  CHECK(out[0] == 4.0f);  // 1+1+2
  CHECK(out[1] == 6.0f);
  CHECK(out[2] == 8.0f);  // 2+3+3
}

TEST_CASE("separable convolution of a constant plane is the constant times the tap sum") {
  std::vector<float> src(12 * 7, 0.5f), dst(12 * 7);
  const std::vector<float> taps{0.25f, 0.5f, 0.25f};
  convolve_separable(src, dst, 12, 7, taps);
  for (float v : dst) CHECK(v == doctest::Approx(0.5f));
}
