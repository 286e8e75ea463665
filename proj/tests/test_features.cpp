#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fbtex/error.hpp"
#include "fbtex/features.hpp"
#include "oracles.hpp"

using namespace fbtex;

namespace {

void check_against_oracle(const std::vector<double>& v, TextureMode mode) {
  const auto got = sample_stats(v, mode);
  const auto want = oracle::moments(v, mode == TextureMode::Magnitude);
  CHECK(oracle::rel_error(got.mean, want.mean) <= 1e-9);
  CHECK(oracle::rel_error(got.variance, want.variance) <= 1e-9);
  CHECK(oracle::rel_error(got.std, want.std) <= 1e-9);
  CHECK(oracle::rel_error(got.skewness, want.skewness) <= 1e-9);
  CHECK(oracle::rel_error(got.kurtosis, want.kurtosis) <= 1e-9);
  CHECK(oracle::rel_error(got.entropy, want.entropy) <= 1e-9);
}

GrayImage random_block(std::mt19937_64& g) { return GrayImage(64, 64, oracle::random_vector(g, 64 * 64)); }

}  // namespace

TEST_CASE("constant response is degenerate") {
  const ResponseImage r{4, 4, std::vector<double>(16, 0.7)};
  const auto s = response_stats(r, TextureMode::Raw);
  CHECK(s.mean == doctest::Approx(0.7));
  CHECK(s.variance == 0.0);
  CHECK(s.std == 0.0);
  CHECK(s.skewness == 0.0);
  CHECK(s.kurtosis == 0.0);
  CHECK(s.entropy == 0.0);
}

TEST_CASE("moments of 1, 2, 3, 4") {
  const auto s = sample_stats(std::vector<double>{1, 2, 3, 4}, TextureMode::Raw);
  CHECK(s.mean == 2.5);
  CHECK(s.variance == 1.25);
  CHECK(s.skewness == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  CHECK(s.kurtosis == doctest::Approx(1.64).epsilon(1e-12));
  CHECK(s.std * s.std == doctest::Approx(s.variance).epsilon(1e-12));
}

TEST_CASE("one value per histogram bin gives eight bits") {
  std::vector<double> v;
  for (int i = 0; i < 256; ++i) v.push_back((i + 0.5) / 256.0);
  CHECK(sample_stats(v, TextureMode::Raw).entropy == doctest::Approx(8.0).epsilon(1e-12));
}

TEST_CASE("random samples match the formula oracle") {
  std::mt19937_64 g(41);
  for (int t = 0; t < 100; ++t) {
    const auto n = 2 + g() % 500;
    auto v = oracle::random_vector(g, n, -3.0, 5.0);
    check_against_oracle(v, TextureMode::Raw);
    check_against_oracle(v, TextureMode::Magnitude);
  }
}

TEST_CASE("statistic invariants") {
  std::mt19937_64 g(42);
  for (int t = 0; t < 30; ++t) {
    auto v = oracle::random_vector(g, 100 + g() % 300, -2.0, 2.0);
    const auto s = sample_stats(v, TextureMode::Raw);
    CHECK(s.variance >= 0.0);
    CHECK(s.std * s.std == doctest::Approx(s.variance).epsilon(1e-12));
    CHECK(s.kurtosis >= 1.0);
    CHECK(s.entropy >= 0.0);
    CHECK(s.entropy <= 8.0);

    // symmetric sample: pair every value with 2m - v
    std::vector<double> sym = v;
    const double m = 0.3;
    for (double x : v) sym.push_back(2 * m - x);
    CHECK(std::fabs(sample_stats(sym, TextureMode::Raw).skewness) <= 1e-9);

    // affine rescaling leaves the histogram entropy unchanged
    std::vector<double> scaled = v;
    for (double& x : scaled) x = 4.0 * x + 1.5;
    CHECK(sample_stats(scaled, TextureMode::Raw).entropy == doctest::Approx(s.entropy).epsilon(1e-12));

    // permutation invariance
    std::vector<double> perm = v;
    std::shuffle(perm.begin(), perm.end(), g);
    const auto p = sample_stats(perm, TextureMode::Raw).as_array();
    const auto a = s.as_array();
    for (std::size_t i = 0; i < 6; ++i) CHECK(p[i] == doctest::Approx(a[i]).epsilon(1e-12));
  }
}

TEST_CASE("block statistics average the per-filter statistics") {
  std::mt19937_64 g(43);
  const auto block = random_block(g);
  const TextureOptions direct{TextureMode::Magnitude, Padding::Mirror, ConvolutionBackend::Direct};

  const auto one = make_filter_bank({{8.0}, {45.0}, 0.0, 0.5, 1.0});
  CHECK(block_stat_features(block, one, direct) == response_stats(convolve(block, one[0].kernel, direct)));

  const auto twice = make_filter_bank({{8.0}, {45.0, 225.0}, 0.0, 0.5, 1.0});
  const auto a = block_stat_features(block, one, direct).as_array();
  const auto b = block_stat_features(block, twice, direct).as_array();
  for (std::size_t i = 0; i < 6; ++i) CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-15));

  const auto bank = make_filter_bank(default_bank_config());
  std::array<double, 6> want{};
  for (const auto& e : bank) {
    oracle::Grid im{64, 64, {block.pixels().begin(), block.pixels().end()}};
    const auto r = oracle::convolve(im, e.kernel.weights, e.kernel.radius, true);
    const auto m = oracle::moments(r.v, true);
    const double vals[] = {m.mean, m.variance, m.std, m.skewness, m.kurtosis, m.entropy};
    for (std::size_t i = 0; i < 6; ++i) want[i] += vals[i] / 40.0;
  }
  for (auto backend : {ConvolutionBackend::Direct, ConvolutionBackend::Fft}) {
    const auto got = block_stat_features(block, bank, {TextureMode::Magnitude, Padding::Mirror, backend}).as_array();
    for (std::size_t i = 0; i < 6; ++i) CHECK(oracle::rel_error(got[i], want[i]) <= 1e-9);
  }
  CHECK_THROWS_AS(block_stat_features(block, FilterBank{}), ParameterError);
  CHECK_THROWS_AS(mean_stats({}), ParameterError);
}
