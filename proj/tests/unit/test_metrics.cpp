#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "tomosim/metrics.hpp"
#include "tomosim/rng.hpp"

using namespace tomosim;

namespace {

Grid2D random_grid(int w, int h, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  Grid2D g(w, h);
  Rng rng(seed);
  for (auto& v : g.values) v = rng.uniform(lo, hi);
  return g;
}

// plain-loop psnr with reversed accumulation order
double psnr_oracle(const Grid2D& ref, const Grid2D& test) {
  double lo = ref.values[0], hi = ref.values[0];
  for (double v : ref.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double acc = 0;
  for (std::size_t i = ref.size(); i-- > 0;) {
    const double d = test.values[i] - ref.values[i];
    acc += d * d;
  }
  const double mse = acc / double(ref.size());
  const double range = hi - lo;
  return 10.0 * std::log10(range * range / mse);
}

// direct sliding-window ssim, weights and window statistics recomputed
// from scratch for every window position
double ssim_oracle(const Grid2D& ref, const Grid2D& test) {
  const int win = 11, half = 5;
  double taps[11];
  double norm = 0;
  for (int k = 0; k < win; ++k) {
    taps[k] = std::exp(-0.5 * (k - half) * (k - half) / (1.5 * 1.5));
    norm += taps[k];
  }
  for (auto& t : taps) t /= norm;

  double lo = ref.values[0], hi = ref.values[0];
  for (double v : ref.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double range = hi - lo;
  const double c1 = (0.01 * range) * (0.01 * range);
  const double c2 = (0.03 * range) * (0.03 * range);

  double total = 0;
  long long windows = 0;
  for (int wy = 0; wy + win <= ref.height; ++wy)
    for (int wx = 0; wx + win <= ref.width; ++wx) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int j = 0; j < win; ++j)
        for (int i = 0; i < win; ++i) {
          const double w = taps[j] * taps[i];
          const double a = ref.at(wx + i, wy + j), b = test.at(wx + i, wy + j);
          mx += w * a;
          my += w * b;
          sxx += w * a * a;
          syy += w * b * b;
          sxy += w * a * b;
        }
      const double vx = sxx - mx * mx, vy = syy - my * my, cov = sxy - mx * my;
      total += ((2 * mx * my + c1) * (2 * cov + c2)) /
               ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++windows;
    }
  return total / double(windows);
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("identical images have infinite psnr and unit ssim, exactly") {
  auto x = random_grid(24, 19, 3);
  CHECK(psnr(x, x) == std::numeric_limits<double>::infinity());
  CHECK(ssim(x, x) == 1.0);
  auto q = quality(x, x);
  CHECK(q.identical);
  CHECK(q.ssim == 1.0);
}

TEST_CASE("a 0.1 offset on a unit-range image scores twenty decibels") {
  const int n = 32;
  Grid2D ref(n, n), test(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      ref.at(x, y) = double((x + y) % 2);  // range exactly 1
      test.at(x, y) = ref.at(x, y) + 0.1;  // squared error 0.01 everywhere
    }
  CHECK(std::abs(psnr(ref, test) - 20.0) < 1e-9);
}

TEST_CASE("psnr matches a reversed-order arithmetic oracle") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    auto ref = random_grid(17, 23, 900 + seed, -2.0, 5.0);
    auto test = random_grid(17, 23, 1900 + seed, -2.0, 5.0);
    const double got = psnr(ref, test), want = psnr_oracle(ref, test);
    CHECK(std::abs(got - want) <= 1e-9 * std::max(1.0, std::abs(want)));
  }
}

TEST_CASE("ssim matches a direct per-window oracle") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto ref = random_grid(16, 16, 70 + seed);
    auto noisy = ref;
    Rng rng(170 + seed);
    for (auto& v : noisy.values) v += 0.05 * rng.normal();
    const double got = ssim(ref, noisy), want = ssim_oracle(ref, noisy);
    CHECK(std::abs(got - want) <= 1e-12);
    CHECK(got <= 1.0 + 1e-12);
    CHECK(got >= -1.0 - 1e-12);
  }
}

TEST_CASE("ssim dips as noise grows") {
  auto ref = random_grid(32, 32, 12);
  auto mild = ref, harsh = ref;
  Rng rng(13);
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double e = rng.normal();
    mild.values[i] += 0.02 * e;
    harsh.values[i] += 0.3 * e;
  }
  CHECK(ssim(ref, mild) > ssim(ref, harsh));
  CHECK(psnr(ref, mild) > psnr(ref, harsh));
}

TEST_CASE("metrics validate their inputs") {
  auto x = random_grid(16, 16, 1);
  auto y = random_grid(16, 15, 1);
  CHECK_THROWS_AS(psnr(x, y), data_error);
  CHECK_THROWS_AS(ssim(x, y), data_error);
  Grid2D flat(16, 16, 3.3);
  CHECK_THROWS_AS(psnr(flat, x), data_error);  // constant reference has no range
  auto tiny_a = random_grid(10, 16, 2), tiny_b = random_grid(10, 16, 3);
  CHECK_THROWS_AS(ssim(tiny_a, tiny_b), data_error);  // narrower than the window
  Grid2D empty;
  CHECK_THROWS_AS(psnr(empty, empty), data_error);
  auto bad = x;
  bad.values[5] = std::nan("");
  CHECK_THROWS_AS(psnr(x, bad), data_error);
}

TEST_CASE("quality reports the reference dynamic range") {
  auto ref = random_grid(20, 20, 31, 1.0, 3.5);
  auto test = random_grid(20, 20, 32, 1.0, 3.5);
  auto q = quality(ref, test);
  double lo = ref.values[0], hi = ref.values[0];
  for (double v : ref.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(q.dynamic_range == doctest::Approx(hi - lo).epsilon(1e-15));
  CHECK(q.window == 11);
  CHECK(!q.identical);
  CHECK(q.psnr == doctest::Approx(psnr(ref, test)));
  CHECK(q.ssim == doctest::Approx(ssim(ref, test)));
}

}  // TEST_SUITE
