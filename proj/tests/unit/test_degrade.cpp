#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "tomosim/degrade.hpp"
#include "tomosim/rng.hpp"

using namespace tomosim;

namespace {

Sinogram flat_sinogram(int n_angles, int n, double fill) {
  auto geo = default_geometry(n_angles, n);
  Sinogram s(geo);
  std::fill(s.values.begin(), s.values.end(), fill);
  return s;
}

Sinogram random_sinogram(int n_angles, int n, std::uint64_t seed) {
  auto geo = default_geometry(n_angles, n);
  Sinogram s(geo);
  Rng rng(seed);
  for (auto& v : s.values) v = rng.uniform(0.5, 4.0);
  return s;
}

}  // namespace

TEST_SUITE("degrade") {

TEST_CASE("zero noise fraction is the bitwise identity") {
  auto s = random_sinogram(10, 32, 8);
  auto out = add_gaussian_noise(s, 0.0, 77);
  CHECK(out.values == s.values);
  CHECK_THROWS_AS(add_gaussian_noise(s, -0.1, 1), data_error);
}

TEST_CASE("noise scales with the clean data mean and replays by seed") {
  auto s = flat_sinogram(60, 128, 2.0);  // mean exactly 2
  const double fraction = 0.05;
  auto a = add_gaussian_noise(s, fraction, 31);
  auto b = add_gaussian_noise(s, fraction, 31);
  auto c = add_gaussian_noise(s, fraction, 32);
  CHECK(a.values == b.values);
  CHECK(a.values != c.values);

  double sum = 0, sumsq = 0;
  const auto n = a.values.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a.values[i] - s.values[i];
    sum += d;
    sumsq += d * d;
  }
  const double mean = sum / double(n);
  const double stdev = std::sqrt(sumsq / double(n) - mean * mean);
  CHECK(std::abs(stdev - fraction * 2.0) < 0.03 * fraction * 2.0);
  CHECK(std::abs(mean) < 5.0 * fraction * 2.0 / std::sqrt(double(n)));
}

TEST_CASE("kernel tables validate ordering and positivity") {
  ScatterKernelTable t = default_scatter_table();
  t.validate();
  REQUIRE(t.rows.size() >= 2);
  CHECK(std::is_sorted(t.rows.begin(), t.rows.end(),
                       [](auto& a, auto& b) { return a.thickness < b.thickness; }));
  auto bad = t;
  bad.rows[1].thickness = bad.rows[0].thickness;
  CHECK_THROWS_AS(bad.validate(), data_error);
  bad = t;
  bad.rows[2].sigma_narrow = 0.0;
  CHECK_THROWS_AS(bad.validate(), data_error);
  bad = t;
  bad.rows[2].narrow_amp = -1e-3;
  CHECK_THROWS_AS(bad.validate(), data_error);
  bad.rows.clear();
  CHECK_THROWS_AS(bad.validate(), data_error);
}

TEST_CASE("kernel parameter lookup clamps and interpolates linearly") {
  ScatterKernelTable t;
  t.rows = {{1.0, 0.10, 0.03, 2.0, 8.0}, {3.0, 0.30, 0.09, 4.0, 16.0}};
  // clamped at both table ends; negative thickness is out of contract
  CHECK(kernel_params(t, 0.2).narrow_amp == 0.10);
  CHECK(kernel_params(t, 99.0).sigma_wide == 16.0);
  CHECK_THROWS_AS(kernel_params(t, -5.0), data_error);
  // exact at breakpoints
  CHECK(kernel_params(t, 3.0).wide_amp == 0.09);
  // hand-computed midpoint
  auto mid = kernel_params(t, 2.0);
  CHECK(mid.narrow_amp == doctest::Approx(0.20).epsilon(1e-15));
  CHECK(mid.wide_amp == doctest::Approx(0.06).epsilon(1e-15));
  CHECK(mid.sigma_narrow == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(mid.sigma_wide == doctest::Approx(12.0).epsilon(1e-15));
  CHECK(mid.thickness == 2.0);
}

TEST_CASE("kernel tables round trip through csv and reject bad headers") {
  auto dir = std::filesystem::temp_directory_path() / "tomosim_degrade_tests";
  std::filesystem::create_directories(dir);
  auto path = (dir / "kernels.csv").string();
  auto t = default_scatter_table();
  write_scatter_table(t, path);
  auto back = read_scatter_table(path);
  REQUIRE(back.rows.size() == t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    CHECK(back.rows[i].thickness == doctest::Approx(t.rows[i].thickness).epsilon(1e-15));
    CHECK(back.rows[i].narrow_amp == doctest::Approx(t.rows[i].narrow_amp).epsilon(1e-15));
    CHECK(back.rows[i].sigma_wide == doctest::Approx(t.rows[i].sigma_wide).epsilon(1e-15));
  }
  std::ofstream(path) << "thickness,A,B,sigma\n1,0.1,0.03,2\n";
  CHECK_THROWS_AS(read_scatter_table(path), data_error);
  std::ofstream(path) << "thickness,A,B,sigma1,sigma2\n3,0.1,0.03,2,8\n1,0.1,0.03,2,8\n";
  CHECK_THROWS_AS(read_scatter_table(path), data_error);
}

TEST_CASE("a pencil beam spreads into the documented two-gaussian profile") {
  ScatterKernelTable t;
  t.rows = {{0.0, 0.0, 0.0, 2.0, 8.0}, {10.0, 0.5, 0.15, 3.0, 12.0}};
  const int bins = 41;
  std::vector<double> row(bins, 0.0);
  const int src = 20;
  row[src] = 2.0;  // only source bin, thickness proxy 2.0
  const double alpha = 1.7, i0 = 1200.0, spacing = 0.8;
  auto field = scatter_field(row, t, alpha, i0, spacing);
  REQUIRE(field.size() == row.size());
  auto p = kernel_params(t, 2.0);
  for (int u = 0; u < bins; ++u) {
    const double d = (u - src) * spacing;
    const double want =
        alpha * i0 *
        (p.narrow_amp * std::exp(-d * d / (2 * p.sigma_narrow * p.sigma_narrow)) +
         p.wide_amp * std::exp(-d * d / (2 * p.sigma_wide * p.sigma_wide)));
    CHECK(std::abs(field[u] - want) <= 1e-10 * std::max(1.0, std::abs(want)));
  }
}

TEST_CASE("scatter strength is exactly linear in alpha") {
  auto s = random_sinogram(6, 48, 21);
  auto t = default_scatter_table();
  const auto row = std::span<const double>(s.values).subspan(0, s.n_bins());
  auto s1 = scatter_field(row, t, 1.0, 1.0, s.geometry.detector_spacing);
  auto s5 = scatter_field(row, t, 5.0, 1.0, s.geometry.detector_spacing);
  REQUIRE(s1.size() == s5.size());
  for (std::size_t i = 0; i < s1.size(); ++i) CHECK(s5[i] == 5.0 * s1[i]);
}

TEST_CASE("negative log data contributes no scatter") {
  ScatterKernelTable t;
  t.rows = {{0.0, 0.0, 0.0, 2.0, 8.0}, {10.0, 0.5, 0.15, 3.0, 12.0}};
  std::vector<double> row(11, -3.0);  // thickness proxy clamps to zero, amp 0
  auto field = scatter_field(row, t, 2.0, 100.0, 1.0);
  for (double v : field) CHECK(v == 0.0);
}

TEST_CASE("alpha zero leaves the sinogram bitwise untouched") {
  auto s = random_sinogram(12, 64, 4);
  auto out = apply_scatter(s, default_scatter_table(), 0.0);
  CHECK(out.values == s.values);
}

TEST_CASE("scatter can only lower the measured log data") {
  auto s = random_sinogram(12, 64, 4);
  auto out = apply_scatter(s, default_scatter_table(), 2.0);
  REQUIRE(out.values.size() == s.values.size());
  bool changed = false;
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    CHECK(out.values[i] <= s.values[i]);
    changed = changed || out.values[i] != s.values[i];
  }
  CHECK(changed);
}

TEST_CASE("the tall-stack slice selection matches the recorded ranges") {
  auto idx = dataset_c_slices(668);
  REQUIRE(idx.size() == 80);
  CHECK(std::is_sorted(idx.begin(), idx.end()));
  CHECK(idx.front() == 195);
  CHECK(idx[19] == 214);
  CHECK(idx[20] == 365);
  CHECK(idx[59] == 404);
  CHECK(idx[60] == 525);
  CHECK(idx.back() == 544);
  CHECK(dataset_c_slices(545).size() == 80);
  auto small = dataset_c_slices(7);
  REQUIRE(small.size() == 7);
  CHECK(small.front() == 0);
  CHECK(small.back() == 6);
  CHECK_THROWS_AS(dataset_c_slices(0), data_error);
}

}  // TEST_SUITE
