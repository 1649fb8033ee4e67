#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "tomosim/degrade.hpp"
#include "tomosim/phantom.hpp"
#include "tomosim/projector.hpp"
#include "tomosim/recon.hpp"
#include "tomosim/rng.hpp"
#include "tomosim/split.hpp"

using namespace tomosim;

namespace {

Grid2D bench_phantom(int n) {
  auto spec = default_phantom_spec();
  spec.grid_size = n;
  spec.seed = 7;
  return generate_phantom(spec).image;
}

Sinogram bench_sinogram(int n, int angles) {
  return radon_forward(bench_phantom(n), default_geometry(angles, n));
}

DefectTable bench_table(int items) {
  DefectTable t;
  Rng rng(99);
  t.defect_names = {"bitterpit", "holes", "rot", "browning"};
  t.item_ids.resize(items);
  t.counts.resize(static_cast<std::size_t>(items) * 4);
  for (int i = 0; i < items; ++i) {
    t.item_ids[i] = std::to_string(i + 1);
    for (int j = 0; j < 4; ++j)
      t.counts[static_cast<std::size_t>(i) * 4 + j] =
          static_cast<long long>(rng.uniform_int(4000)) + (i == 0 ? 1 : 0);
  }
  return t;
}

void bm_phantom(benchmark::State& state) {
  auto spec = default_phantom_spec();
  spec.grid_size = int(state.range(0));
  spec.seed = 7;
  for (auto _ : state) benchmark::DoNotOptimize(generate_phantom(spec));
}
BENCHMARK(bm_phantom)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void bm_radon(benchmark::State& state) {
  const int n = int(state.range(0));
  auto img = bench_phantom(n);
  auto geo = default_geometry(50, n);
  for (auto _ : state) benchmark::DoNotOptimize(radon_forward(img, geo));
}
BENCHMARK(bm_radon)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void bm_back_project(benchmark::State& state) {
  const int n = int(state.range(0));
  auto sino = bench_sinogram(n, 50);
  for (auto _ : state) benchmark::DoNotOptimize(back_project(sino, n, 1.0));
}
BENCHMARK(bm_back_project)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void bm_fbp(benchmark::State& state) {
  const int n = int(state.range(0));
  auto sino = bench_sinogram(n, 50);
  ReconSettings settings;
  settings.output_size = n;
  for (auto _ : state) benchmark::DoNotOptimize(fbp(sino, settings));
}
BENCHMARK(bm_fbp)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void bm_cgls15(benchmark::State& state) {
  const int n = int(state.range(0));
  auto sino = bench_sinogram(n, 50);
  ReconSettings settings;
  settings.output_size = n;
  settings.iterations = 15;
  for (auto _ : state) benchmark::DoNotOptimize(cgls(sino, settings));
}
BENCHMARK(bm_cgls15)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void bm_scatter(benchmark::State& state) {
  auto sino = bench_sinogram(256, 50);
  const auto table = default_scatter_table();
  for (auto _ : state) benchmark::DoNotOptimize(apply_scatter(sino, table, 5.0));
}
BENCHMARK(bm_scatter)->Unit(benchmark::kMillisecond);

void bm_noise(benchmark::State& state) {
  auto sino = bench_sinogram(256, 50);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(add_gaussian_noise(sino, 0.05, ++seed));
}
BENCHMARK(bm_noise)->Unit(benchmark::kMillisecond);

void bm_empirical(benchmark::State& state) {
  auto m = normalize_table(bench_table(94));
  EmpiricalOptions opts;
  opts.samples = int(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(empirical_split(m, 0.2, 20, opts));
}
BENCHMARK(bm_empirical)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

void bm_miqp(benchmark::State& state) {
  auto m = normalize_table(bench_table(int(state.range(0))));
  const std::vector<double> targets(4, 0.2);
  // a generic random table rarely certifies down to the stock gap, so pin
  // the work per call with a loose gap and a firm node budget
  MiqpOptions opts;
  opts.gap = 1e-6;
  opts.node_limit = 2000;
  for (auto _ : state)
    benchmark::DoNotOptimize(miqp_split(m, targets, int(state.range(0)) / 5, opts));
}
BENCHMARK(bm_miqp)->Arg(40)->Arg(94)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
