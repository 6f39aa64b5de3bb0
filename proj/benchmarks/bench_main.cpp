#include <benchmark/benchmark.h>

#include <random>

#include "warpmetrics/flow.hpp"
#include "warpmetrics/losses.hpp"
#include "warpmetrics/metrics.hpp"
#include "warpmetrics/synth.hpp"

using namespace warpmetrics;

namespace {

Grid2D perturbed_mesh(int h, int w, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-0.3, 0.3);
  Grid2D g(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      g.at(r, c) = {100.0 * c / (w - 1) + unit(rng),
                    80.0 * r / (h - 1) + unit(rng)};
  return g;
}

void BM_UvMap(benchmark::State& state) {
  const int h = 45, w = 31;
  const Grid2D mesh = perturbed_mesh(h, w, 1);
  const Grid2D pred = perturbed_mesh(h, w, 2);
  const UVGrid uv = make_uniform_uv_grid(h, w);
  for (auto _ : state) {
    benchmark::DoNotOptimize(uv_map(pred, mesh, uv));
  }
}
BENCHMARK(BM_UvMap);

void BM_AxisAlignedLossGrad(benchmark::State& state) {
  const int h = 45, w = 31;
  const Grid2D mesh = perturbed_mesh(h, w, 3);
  const Grid2D pred = perturbed_mesh(h, w, 4);
  const UVGrid uv = make_uniform_uv_grid(h, w);
  for (auto _ : state) {
    benchmark::DoNotOptimize(axis_aligned_loss_grad(pred, mesh, uv));
  }
}
BENCHMARK(BM_AxisAlignedLossGrad);

void BM_RemapImage(benchmark::State& state) {
  const ImageBuffer page = make_synthetic_page(488, 712, 5);
  const Grid2D grid = perturbed_mesh(45, 31, 6);
  for (auto _ : state) {
    benchmark::DoNotOptimize(remap_image(page, grid, 488, 712));
  }
}
BENCHMARK(BM_RemapImage);

void BM_SobelWeights(benchmark::State& state) {
  const ImageBuffer page = make_synthetic_page(512, 512, 7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sobel_weights(page));
  }
}
BENCHMARK(BM_SobelWeights);

void BM_Aad(benchmark::State& state) {
  const ImageBuffer page = make_synthetic_page(512, 512, 8);
  const GradientWeights w = sobel_weights(page);
  const auto flow =
      flow_from_warp(WarpSpec::random_sinusoidal(9, 5.0), 512, 512);
  for (auto _ : state) {
    benchmark::DoNotOptimize(aad(w, flow));
  }
}
BENCHMARK(BM_Aad);

void BM_DenseSift(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const ImageBuffer page = make_synthetic_page(side, side, 10);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dense_sift(page));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_DenseSift)->Arg(128)->Arg(256)->Complexity();

void BM_EstimateSiftFlow(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const ImageBuffer page = make_synthetic_page(side, side, 11);
  auto [warped, gt] = apply_warp(page, WarpSpec::random_sinusoidal(12, 4.0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimate_sift_flow(page, warped));
  }
}
BENCHMARK(BM_EstimateSiftFlow)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_MsSsim(benchmark::State& state) {
  const ImageBuffer a = make_synthetic_page(256, 256, 13);
  const ImageBuffer b = make_synthetic_page(256, 256, 14);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ms_ssim(a, b));
  }
}
BENCHMARK(BM_MsSsim);

}  // namespace

BENCHMARK_MAIN();
