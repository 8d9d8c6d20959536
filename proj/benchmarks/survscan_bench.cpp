// Copyright Contributors to the survscan Project
// SPDX-License-Identifier: Apache-2.0
//
// Microbenchmarks for the hot paths: rasterization, spatial queries,
// triangulation, filtering and epoch differencing. Clouds are synthetic
// terrain-like surfaces so cell occupancy and neighbor counts resemble
// real scans.

#include <benchmark/benchmark.h>

#include <cmath>
#include <cstddef>
#include <random>

#include "survscan/change.hpp"
#include "survscan/preprocess.hpp"
#include "survscan/raster.hpp"
#include "survscan/spatial_index.hpp"
#include "survscan/tin.hpp"

namespace {

using survscan::PointCloud;
using survscan::Vec3;

PointCloud terrain_cloud(std::size_t n, std::uint32_t seed) {
  std::mt19937 g(seed);
  std::uniform_real_distribution<double> xy(0.0, 50.0);
  std::uniform_real_distribution<double> jitter(-0.01, 0.01);
  PointCloud cloud;
  cloud.positions.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = xy(g);
    const double y = xy(g);
    const double z = 0.5 * std::sin(0.2 * x) + 0.3 * std::cos(0.17 * y) +
                     0.01 * x + jitter(g);
    cloud.positions.emplace_back(x, y, z);
  }
  return cloud;
}

void BM_RasterizeDsm(benchmark::State& state) {
  const auto cloud = terrain_cloud(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) {
    auto grid = survscan::raster::rasterize_dsm(cloud, 0.25);
    benchmark::DoNotOptimize(grid.values.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RasterizeDsm)->Arg(100000)->Arg(1000000);

void BM_VolumeArea(benchmark::State& state) {
  const auto cloud = terrain_cloud(static_cast<std::size_t>(state.range(0)), 2);
  const auto grid = survscan::raster::rasterize_dsm(cloud, 0.25);
  for (auto _ : state) {
    auto res = survscan::raster::volume_area(grid);
    benchmark::DoNotOptimize(res);
  }
}
BENCHMARK(BM_VolumeArea)->Arg(1000000);

void BM_SpatialIndexBuild(benchmark::State& state) {
  const auto cloud = terrain_cloud(static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) {
    survscan::SpatialIndex index(cloud);
    benchmark::DoNotOptimize(index.size());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SpatialIndexBuild)->Arg(100000)->Arg(500000);

void BM_SpatialIndexKnn(benchmark::State& state) {
  const auto cloud = terrain_cloud(200000, 4);
  const survscan::SpatialIndex index(cloud);
  std::mt19937 g(5);
  std::uniform_real_distribution<double> xy(0.0, 50.0);
  for (auto _ : state) {
    const Vec3 q(xy(g), xy(g), 0.0);
    auto nn = index.knn(q, static_cast<std::size_t>(state.range(0)));
    benchmark::DoNotOptimize(nn.data());
  }
}
BENCHMARK(BM_SpatialIndexKnn)->Arg(1)->Arg(8)->Arg(64);

void BM_Deduplicate(benchmark::State& state) {
  auto cloud = terrain_cloud(static_cast<std::size_t>(state.range(0)), 6);
  // A quarter of the points are duplicates of earlier ones.
  const std::size_t base = cloud.size();
  for (std::size_t i = 0; i < base / 4; ++i)
    cloud.positions.push_back(cloud.positions[i * 3 % base]);
  for (auto _ : state) {
    auto res = survscan::deduplicate(cloud, 0.001);
    benchmark::DoNotOptimize(res.kept.positions.data());
  }
  state.SetItemsProcessed(state.iterations() * cloud.size());
}
BENCHMARK(BM_Deduplicate)->Arg(200000);

void BM_RemoveOutliers(benchmark::State& state) {
  const auto cloud = terrain_cloud(static_cast<std::size_t>(state.range(0)), 7);
  for (auto _ : state) {
    auto res = survscan::remove_outliers(cloud, 8, 3.0);
    benchmark::DoNotOptimize(res.kept.positions.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RemoveOutliers)->Arg(50000)->Arg(200000);

void BM_Delaunay(benchmark::State& state) {
  const auto cloud = terrain_cloud(static_cast<std::size_t>(state.range(0)), 8);
  for (auto _ : state) {
    auto surface = survscan::tin::delaunay(cloud);
    benchmark::DoNotOptimize(surface.triangles.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Delaunay)->Arg(10000)->Arg(50000);

void BM_VerticalDistance(benchmark::State& state) {
  const auto a = terrain_cloud(static_cast<std::size_t>(state.range(0)), 9);
  auto b = terrain_cloud(static_cast<std::size_t>(state.range(0)), 10);
  for (Vec3& p : b.positions) p.z() += 0.005;
  for (auto _ : state) {
    auto map = survscan::change::vertical_distance(a, b, 0.25);
    benchmark::DoNotOptimize(map.grid.values.data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * state.range(0));
}
BENCHMARK(BM_VerticalDistance)->Arg(500000);

}  // namespace

BENCHMARK_MAIN();
