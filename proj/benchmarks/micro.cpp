// Microbenchmarks for the hot inner-loop primitives: space-time covariance and
// the 4x4 eigensolver, temporal-window k-nearest-neighbor queries, voxel plane
// correspondence lookups, and density clustering.
#include <benchmark/benchmark.h>

#include <vector>

#include "stlio/geometry.hpp"
#include "stlio/rng.hpp"
#include "stlio/scc.hpp"
#include "stlio/temporal_map.hpp"
#include "stlio/voxel_map.hpp"

namespace {

std::vector<stlio::StampedPoint> random_cloud(std::size_t n, double extent, stlio::Rng& rng,
                                              double time_span = 2.0) {
  std::vector<stlio::StampedPoint> pts(n);
  for (auto& p : pts) {
    p.position = stlio::Vec3(rng.uniform(-extent, extent), rng.uniform(-extent, extent),
                             rng.uniform(-extent, extent));
    p.time = rng.uniform(0.0, time_span);
  }
  return pts;
}

void bm_spacetime_covariance(benchmark::State& state) {
  stlio::Rng rng(1);
  const auto pts = random_cloud(static_cast<std::size_t>(state.range(0)), 0.5, rng);
  for (auto _ : state) {
    auto result = stlio::spacetime_covariance(
        std::span<const stlio::StampedPoint>(pts.data(), pts.size()), 2.5);
    benchmark::DoNotOptimize(result);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_spacetime_covariance)->Arg(8)->Arg(20)->Arg(50);

void bm_smallest_eigenvector(benchmark::State& state) {
  stlio::Rng rng(2);
  const auto pts = random_cloud(20, 0.5, rng);
  const auto [cov, mean] = stlio::spacetime_covariance(
      std::span<const stlio::StampedPoint>(pts.data(), pts.size()), 2.5);
  for (auto _ : state) {
    auto result = stlio::smallest_eigenvector(cov);
    benchmark::DoNotOptimize(result);
  }
}
BENCHMARK(bm_smallest_eigenvector);

void bm_st_normal(benchmark::State& state) {
  stlio::Rng rng(3);
  std::vector<stlio::StampedPoint> hood(20);
  for (auto& p : hood) {
    p.position = stlio::Vec3(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                             0.01 * rng.gaussian());
    p.time = rng.uniform(0.0, 2.0);
  }
  stlio::StampedPoint query;
  query.time = 2.0;
  stlio::StNormalParams params;
  params.view_origin = stlio::Vec3(0, 0, 5);
  for (auto _ : state) {
    auto result = stlio::estimate_st_normal(query, hood, params);
    benchmark::DoNotOptimize(result);
  }
}
BENCHMARK(bm_st_normal);

void bm_temporal_map_knn(benchmark::State& state) {
  stlio::Rng rng(4);
  stlio::TemporalWindowMap map(2.0);
  const std::size_t per_frame = static_cast<std::size_t>(state.range(0));
  for (int f = 0; f < 20; ++f) {
    map.push_frame(0.1 * (f + 1), random_cloud(per_frame, 20.0, rng));
  }
  for (auto _ : state) {
    const stlio::Vec3 q(rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-20, 20));
    auto result = map.knn(q, 20);
    benchmark::DoNotOptimize(result);
  }
}
BENCHMARK(bm_temporal_map_knn)->Arg(2000)->Arg(6000);

void bm_temporal_map_push(benchmark::State& state) {
  stlio::Rng rng(5);
  const auto frame = random_cloud(static_cast<std::size_t>(state.range(0)), 20.0, rng);
  double t = 0.0;
  for (auto _ : state) {
    stlio::TemporalWindowMap map(2.0);
    for (int f = 0; f < 5; ++f) {
      t += 0.1;
      map.push_frame(t, frame);
    }
    benchmark::DoNotOptimize(map.live_count());
  }
  state.SetItemsProcessed(state.iterations() * 5 * state.range(0));
}
BENCHMARK(bm_temporal_map_push)->Arg(2000)->Arg(6000);

void bm_plane_voxel_query(benchmark::State& state) {
  stlio::Rng rng(6);
  stlio::PlaneVoxelMap map;
  std::vector<stlio::Vec3> pts;
  pts.reserve(120000);
  for (int i = 0; i < 120000; ++i) {  // mostly-planar patches across many voxels
    const double x = rng.uniform(-30, 30), y = rng.uniform(-30, 30);
    pts.emplace_back(x, y, 0.05 * std::sin(x) + 0.01 * rng.gaussian());
  }
  map.insert_static_points(pts);
  for (auto _ : state) {
    const stlio::Vec3 q(rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(-0.5, 0.5));
    auto result = map.query_correspondence(q);
    benchmark::DoNotOptimize(result);
  }
}
BENCHMARK(bm_plane_voxel_query);

void bm_dbscan(benchmark::State& state) {
  stlio::Rng rng(7);
  std::vector<stlio::Vec3> pts;
  const int n = static_cast<int>(state.range(0));
  for (int i = 0; i < n; ++i) {
    const stlio::Vec3 center(3.0 * (i % 5), 2.0 * ((i / 5) % 4), 0.0);
    pts.push_back(center + 0.3 * stlio::Vec3(rng.gaussian(), rng.gaussian(), rng.gaussian()));
  }
  for (auto _ : state) {
    auto result = stlio::dbscan(pts, 0.5, 5);
    benchmark::DoNotOptimize(result);
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(bm_dbscan)->Arg(500)->Arg(2000);

}  // namespace

BENCHMARK_MAIN();
