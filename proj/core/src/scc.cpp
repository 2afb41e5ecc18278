#include "stlio/scc.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <unordered_map>

namespace stlio {

namespace {

// Voxel bucketing at `cell` so range queries only touch 27 neighbors.
class GridIndex {
 public:
  GridIndex(const std::vector<Vec3>& points, double cell) : points_(points), cell_(cell) {
    for (std::uint32_t i = 0; i < points.size(); ++i) {
      cells_[VoxelKey::of(points[i], cell)].push_back(i);
    }
  }

  // indices within `radius` of q, ascending (requires radius <= cell_)
  void within(const Vec3& q, double radius, std::vector<std::uint32_t>& out) const {
    out.clear();
    const double r2 = radius * radius;
    const VoxelKey c = VoxelKey::of(q, cell_);
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          const auto it = cells_.find(VoxelKey{c.ix + dx, c.iy + dy, c.iz + dz});
          if (it == cells_.end()) continue;
          for (const std::uint32_t i : it->second) {
            if ((points_[i] - q).squaredNorm() <= r2) out.push_back(i);
          }
        }
      }
    }
    std::sort(out.begin(), out.end());
  }

 private:
  const std::vector<Vec3>& points_;
  double cell_;
  std::unordered_map<VoxelKey, std::vector<std::uint32_t>, VoxelKeyHash> cells_;
};

}  // namespace

std::vector<std::uint32_t> upsample_unstable(const std::vector<Vec3>& downsampled_unstable,
                                             const std::vector<StampedPoint>& full_cloud,
                                             double radius) {
  if (radius <= 0.0) throw std::invalid_argument("upsample radius must be positive");
  std::vector<std::uint32_t> out;
  if (downsampled_unstable.empty()) return out;

  const GridIndex index(downsampled_unstable, radius);
  std::vector<std::uint32_t> hits;
  for (std::uint32_t i = 0; i < full_cloud.size(); ++i) {
    index.within(full_cloud[i].position, radius, hits);
    if (!hits.empty()) out.push_back(i);
  }
  return out;
}

DbscanResult dbscan(const std::vector<Vec3>& points, double eps, int min_pts) {
  if (eps <= 0.0) throw std::invalid_argument("dbscan eps must be positive");
  if (min_pts < 1) throw std::invalid_argument("dbscan min_pts must be >= 1");

  const std::uint32_t n = static_cast<std::uint32_t>(points.size());
  constexpr std::int32_t kUnvisited = -1, kNoise = -2;
  std::vector<std::int32_t> assignment(n, kUnvisited);
  const GridIndex index(points, eps);

  DbscanResult out;
  std::vector<std::uint32_t> neigh;
  for (std::uint32_t seed = 0; seed < n; ++seed) {
    if (assignment[seed] != kUnvisited) continue;
    index.within(points[seed], eps, neigh);
    if (static_cast<int>(neigh.size()) < min_pts) {  // self-inclusive count
      assignment[seed] = kNoise;
      continue;
    }
    const std::int32_t cid = static_cast<std::int32_t>(out.clusters.size());
    out.clusters.emplace_back();
    assignment[seed] = cid;
    std::deque<std::uint32_t> frontier(neigh.begin(), neigh.end());
    while (!frontier.empty()) {
      const std::uint32_t q = frontier.front();
      frontier.pop_front();
      if (assignment[q] == kNoise) assignment[q] = cid;  // border point
      if (assignment[q] != kUnvisited) continue;
      assignment[q] = cid;
      index.within(points[q], eps, neigh);
      if (static_cast<int>(neigh.size()) >= min_pts) {  // q is core: expand
        frontier.insert(frontier.end(), neigh.begin(), neigh.end());
      }
    }
  }

  for (std::uint32_t i = 0; i < n; ++i) {
    if (assignment[i] == kNoise) {
      out.noise.push_back(i);
    } else {
      out.clusters[static_cast<std::size_t>(assignment[i])].members.push_back(i);
    }
  }
  for (auto& cluster : out.clusters) {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (const std::uint32_t i : cluster.members) {
      lo = lo.cwiseMin(points[i]);
      hi = hi.cwiseMax(points[i]);
    }
    cluster.box_min = lo;
    cluster.box_max = hi;
  }
  return out;
}

std::vector<Cluster> filter_clusters(const std::vector<Cluster>& clusters,
                                     const SccConfig& config) {
  std::vector<Cluster> kept;
  for (const auto& c : clusters) {
    const Vec3 edges = c.box_max - c.box_min;
    const double volume = edges.x() * edges.y() * edges.z();
    if (volume > config.max_box_volume || edges.maxCoeff() > config.max_box_edge) continue;
    kept.push_back(c);
  }
  return kept;
}

std::vector<FinalLabel> classify_clusters(const std::vector<Cluster>& clusters,
                                          const StaticVoxelRecord& record, double overlap_thr) {
  std::vector<FinalLabel> labels;
  labels.reserve(clusters.size());
  for (const auto& c : clusters) {
    const double overlap = record.overlap_fraction(c.box_min, c.box_max);
    labels.push_back(overlap < overlap_thr ? FinalLabel::Dynamic : FinalLabel::Static);
  }
  return labels;
}

std::vector<FinalLabel> finalize_labels(std::size_t full_cloud_size,
                                        const std::vector<std::uint32_t>& candidate_of,
                                        const std::vector<Cluster>& clusters,
                                        const std::vector<FinalLabel>& cluster_labels) {
  std::vector<FinalLabel> out(full_cloud_size, FinalLabel::Static);
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    if (cluster_labels[c] != FinalLabel::Dynamic) continue;
    for (const std::uint32_t k : clusters[c].members) {
      out[candidate_of[k]] = FinalLabel::Dynamic;
    }
  }
  return out;
}

RefineResult refine_dynamic_labels(const std::vector<Vec3>& downsampled_unstable,
                                   const std::vector<StampedPoint>& full_cloud,
                                   const StaticVoxelRecord& record, const SccConfig& config) {
  const auto candidates =
      upsample_unstable(downsampled_unstable, full_cloud, config.upsample_radius);
  std::vector<Vec3> positions;
  positions.reserve(candidates.size());
  for (const std::uint32_t i : candidates) positions.push_back(full_cloud[i].position);

  const DbscanResult groups = dbscan(positions, config.dbscan_eps, config.dbscan_min_pts);
  const auto kept = filter_clusters(groups.clusters, config);
  const auto labels = classify_clusters(kept, record, config.overlap_thr);

  RefineResult out;
  out.labels = finalize_labels(full_cloud.size(), candidates, kept, labels);
  out.candidate.assign(full_cloud.size(), 0);
  for (const std::uint32_t i : candidates) out.candidate[i] = 1;
  return out;
}

}  // namespace stlio
