#pragma once

#include <cstdint>
#include <vector>

#include "stlio/geometry.hpp"
#include "stlio/voxel_map.hpp"

namespace stlio {

enum class FinalLabel : std::uint8_t { Static = 0, Dynamic = 1 };

struct Cluster {
  std::vector<std::uint32_t> members;  // indices into the clustered point list
  Vec3 box_min = Vec3::Zero();
  Vec3 box_max = Vec3::Zero();
};

struct SccConfig {
  double upsample_radius = 0.3;
  double dbscan_eps = 0.5;
  int dbscan_min_pts = 5;
  double max_box_volume = 60.0;  // m^3
  double max_box_edge = 8.0;     // m
  double overlap_thr = 0.3;      // static-record overlap below this => Dynamic
};

/// Indices of full-resolution points within `radius` of any downsampled
/// unstable point, ascending and unique.
std::vector<std::uint32_t> upsample_unstable(const std::vector<Vec3>& downsampled_unstable,
                                             const std::vector<StampedPoint>& full_cloud,
                                             double radius);

struct DbscanResult {
  std::vector<Cluster> clusters;
  std::vector<std::uint32_t> noise;
};

/// Density-based clustering with a deterministic scan order: seeds expand in
/// ascending index order, so border points join the first core cluster that
/// reaches them.
DbscanResult dbscan(const std::vector<Vec3>& points, double eps, int min_pts);

/// Drops clusters whose bounding box exceeds the volume or edge caps
/// (caps are inclusive).
std::vector<Cluster> filter_clusters(const std::vector<Cluster>& clusters,
                                     const SccConfig& config);

/// Dynamic iff the cluster box overlaps the confirmed-static record on less
/// than overlap_thr of its voxels.
std::vector<FinalLabel> classify_clusters(const std::vector<Cluster>& clusters,
                                          const StaticVoxelRecord& record, double overlap_thr);

/// Per-point labels over the full-resolution cloud: members of Dynamic
/// clusters are Dynamic, everything else is Static. `candidate_of[k]` maps
/// the k-th clustered point back to its full-cloud index.
std::vector<FinalLabel> finalize_labels(std::size_t full_cloud_size,
                                        const std::vector<std::uint32_t>& candidate_of,
                                        const std::vector<Cluster>& clusters,
                                        const std::vector<FinalLabel>& cluster_labels);

struct RefineResult {
  /// Per-point labels over the full-resolution cloud.
  std::vector<FinalLabel> labels;
  /// Per-point flag: the point sat near an unstable seed and took part in
  /// clustering. Candidates that end up Static were merely vetoed as false
  /// positives — they are not positive evidence of static structure.
  std::vector<std::uint8_t> candidate;
};

/// Whole refinement pass: upsample the downsampled Unstable points into the
/// full cloud, cluster the candidates, drop oversized clusters, and keep as
/// Dynamic only clusters with scant static-record overlap.
RefineResult refine_dynamic_labels(const std::vector<Vec3>& downsampled_unstable,
                                   const std::vector<StampedPoint>& full_cloud,
                                   const StaticVoxelRecord& record, const SccConfig& config);

}  // namespace stlio
