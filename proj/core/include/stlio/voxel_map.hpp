#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "stlio/geometry.hpp"
#include "stlio/rng.hpp"

namespace stlio {

struct VoxelKey {
  std::int64_t ix = 0, iy = 0, iz = 0;

  bool operator==(const VoxelKey&) const = default;

  static VoxelKey of(const Vec3& p, double voxel_size) {
    return {static_cast<std::int64_t>(std::floor(p.x() / voxel_size)),
            static_cast<std::int64_t>(std::floor(p.y() / voxel_size)),
            static_cast<std::int64_t>(std::floor(p.z() / voxel_size))};
  }
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const {
    // standard large-prime spatial hash
    const std::uint64_t h = static_cast<std::uint64_t>(k.ix) * 73856093ULL ^
                            static_cast<std::uint64_t>(k.iy) * 19349669ULL ^
                            static_cast<std::uint64_t>(k.iz) * 83492791ULL;
    return static_cast<std::size_t>(h);
  }
};

/// Fitted plane of one voxel: centroid, unit normal, mean-squared
/// point-to-plane residual (= smallest covariance eigenvalue).
struct PlaneVoxel {
  Vec3 centroid = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  double ms_residual = 0.0;
  int point_count = 0;
  bool is_plane = false;
};

struct PlaneFitParams {
  int min_points = 6;
  double plane_eps = 0.05 * 0.05;  // lambda_min bound, m^2
  double plane_ratio = 0.25;       // lambda_min / lambda_mid bound
};

/// Least-squares plane from the 3x3 covariance smallest eigenvector.
/// Not-a-plane when too few points, collinear, or the planarity test fails.
PlaneVoxel fit_plane(const std::vector<Vec3>& points, const PlaneFitParams& params = {});

struct CorrespondenceQuery {
  PlaneVoxel plane;
  Vec3 foot_point = Vec3::Zero();  // projection of the query onto the plane
  double distance = 0.0;           // |n . (p - centroid)|
  VoxelKey key;
};

/// Long-term hash-grid of fitted planes (M_v). Points accumulate per voxel
/// up to a reservoir cap; each insert batch refits the touched voxels.
class PlaneVoxelMap {
 public:
  struct Params {
    double voxel_size = 1.0;
    int max_points_per_voxel = 50;
    double max_corr_dist = 0.5;
    PlaneFitParams fit;
  };

  PlaneVoxelMap() = default;
  explicit PlaneVoxelMap(const Params& params) : params_(params) {}

  void insert_static_points(const std::vector<Vec3>& points);

  /// Searches the query's voxel and its 26 neighbors for the plane voxel
  /// minimizing the point-to-plane distance; none when nothing is within
  /// the gate (max_dist <= 0 means use params().max_corr_dist).
  std::optional<CorrespondenceQuery> query_correspondence(const Vec3& p,
                                                          double max_dist = -1.0) const;

  const PlaneVoxel* plane_at(const VoxelKey& key) const;
  std::size_t voxel_count() const { return voxels_.size(); }
  std::size_t plane_count() const;
  const Params& params() const { return params_; }

 private:
  struct Cell {
    std::vector<Vec3> points;
    PlaneVoxel plane;
    std::uint64_t inserted = 0;  // total ever offered, drives the reservoir
    Rng rng{0};
  };

  Params params_;
  std::unordered_map<VoxelKey, Cell, VoxelKeyHash> voxels_;
};

/// Short-term record of confirmed-static voxels near the sensor (M_scc).
class StaticVoxelRecord {
 public:
  struct Params {
    double voxel_size = 0.5;
    double horizon = 10.0;
  };

  StaticVoxelRecord() = default;
  explicit StaticVoxelRecord(const Params& params) : params_(params) {}

  /// Marks keys static at time `now` and prunes keys older than the horizon.
  void mark_static(const std::vector<VoxelKey>& keys, double now);

  /// Withdraws marks last confirmed strictly before `now`: fresh evidence
  /// that space is occupied by a moving object overrides older static
  /// confirmations, but never a confirmation from the same instant.
  void unmark(const std::vector<VoxelKey>& keys, double now);

  /// Fraction of voxels intersecting the box that are marked static.
  /// Zero-extent axes are padded by half a voxel on each side.
  double overlap_fraction(const Vec3& box_min, const Vec3& box_max) const;

  bool contains(const VoxelKey& key) const { return marked_.count(key) > 0; }
  std::size_t size() const { return marked_.size(); }
  const Params& params() const { return params_; }

 private:
  Params params_;
  std::unordered_map<VoxelKey, double, VoxelKeyHash> marked_;  // key -> last confirmed
  double now_ = 0.0;
};

}  // namespace stlio
