#include "stlio/voxel_map.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

namespace stlio {

PlaneVoxel fit_plane(const std::vector<Vec3>& points, const PlaneFitParams& params) {
  PlaneVoxel out;
  out.point_count = static_cast<int>(points.size());
  if (out.point_count < params.min_points) return out;

  Vec3 mean = Vec3::Zero();
  for (const auto& p : points) mean += p;
  mean /= static_cast<double>(points.size());

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points) {
    const Vec3 d = p - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(points.size());

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  const Vec3 evals = eig.eigenvalues();  // ascending
  out.centroid = mean;
  Vec3 n = eig.eigenvectors().col(0);
  // canonical sign: first nonzero component positive
  for (int i = 0; i < 3; ++i) {
    if (std::abs(n[i]) > 1e-12) {
      if (n[i] < 0.0) n = -n;
      break;
    }
  }
  out.normal = n;
  out.ms_residual = std::max(evals[0], 0.0);

  const double trace = std::max(evals.sum(), 0.0);
  if (evals[1] <= 1e-12 * trace) return out;  // collinear: normal ill-defined
  out.is_plane = evals[0] <= params.plane_eps && evals[0] <= params.plane_ratio * evals[1];
  return out;
}

void PlaneVoxelMap::insert_static_points(const std::vector<Vec3>& points) {
  std::vector<VoxelKey> touched;
  for (const auto& p : points) {
    const VoxelKey key = VoxelKey::of(p, params_.voxel_size);
    auto [it, fresh] = voxels_.try_emplace(key);
    Cell& cell = it->second;
    if (fresh) {
      cell.points.reserve(static_cast<std::size_t>(params_.max_points_per_voxel));
      // Per-voxel stream so reservoir decisions are independent of insert
      // order across voxels and of thread count.
      cell.rng = Rng::derive(0x9E3779B97F4A7C15ULL,
                             VoxelKeyHash{}(key) ^ 0xD1B54A32D192ED03ULL);
    }
    cell.inserted += 1;
    const auto cap = static_cast<std::size_t>(params_.max_points_per_voxel);
    if (cell.points.size() < cap) {
      cell.points.push_back(p);
    } else {
      // classic reservoir: keep each offered point with prob cap/inserted
      const std::uint64_t j = cell.rng.next_u64() % cell.inserted;
      if (j < cap) cell.points[static_cast<std::size_t>(j)] = p;
    }
    touched.push_back(key);
  }
  std::sort(touched.begin(), touched.end(), [](const VoxelKey& a, const VoxelKey& b) {
    return std::tie(a.ix, a.iy, a.iz) < std::tie(b.ix, b.iy, b.iz);
  });
  touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
  for (const VoxelKey& key : touched) {
    Cell& cell = voxels_.at(key);
    cell.plane = fit_plane(cell.points, params_.fit);
  }
}

std::optional<CorrespondenceQuery> PlaneVoxelMap::query_correspondence(const Vec3& p,
                                                                       double max_dist) const {
  const double gate = max_dist > 0.0 ? max_dist : params_.max_corr_dist;
  const VoxelKey center = VoxelKey::of(p, params_.voxel_size);
  std::optional<CorrespondenceQuery> best;
  // fixed iteration order keeps the result independent of hash layout
  for (std::int64_t dx = -1; dx <= 1; ++dx) {
    for (std::int64_t dy = -1; dy <= 1; ++dy) {
      for (std::int64_t dz = -1; dz <= 1; ++dz) {
        const VoxelKey key{center.ix + dx, center.iy + dy, center.iz + dz};
        const auto it = voxels_.find(key);
        if (it == voxels_.end() || !it->second.plane.is_plane) continue;
        const PlaneVoxel& plane = it->second.plane;
        const double signed_d = plane.normal.dot(p - plane.centroid);
        const double dist = std::abs(signed_d);
        if (dist > gate) continue;
        if (!best || dist < best->distance) {
          best = CorrespondenceQuery{plane, p - signed_d * plane.normal, dist, key};
        }
      }
    }
  }
  return best;
}

const PlaneVoxel* PlaneVoxelMap::plane_at(const VoxelKey& key) const {
  const auto it = voxels_.find(key);
  return it == voxels_.end() ? nullptr : &it->second.plane;
}

std::size_t PlaneVoxelMap::plane_count() const {
  std::size_t n = 0;
  for (const auto& [key, cell] : voxels_) n += cell.plane.is_plane ? 1 : 0;
  return n;
}

void StaticVoxelRecord::mark_static(const std::vector<VoxelKey>& keys, double now) {
  now_ = std::max(now_, now);
  for (const VoxelKey& key : keys) {
    auto [it, fresh] = marked_.try_emplace(key, now);
    if (!fresh) it->second = std::max(it->second, now);
  }
  for (auto it = marked_.begin(); it != marked_.end();) {
    if (it->second < now_ - params_.horizon) {
      it = marked_.erase(it);
    } else {
      ++it;
    }
  }
}

void StaticVoxelRecord::unmark(const std::vector<VoxelKey>& keys, double now) {
  for (const VoxelKey& key : keys) {
    const auto it = marked_.find(key);
    if (it != marked_.end() && it->second < now) marked_.erase(it);
  }
}

double StaticVoxelRecord::overlap_fraction(const Vec3& box_min, const Vec3& box_max) const {
  Vec3 lo = box_min, hi = box_max;
  for (int i = 0; i < 3; ++i) {
    if (hi[i] - lo[i] < 1e-12) {  // degenerate axis: pad to half a voxel each side
      const double mid = 0.5 * (lo[i] + hi[i]);
      lo[i] = mid - 0.5 * params_.voxel_size;
      hi[i] = mid + 0.5 * params_.voxel_size;
    }
  }
  const VoxelKey kmin = VoxelKey::of(lo, params_.voxel_size);
  const VoxelKey kmax = VoxelKey::of(hi, params_.voxel_size);
  std::uint64_t total = 0, hit = 0;
  for (std::int64_t ix = kmin.ix; ix <= kmax.ix; ++ix) {
    for (std::int64_t iy = kmin.iy; iy <= kmax.iy; ++iy) {
      for (std::int64_t iz = kmin.iz; iz <= kmax.iz; ++iz) {
        total += 1;
        hit += marked_.count(VoxelKey{ix, iy, iz}) > 0 ? 1 : 0;
      }
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

}  // namespace stlio
