#include "stlio/preprocessing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "stlio/errors.hpp"
#include "stlio/parallel.hpp"
#include "stlio/so3.hpp"
#include "stlio/voxel_map.hpp"

namespace stlio {

namespace {

// Advances the state by dt under constant body-frame inputs, using the exact
// constant-twist solution: R(t) = R Exp(w t), and the specific-force terms
// integrate through the closed-form single/double integrals of Exp.
NavState step_constant(const NavState& s, const Vec3& omega, const Vec3& accel, double dt,
                       const Vec3& gravity) {
  const Vec3 w = omega - s.gyro_bias;
  const Vec3 f = accel - s.accel_bias;
  const Eigen::Matrix3d r0 = s.pose.rotation.toRotationMatrix();

  NavState out = s;
  out.time = s.time + dt;
  out.pose.rotation = (s.pose.rotation * so3::exp_quat(w * dt)).normalized();
  out.velocity = s.velocity + gravity * dt + r0 * (so3::integral_exp(w, dt) * f);
  out.pose.translation = s.pose.translation + s.velocity * dt + 0.5 * gravity * dt * dt +
                         r0 * (so3::double_integral_exp(w, dt) * f);
  return out;
}

}  // namespace

PropagationResult propagate(const NavState& state, const std::vector<ImuSample>& imu,
                            double until, const Vec3& gravity, double max_gap) {
  if (until < state.time) throw CoverageError("propagation target precedes state time");

  // Gather the sample times that subdivide [state.time, until].
  std::vector<double> cuts;
  cuts.push_back(state.time);
  for (const auto& s : imu) {
    if (s.time > state.time && s.time < until) cuts.push_back(s.time);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.push_back(until);

  // Coverage: no blind stretch longer than max_gap, including the ends.
  double prev_seen = -std::numeric_limits<double>::infinity();
  for (const auto& s : imu) prev_seen = std::max(prev_seen, s.time);
  if (imu.empty() || imu.front().time > state.time + max_gap ||
      prev_seen < until - max_gap) {
    throw CoverageError("IMU stream does not cover the propagation span");
  }
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] - cuts[i] > max_gap + 1e-12) {
      throw CoverageError("IMU gap exceeds the allowed maximum");
    }
  }

  // Piecewise-constant input per sample interval: the midpoint mean of the
  // two bracketing samples. Cuts never straddle a sample, so selecting by the
  // interval midpoint assigns every sub-interval of one sample interval the
  // same constant — that is what makes split propagation exactly consistent.
  const auto interval_input = [&imu](double a, double b) {
    const double mid = 0.5 * (a + b);
    std::size_t hi = 0;
    while (hi + 1 < imu.size() && imu[hi].time < mid) ++hi;
    const std::size_t lo = (hi > 0 && imu[hi].time >= mid) ? hi - 1 : hi;
    return std::pair<Vec3, Vec3>{
        0.5 * (imu[lo].angular_velocity + imu[hi].angular_velocity),
        0.5 * (imu[lo].linear_acceleration + imu[hi].linear_acceleration)};
  };

  PropagationResult out;
  NavState cur = state;
  out.trajectory.push_back(cur);
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = cuts[i], b = cuts[i + 1];
    if (b - a <= 0.0) continue;
    const auto [w, f] = interval_input(a, b);
    cur = step_constant(cur, w, f, b - a, gravity);
    out.trajectory.push_back(cur);
  }
  out.prior = cur;
  return out;
}

Pose interpolate_pose(const std::vector<NavState>& trajectory, double time) {
  if (trajectory.empty()) throw CoverageError("empty trajectory");
  const double eps = 1e-9;
  if (time < trajectory.front().time - eps || time > trajectory.back().time + eps) {
    throw CoverageError("point time outside the trajectory span");
  }
  if (time <= trajectory.front().time) return trajectory.front().pose;
  if (time >= trajectory.back().time) return trajectory.back().pose;

  const auto it = std::upper_bound(
      trajectory.begin(), trajectory.end(), time,
      [](double t, const NavState& s) { return t < s.time; });
  const NavState& hi = *it;
  const NavState& lo = *(it - 1);
  const double span = hi.time - lo.time;
  const double alpha = span > 0.0 ? (time - lo.time) / span : 0.0;
  return Pose::interpolate(lo.pose, hi.pose, alpha);
}

std::vector<StampedPoint> undistort(const RawScan& scan, const std::vector<NavState>& trajectory,
                                    const Pose& extrinsic_body_from_sensor, int threads) {
  if (trajectory.empty()) throw CoverageError("empty trajectory");
  std::vector<StampedPoint> out(scan.points.size());
  parallel_for(scan.points.size(), threads, [&](std::size_t i) {
    const StampedPoint& p = scan.points[i];
    const Pose world_from_body = interpolate_pose(trajectory, p.time);
    out[i] = {world_from_body * (extrinsic_body_from_sensor * p.position), p.time};
  });
  return out;
}

std::vector<std::size_t> voxel_downsample_indices(const std::vector<StampedPoint>& points,
                                                  double cell) {
  if (cell <= 0.0) throw std::invalid_argument("voxel cell must be positive");

  struct Acc {
    Vec3 sum = Vec3::Zero();
    std::uint32_t count = 0;
  };
  std::unordered_map<VoxelKey, Acc, VoxelKeyHash> cells;
  cells.reserve(points.size());
  for (const auto& p : points) {
    Acc& a = cells[VoxelKey::of(p.position, cell)];
    a.sum += p.position;
    a.count += 1;
  }

  // Second pass: nearest real point to each voxel centroid; first input wins
  // ties, so the result is independent of hash iteration order.
  std::unordered_map<VoxelKey, std::pair<double, std::size_t>, VoxelKeyHash> best;
  best.reserve(cells.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const VoxelKey key = VoxelKey::of(points[i].position, cell);
    const Acc& a = cells.at(key);
    const Vec3 centroid = a.sum / static_cast<double>(a.count);
    const double d2 = (points[i].position - centroid).squaredNorm();
    auto [it, fresh] = best.try_emplace(key, d2, i);
    if (!fresh && d2 < it->second.first) it->second = {d2, i};
  }

  std::vector<std::size_t> order;
  order.reserve(best.size());
  for (const auto& [key, hit] : best) order.push_back(hit.second);
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<StampedPoint> voxel_downsample(const std::vector<StampedPoint>& points, double cell) {
  const auto keep = voxel_downsample_indices(points, cell);
  std::vector<StampedPoint> out;
  out.reserve(keep.size());
  for (std::size_t i : keep) out.push_back(points[i]);
  return out;
}

}  // namespace stlio
