#pragma once

#include <vector>

#include "stlio/geometry.hpp"

namespace stlio {

struct ImuSample {
  double time = 0.0;
  Vec3 angular_velocity = Vec3::Zero();     // rad/s, body frame
  Vec3 linear_acceleration = Vec3::Zero();  // m/s^2, body frame, includes gravity reaction
};

struct NavState {
  Pose pose;  // world <- body
  Vec3 velocity = Vec3::Zero();
  Vec3 gyro_bias = Vec3::Zero();
  Vec3 accel_bias = Vec3::Zero();
  double time = 0.0;
};

struct RawScan {
  std::vector<StampedPoint> points;  // sensor frame, absolute times
  double scan_start = 0.0;
  double scan_end = 0.0;
};

inline constexpr double kDefaultGravityZ = -9.81;
inline constexpr double kMaxImuGap = 0.05;  // seconds

struct PropagationResult {
  NavState prior;                    // state at `until`
  std::vector<NavState> trajectory;  // states at start, each sample time inside, and `until`
};

/// Strapdown propagation with piecewise-constant bias-corrected inputs
/// (midpoint mean of the bracketing samples per interval) integrated in
/// closed form, so splitting the time span is exactly consistent.
/// Throws CoverageError when any gap against [state.time, until] exceeds
/// max_gap.
PropagationResult propagate(const NavState& state, const std::vector<ImuSample>& imu,
                            double until, const Vec3& gravity = Vec3(0, 0, kDefaultGravityZ),
                            double max_gap = kMaxImuGap);

/// Interpolated pose (slerp rotation, lerp translation) at `time` between the
/// bracketing trajectory states. Throws CoverageError outside the span.
Pose interpolate_pose(const std::vector<NavState>& trajectory, double time);

/// Transforms every sensor-frame point into the world frame using the body
/// pose interpolated at the point's own timestamp composed with the
/// body<-sensor extrinsic. Per-point times are kept.
std::vector<StampedPoint> undistort(const RawScan& scan, const std::vector<NavState>& trajectory,
                                    const Pose& extrinsic_body_from_sensor, int threads = 1);

/// One representative per occupied voxel: the input point nearest the voxel's
/// centroid (ties to the earliest input), original timestamp retained.
/// Output keeps input order between representatives.
std::vector<StampedPoint> voxel_downsample(const std::vector<StampedPoint>& points, double cell);

/// Indices of the representatives voxel_downsample would keep, ascending.
std::vector<std::size_t> voxel_downsample_indices(const std::vector<StampedPoint>& points,
                                                  double cell);

}  // namespace stlio
