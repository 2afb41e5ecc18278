#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "stlio/geometry.hpp"
#include "stlio/preprocessing.hpp"

namespace stlio {

/// Oriented box, extents measured from the center along local axes.
/// Rays starting inside hit the inner surface, so a single box also serves
/// as a closed room.
struct BoxPrimitive {
  Vec3 half_extents = Vec3::Ones();
  Pose pose;
};

/// Finite rectangle in the local z=0 plane (|x| <= hx, |y| <= hy); either
/// extent may be infinite.
struct PlanePrimitive {
  double hx = std::numeric_limits<double>::infinity();
  double hy = std::numeric_limits<double>::infinity();
  Pose pose;
};

using Primitive = std::variant<BoxPrimitive, PlanePrimitive>;

/// Rigid mover: shape posed at initial_pose, translating at a constant world
/// velocity while spinning at a constant world angular rate about its own
/// moving origin.
struct Mover {
  Primitive shape;
  Vec3 linear_velocity = Vec3::Zero();
  Vec3 angular_velocity = Vec3::Zero();
};

struct SceneSpec {
  std::vector<Primitive> static_primitives;
  std::vector<Mover> movers;
};

struct LidarModel {
  int n_rings = 16;
  double vertical_fov_deg = 30.0;       // symmetric about the horizon
  double horizontal_res_deg = 1.0;
  double scan_period = 0.1;             // s
  double max_range = 80.0;              // m
  double range_noise_sigma = 0.01;      // m
};

/// Piecewise constant body-frame twist; pose is closed-form within each
/// segment and C0-continuous across boundaries.
struct EgoSegment {
  double duration = 1.0;
  Vec3 linear_velocity = Vec3::Zero();   // body frame, m/s
  Vec3 angular_velocity = Vec3::Zero();  // body frame, rad/s
};

struct EgoTrajectory {
  Pose initial_pose;
  std::vector<EgoSegment> segments;  // the last segment extends past its end

  Pose pose_at(double t) const;
  /// Body-frame twist at time t (right-continuous at boundaries).
  std::pair<Vec3, Vec3> twist_at(double t) const;  // (angular, linear)
};

struct ImuConfig {
  double rate = 200.0;              // Hz
  double gyro_noise_sigma = 0.002;  // rad/s per sample
  double accel_noise_sigma = 0.02;  // m/s^2 per sample
  Vec3 gyro_bias = Vec3(0.001, -0.0005, 0.0008);
  Vec3 accel_bias = Vec3(0.005, -0.003, 0.004);
};

struct SimConfig {
  SceneSpec scene;
  LidarModel lidar;
  EgoTrajectory ego;
  ImuConfig imu;
  double duration = 20.0;  // s
  std::uint64_t seed = 1;
};

struct LabeledPoint {
  StampedPoint point;  // sensor frame at its own acquisition time
  std::uint16_t ring = 0;
  std::uint8_t truth_label = 0;     // 0 static, 1 dynamic
  std::uint16_t mover_id = 0xFFFF;  // 0xFFFF = none
};

struct LabeledFrame {
  std::vector<LabeledPoint> points;
  double scan_start = 0.0;
  double scan_end = 0.0;
  Pose gt_pose_scan_end;
};

struct SimDataset {
  std::vector<LabeledFrame> frames;
  std::vector<ImuSample> imu;
  std::vector<std::pair<double, Pose>> groundtruth;  // t=0 entry, then scan ends
};

struct RayHit {
  double range = 0.0;
  bool dynamic = false;
  std::uint16_t mover_id = 0xFFFF;
};

/// Nearest intersection among all primitives posed at time t, or none.
std::optional<RayHit> raycast(const SceneSpec& scene, double t, const Vec3& origin,
                              const Vec3& direction, double max_range);

/// Pose of a mover's shape at time t.
Pose mover_pose_at(const Mover& mover, double t);

/// Deterministic dataset synthesis: spinning-lidar frames cast from the ego
/// pose at each point's own timestamp (motion distortion is physically
/// present), an IMU stream derived from the analytic trajectory, and the
/// ground-truth trajectory. Same config and seed give a bit-identical result.
SimDataset generate_sequence(const SimConfig& config);

/// Built-in scenario presets: `rich`, `degenerate-corridor`, `mover-dominated`.
std::vector<std::string> preset_names();
SimConfig make_preset(const std::string& name);

}  // namespace stlio
