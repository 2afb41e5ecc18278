#include "stlio/simulator.hpp"

#include <algorithm>
#include <cmath>

#include "stlio/errors.hpp"
#include "stlio/rng.hpp"
#include "stlio/so3.hpp"

namespace stlio {

namespace {

constexpr double kRayEps = 1e-9;
constexpr double kMinRange = 0.5;

// Slab-method intersection in the box's local frame. A ray starting inside
// hits the inner surface (the exit slab), so a box doubles as a closed room.
std::optional<double> intersect_box(const BoxPrimitive& box, const Pose& pose_at_t,
                                    const Vec3& origin, const Vec3& dir) {
  const Pose inv = pose_at_t.inverse();
  const Vec3 o = inv * origin;
  const Vec3 d = inv.rotation * dir;
  double tmin = -std::numeric_limits<double>::infinity();
  double tmax = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    if (std::abs(d[i]) < 1e-15) {
      if (std::abs(o[i]) > box.half_extents[i]) return std::nullopt;
      continue;
    }
    double t0 = (-box.half_extents[i] - o[i]) / d[i];
    double t1 = (box.half_extents[i] - o[i]) / d[i];
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
    if (tmin > tmax) return std::nullopt;
  }
  if (tmin > kRayEps) return tmin;
  if (tmax > kRayEps) return tmax;  // origin inside the box
  return std::nullopt;
}

std::optional<double> intersect_plane(const PlanePrimitive& plane, const Pose& pose_at_t,
                                      const Vec3& origin, const Vec3& dir) {
  const Pose inv = pose_at_t.inverse();
  const Vec3 o = inv * origin;
  const Vec3 d = inv.rotation * dir;
  if (std::abs(d.z()) < 1e-15) return std::nullopt;  // parallel
  const double t = -o.z() / d.z();
  if (t <= kRayEps) return std::nullopt;
  const Vec3 hit = o + t * d;
  if (std::abs(hit.x()) > plane.hx || std::abs(hit.y()) > plane.hy) return std::nullopt;
  return t;
}

std::optional<double> intersect_primitive(const Primitive& prim, const Pose& pose_at_t,
                                          const Vec3& origin, const Vec3& dir) {
  if (const auto* box = std::get_if<BoxPrimitive>(&prim)) {
    return intersect_box(*box, pose_at_t, origin, dir);
  }
  return intersect_plane(std::get<PlanePrimitive>(prim), pose_at_t, origin, dir);
}

const Pose& primitive_pose(const Primitive& prim) {
  if (const auto* box = std::get_if<BoxPrimitive>(&prim)) return box->pose;
  return std::get<PlanePrimitive>(prim).pose;
}

// Precomputed segment boundaries so per-point pose lookups stay O(log n).
struct EgoSampler {
  std::vector<double> starts;
  std::vector<Pose> start_poses;
  const EgoTrajectory* traj;

  explicit EgoSampler(const EgoTrajectory& t) : traj(&t) {
    double time = 0.0;
    Pose pose = t.initial_pose;
    for (const auto& seg : t.segments) {
      starts.push_back(time);
      start_poses.push_back(pose);
      pose = advance(pose, seg, seg.duration);
      time += seg.duration;
    }
    if (starts.empty()) {
      starts.push_back(0.0);
      start_poses.push_back(pose);
    }
  }

  static Pose advance(const Pose& from, const EgoSegment& seg, double tau) {
    Pose out;
    out.rotation = (from.rotation * so3::exp_quat(seg.angular_velocity * tau)).normalized();
    out.translation =
        from.translation + from.rotation.toRotationMatrix() *
                               (so3::integral_exp(seg.angular_velocity, tau) *
                                seg.linear_velocity);
    return out;
  }

  std::size_t segment_index(double t) const {
    std::size_t i = starts.size() - 1;
    while (i > 0 && starts[i] > t) --i;
    // clamp into real segments; the last one extends indefinitely
    return std::min(i, traj->segments.empty() ? std::size_t{0} : traj->segments.size() - 1);
  }

  Pose pose_at(double t) const {
    if (traj->segments.empty()) return traj->initial_pose;
    const std::size_t i = segment_index(std::max(t, 0.0));
    return advance(start_poses[i], traj->segments[i], std::max(t, 0.0) - starts[i]);
  }
};

}  // namespace

Pose EgoTrajectory::pose_at(double t) const { return EgoSampler(*this).pose_at(t); }

std::pair<Vec3, Vec3> EgoTrajectory::twist_at(double t) const {
  if (segments.empty()) return {Vec3::Zero(), Vec3::Zero()};
  double start = 0.0;
  for (const auto& seg : segments) {
    if (t < start + seg.duration) return {seg.angular_velocity, seg.linear_velocity};
    start += seg.duration;
  }
  return {segments.back().angular_velocity, segments.back().linear_velocity};
}

Pose mover_pose_at(const Mover& mover, double t) {
  const Pose& init = primitive_pose(mover.shape);
  Pose out;
  out.rotation = (so3::exp_quat(mover.angular_velocity * t) * init.rotation).normalized();
  out.translation = init.translation + mover.linear_velocity * t;
  return out;
}

std::optional<RayHit> raycast(const SceneSpec& scene, double t, const Vec3& origin,
                              const Vec3& direction, double max_range) {
  std::optional<RayHit> best;
  const auto consider = [&](std::optional<double> range, bool dynamic, std::uint16_t id) {
    if (!range || *range > max_range) return;
    if (!best || *range < best->range) best = RayHit{*range, dynamic, id};
  };
  for (const auto& prim : scene.static_primitives) {
    consider(intersect_primitive(prim, primitive_pose(prim), origin, direction), false, 0xFFFF);
  }
  for (std::size_t m = 0; m < scene.movers.size(); ++m) {
    const Pose pose = mover_pose_at(scene.movers[m], t);
    consider(intersect_primitive(scene.movers[m].shape, pose, origin, direction), true,
             static_cast<std::uint16_t>(m));
  }
  return best;
}

SimDataset generate_sequence(const SimConfig& config) {
  if (config.duration <= 0.0) throw ConfigError("simulation duration must be positive");
  const LidarModel& lidar = config.lidar;
  if (lidar.n_rings < 1 || lidar.horizontal_res_deg <= 0.0 || lidar.scan_period <= 0.0) {
    throw ConfigError("invalid lidar model");
  }

  SimDataset out;
  const EgoSampler ego(config.ego);
  const int n_cols = static_cast<int>(std::lround(360.0 / lidar.horizontal_res_deg));
  const int n_frames = static_cast<int>(std::floor(config.duration / lidar.scan_period + 0.5));
  const double vfov = lidar.vertical_fov_deg * kPi / 180.0;

  out.groundtruth.emplace_back(0.0, ego.pose_at(0.0));
  out.frames.reserve(static_cast<std::size_t>(n_frames));
  for (int f = 0; f < n_frames; ++f) {
    LabeledFrame frame;
    frame.scan_start = f * lidar.scan_period;
    frame.scan_end = (f + 1) * lidar.scan_period;
    frame.gt_pose_scan_end = ego.pose_at(frame.scan_end);
    frame.points.reserve(static_cast<std::size_t>(n_cols) * lidar.n_rings);

    Rng rng = Rng::derive(config.seed, static_cast<std::uint64_t>(f));
    for (int col = 0; col < n_cols; ++col) {
      const double frac = static_cast<double>(col) / n_cols;
      const double t = frame.scan_start + frac * lidar.scan_period;
      const double az = 2.0 * kPi * frac;
      const Pose sensor_pose = ego.pose_at(t);
      const Eigen::Matrix3d r = sensor_pose.rotation.toRotationMatrix();
      for (int ring = 0; ring < lidar.n_rings; ++ring) {
        const double el =
            lidar.n_rings == 1 ? 0.0 : -0.5 * vfov + vfov * ring / (lidar.n_rings - 1);
        const Vec3 dir_sensor(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az),
                              std::sin(el));
        const auto hit = raycast(config.scene, t, sensor_pose.translation, r * dir_sensor,
                                 lidar.max_range);
        if (!hit || hit->range < kMinRange) continue;
        const double noisy =
            std::max(0.01, hit->range + rng.gaussian(0.0, lidar.range_noise_sigma));
        LabeledPoint pt;
        pt.point = {noisy * dir_sensor, t};
        pt.ring = static_cast<std::uint16_t>(ring);
        pt.truth_label = hit->dynamic ? 1 : 0;
        pt.mover_id = hit->mover_id;
        frame.points.push_back(pt);
      }
    }
    out.groundtruth.emplace_back(frame.scan_end, frame.gt_pose_scan_end);
    out.frames.push_back(std::move(frame));
  }

  // IMU: analytic body twist plus gravity reaction, bias, and white noise.
  const Vec3 gravity(0.0, 0.0, kDefaultGravityZ);
  Rng imu_rng = Rng::derive(config.seed, 0x1000000000000000ULL);
  const int n_samples = static_cast<int>(std::floor(config.duration * config.imu.rate)) + 1;
  out.imu.reserve(static_cast<std::size_t>(n_samples));
  for (int k = 0; k < n_samples; ++k) {
    const double t = k / config.imu.rate;
    const auto [omega_b, vel_b] = config.ego.twist_at(t);
    const Eigen::Matrix3d r = ego.pose_at(t).rotation.toRotationMatrix();
    ImuSample s;
    s.time = t;
    s.angular_velocity = omega_b + config.imu.gyro_bias +
                         Vec3(imu_rng.gaussian(0.0, config.imu.gyro_noise_sigma),
                              imu_rng.gaussian(0.0, config.imu.gyro_noise_sigma),
                              imu_rng.gaussian(0.0, config.imu.gyro_noise_sigma));
    s.linear_acceleration = omega_b.cross(vel_b) - r.transpose() * gravity +
                            config.imu.accel_bias +
                            Vec3(imu_rng.gaussian(0.0, config.imu.accel_noise_sigma),
                                 imu_rng.gaussian(0.0, config.imu.accel_noise_sigma),
                                 imu_rng.gaussian(0.0, config.imu.accel_noise_sigma));
    out.imu.push_back(s);
  }
  return out;
}

namespace {

Pose make_pose(const Vec3& position, double yaw_deg = 0.0, double pitch_deg = 0.0,
               double roll_deg = 0.0) {
  const double d2r = kPi / 180.0;
  Pose p;
  p.translation = position;
  p.rotation = Eigen::AngleAxisd(yaw_deg * d2r, Vec3::UnitZ()) *
               Eigen::AngleAxisd(pitch_deg * d2r, Vec3::UnitY()) *
               Eigen::AngleAxisd(roll_deg * d2r, Vec3::UnitX());
  return p;
}

BoxPrimitive box(const Vec3& half_extents, const Vec3& center, double yaw_deg = 0.0) {
  return {half_extents, make_pose(center, yaw_deg)};
}

// Vertical rectangular panel: local z maps to the world normal direction.
PlanePrimitive wall_panel(double half_width, double half_height, const Vec3& center,
                          double normal_yaw_deg) {
  PlanePrimitive p;
  p.hx = half_width;
  p.hy = half_height;
  p.pose.translation = center;
  const double d2r = kPi / 180.0;
  p.pose.rotation = Eigen::AngleAxisd(normal_yaw_deg * d2r, Vec3::UnitZ()) *
                    Eigen::AngleAxisd(0.5 * kPi, Vec3::UnitY());
  return p;
}

Mover box_mover(const Vec3& half_extents, const Vec3& start, const Vec3& velocity,
                double spin_z = 0.0, double yaw_deg = 0.0) {
  Mover m;
  m.shape = BoxPrimitive{half_extents, make_pose(start, yaw_deg)};
  m.linear_velocity = velocity;
  m.angular_velocity = Vec3(0.0, 0.0, spin_z);
  return m;
}

SimConfig preset_rich() {
  SimConfig c;
  c.duration = 20.0;
  c.lidar = {16, 30.0, 1.0, 0.1, 80.0, 0.01};

  // closed 16 x 12 x 4 room with interior structure
  c.scene.static_primitives.push_back(box({8.0, 6.0, 2.0}, {0.0, 0.0, 2.0}));
  c.scene.static_primitives.push_back(box({0.3, 0.3, 2.0}, {5.0, 3.5, 2.0}));
  c.scene.static_primitives.push_back(box({0.3, 0.3, 2.0}, {-5.0, 3.5, 2.0}));
  c.scene.static_primitives.push_back(box({0.3, 0.3, 2.0}, {5.0, -3.5, 2.0}));
  c.scene.static_primitives.push_back(box({0.3, 0.3, 2.0}, {-5.5, -3.0, 2.0}));
  c.scene.static_primitives.push_back(box({1.0, 0.6, 0.4}, {2.5, 2.0, 0.4}, 20.0));
  c.scene.static_primitives.push_back(box({0.8, 1.2, 0.5}, {-2.0, -1.5, 0.5}, -35.0));
  c.scene.static_primitives.push_back(box({0.5, 0.5, 1.1}, {6.5, -4.5, 1.1}, 10.0));

  c.scene.movers.push_back(
      box_mover({0.3, 0.3, 0.9}, {2.0, 4.5, 0.9}, {0.0, -0.8, 0.0}, 0.6));
  c.scene.movers.push_back(
      box_mover({0.35, 0.3, 0.85}, {-2.5, -4.5, 0.85}, {0.3, 0.7, 0.0}, 0.4));

  c.ego.initial_pose = make_pose({-5.0, -4.0, 1.2});
  c.ego.segments = {
      {8.0, {1.0, 0.0, 0.0}, {0.0, 0.0, 0.0}},
      {2.0, {1.0, 0.0, 0.0}, {0.0, 0.0, 0.7854}},
      {4.0, {1.0, 0.0, 0.0}, {0.0, 0.0, 0.0}},
      {2.0, {1.0, 0.0, 0.0}, {0.0, 0.0, 0.7854}},
      {4.0, {1.0, 0.0, 0.0}, {0.0, 0.0, 0.0}},
  };
  return c;
}

SimConfig preset_corridor() {
  SimConfig c;
  c.duration = 20.0;
  c.lidar = {16, 30.0, 1.0, 0.1, 80.0, 0.01};

  // long corridor: parallel walls, floor, ceiling — translation along x is
  // geometrically unconstrained
  c.scene.static_primitives.push_back(wall_panel(40.0, 2.0, {30.0, -3.0, 2.0}, 90.0));
  c.scene.static_primitives.push_back(wall_panel(40.0, 2.0, {30.0, 3.0, 2.0}, -90.0));
  PlanePrimitive floor;
  floor.hx = 40.0;
  floor.hy = 3.0;
  floor.pose = make_pose({30.0, 0.0, 0.0});
  c.scene.static_primitives.push_back(floor);
  PlanePrimitive ceiling = floor;
  ceiling.pose = make_pose({30.0, 0.0, 4.0});
  c.scene.static_primitives.push_back(ceiling);

  c.scene.movers.push_back(
      box_mover({0.3, 0.3, 0.9}, {8.0, -1.5, 0.9}, {1.2, 0.0, 0.0}, 0.5));
  c.scene.movers.push_back(
      box_mover({0.3, 0.3, 0.9}, {25.0, 1.5, 0.9}, {-0.9, 0.0, 0.0}, 0.4));

  c.ego.initial_pose = make_pose({0.0, 0.0, 1.2});
  c.ego.segments = {{20.0, {1.5, 0.0, 0.0}, {0.0, 0.0, 0.0}}};
  return c;
}

SimConfig preset_mover_dominated() {
  SimConfig c;
  c.duration = 20.0;
  c.lidar = {16, 30.0, 1.2, 0.1, 60.0, 0.01};

  // Sparse static structure: ground, scattered posts, and four short
  // free-standing walls spread across azimuth quadrants so that no single
  // passing object can occlude every static surface at once.
  PlanePrimitive ground;
  ground.hx = 40.0;
  ground.hy = 40.0;
  ground.pose = make_pose({0.0, 0.0, 0.0});
  c.scene.static_primitives.push_back(ground);
  c.scene.static_primitives.push_back(box({0.3, 0.3, 1.5}, {8.0, 5.0, 1.5}));
  c.scene.static_primitives.push_back(box({0.3, 0.3, 1.5}, {-6.0, 7.0, 1.5}));
  c.scene.static_primitives.push_back(box({0.3, 0.3, 1.5}, {10.0, -6.0, 1.5}));
  c.scene.static_primitives.push_back(box({0.3, 0.3, 1.5}, {-8.0, -5.0, 1.5}));
  c.scene.static_primitives.push_back(box({0.3, 0.3, 1.5}, {14.0, 2.0, 1.5}));
  c.scene.static_primitives.push_back(box({0.3, 0.3, 1.5}, {3.0, -9.0, 1.5}));
  c.scene.static_primitives.push_back(box({4.0, 0.15, 1.5}, {2.0, 12.0, 1.5}));
  c.scene.static_primitives.push_back(box({0.15, 4.0, 1.5}, {-9.0, 1.0, 1.5}));
  c.scene.static_primitives.push_back(box({4.0, 0.15, 1.5}, {7.0, -8.0, 1.5}));
  c.scene.static_primitives.push_back(box({0.15, 4.0, 1.5}, {16.0, 3.0, 1.5}));

  // Movers dominate the near-field returns. Paths are staggered so close
  // passes (2.5-3.7 m) happen throughout the run, but never so many at once
  // that the static world disappears; spin keeps every face moving along
  // its own normal. Bodies are torso-height slabs (0.55-2.05 m): at sensor
  // height a lidar sees upper bodies, not ankles.
  c.scene.movers.push_back(
      box_mover({0.9, 0.6, 0.75}, {3.07, 4.13, 1.3}, {0.549, -0.404, 0.0}, 0.5));
  c.scene.movers.push_back(
      box_mover({0.8, 0.7, 0.75}, {3.80, -11.15, 1.3}, {-0.112, 1.052, 0.0}, -0.6));
  c.scene.movers.push_back(
      box_mover({1.0, 0.6, 0.75}, {-7.82, 1.52, 1.3}, {0.558, 0.187, 0.0}, 0.45));
  c.scene.movers.push_back(
      box_mover({0.9, 0.9, 0.75}, {-0.16, 6.30, 1.3}, {0.154, -0.430, 0.0}, 0.7));
  c.scene.movers.push_back(
      box_mover({1.0, 0.7, 0.75}, {-8.47, -7.77, 1.3}, {0.969, 0.599, 0.0}, -0.5));
  c.scene.movers.push_back(
      box_mover({0.8, 0.8, 0.75}, {0.53, -4.12, 1.3}, {-0.038, 0.499, 0.0}, 0.55));
  c.scene.movers.push_back(
      box_mover({0.9, 0.7, 0.75}, {0.97, 12.80, 1.3}, {0.433, -0.380, 0.0}, -0.65));
  c.scene.movers.push_back(
      box_mover({0.9, 0.6, 0.75}, {-2.05, 9.42, 1.3}, {0.290, -0.466, 0.0}, 0.6));
  c.scene.movers.push_back(
      box_mover({0.9, 0.7, 0.75}, {-1.29, 2.57, 1.3}, {0.652, 0.319, 0.0}, -0.55));

  c.ego.initial_pose = make_pose({0.0, 0.0, 1.2});
  c.ego.segments = {{20.0, {0.5, 0.0, 0.0}, {0.0, 0.0, 0.08}}};

  // A consumer-grade IMU: noisy enough that the propagated prior is only
  // approximate, so classification quality genuinely depends on how the
  // registration loop handles labels.
  c.imu.gyro_noise_sigma = 0.015;
  c.imu.accel_noise_sigma = 0.15;
  c.imu.gyro_bias = Vec3(0.004, -0.002, 0.003);
  c.imu.accel_bias = Vec3(0.02, -0.012, 0.016);
  return c;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"rich", "degenerate-corridor", "mover-dominated"};
}

SimConfig make_preset(const std::string& name) {
  if (name == "rich") return preset_rich();
  if (name == "degenerate-corridor") return preset_corridor();
  if (name == "mover-dominated") return preset_mover_dominated();
  throw ConfigError("unknown preset: " + name);
}

}  // namespace stlio
