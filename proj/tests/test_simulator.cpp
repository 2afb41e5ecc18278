#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <variant>
#include <vector>

#include "stlio/errors.hpp"
#include "stlio/preprocessing.hpp"
#include "stlio/rng.hpp"
#include "stlio/simulator.hpp"

using stlio::BoxPrimitive;
using stlio::EgoSegment;
using stlio::EgoTrajectory;
using stlio::Mover;
using stlio::PlanePrimitive;
using stlio::Pose;
using stlio::SceneSpec;
using stlio::SimConfig;
using stlio::Vec3;

namespace {

/// Unsigned distance from a world point to a primitive's surface at pose p.
double surface_distance(const stlio::Primitive& prim, const Pose& pose, const Vec3& world) {
  const Vec3 local = pose.inverse() * world;
  if (const auto* box = std::get_if<BoxPrimitive>(&prim)) {
    const Vec3 q = local.cwiseAbs() - box->half_extents;
    const double outside = q.cwiseMax(0.0).norm();
    const double inside = std::min(q.maxCoeff(), 0.0);
    return std::abs(outside + inside);  // |signed distance|
  }
  const auto& plane = std::get<PlanePrimitive>(prim);
  if (std::abs(local.x()) <= plane.hx && std::abs(local.y()) <= plane.hy)
    return std::abs(local.z());
  return std::hypot(std::max(std::abs(local.x()) - plane.hx, 0.0),
                    std::max(std::abs(local.y()) - plane.hy, 0.0), std::abs(local.z()));
}

SceneSpec one_box_scene() {
  SceneSpec scene;
  BoxPrimitive box;
  box.half_extents = Vec3(1, 2, 3);
  box.pose.translation = Vec3(6, 0, 0);
  scene.static_primitives.push_back(box);
  return scene;
}

}  // namespace

TEST_SUITE("simulator") {

TEST_CASE("axis-aligned ray-box intersections are exact") {
  const SceneSpec scene = one_box_scene();
  const auto hit = stlio::raycast(scene, 0.0, Vec3::Zero(), Vec3::UnitX(), 80.0);
  REQUIRE(hit.has_value());
  CHECK(hit->range == doctest::Approx(5.0));
  CHECK_FALSE(hit->dynamic);

  // From inside, the exit face is hit (a box doubles as a closed room).
  const auto inside = stlio::raycast(scene, 0.0, Vec3(6, 0, 0), Vec3::UnitX(), 80.0);
  REQUIRE(inside.has_value());
  CHECK(inside->range == doctest::Approx(1.0));

  // Ray pointing away misses.
  CHECK_FALSE(stlio::raycast(scene, 0.0, Vec3::Zero(), -Vec3::UnitX(), 80.0).has_value());
  // Beyond max range misses.
  CHECK_FALSE(stlio::raycast(scene, 0.0, Vec3::Zero(), Vec3::UnitX(), 4.0).has_value());
}

TEST_CASE("ray-plane intersections respect extent and parallelism") {
  SceneSpec scene;
  PlanePrimitive ground;  // z = 0, finite square
  ground.hx = 5;
  ground.hy = 5;
  scene.static_primitives.push_back(ground);

  const auto hit =
      stlio::raycast(scene, 0.0, Vec3(0, 0, 2), Vec3(1, 0, -1).normalized(), 80.0);
  REQUIRE(hit.has_value());
  CHECK(hit->range == doctest::Approx(2.0 * std::sqrt(2.0)));

  // Parallel, offset from the plane: miss.
  CHECK_FALSE(stlio::raycast(scene, 0.0, Vec3(0, 0, 2), Vec3::UnitX(), 80.0).has_value());
  // Within the plane's infinite direction but beyond the finite extent: miss.
  CHECK_FALSE(
      stlio::raycast(scene, 0.0, Vec3(20, 0, 2), Vec3(0, 0, -1), 80.0).has_value());
}

TEST_CASE("random rays land on a primitive surface with nothing closer") {
  stlio::Rng rng(801);
  SceneSpec scene;
  for (int i = 0; i < 6; ++i) {
    BoxPrimitive box;
    box.half_extents = Vec3(rng.uniform(0.5, 1.5), rng.uniform(0.5, 1.5), rng.uniform(0.5, 1.5));
    box.pose.translation = Vec3(8.0 * (i % 3) - 8.0, 8.0 * (i / 3) - 4.0, rng.uniform(-1, 1));
    box.pose.rotation = stlio::so3::exp_quat(Vec3(0, 0, rng.uniform(0, 3)));
    scene.static_primitives.push_back(box);
  }
  int hits = 0;
  for (int it = 0; it < 2000; ++it) {
    const Vec3 origin(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(3, 5));
    // Aim at a random point inside a random box so most rays hit something.
    const auto& target_box =
        std::get<BoxPrimitive>(scene.static_primitives[rng.uniform_index(6)]);
    const Vec3 in_box(rng.uniform(-1, 1) * target_box.half_extents.x(),
                      rng.uniform(-1, 1) * target_box.half_extents.y(),
                      rng.uniform(-1, 1) * target_box.half_extents.z());
    Vec3 dir = target_box.pose * in_box - origin;
    if (dir.norm() < 1e-9) continue;
    dir.normalize();
    const auto hit = stlio::raycast(scene, 0.0, origin, dir, 60.0);
    if (!hit.has_value()) continue;
    ++hits;
    const Vec3 p = origin + hit->range * dir;
    double nearest = 1e9;
    for (const auto& prim : scene.static_primitives) {
      const Pose pose = std::holds_alternative<BoxPrimitive>(prim)
                            ? std::get<BoxPrimitive>(prim).pose
                            : std::get<PlanePrimitive>(prim).pose;
      nearest = std::min(nearest, surface_distance(prim, pose, p));
    }
    CHECK(nearest < 1e-9);  // the hit point lies on some surface

    // No earlier surface crossing: sample the open segment before the hit.
    for (double s = 0.05; s < hit->range - 1e-6; s += 0.05) {
      const Vec3 q = origin + s * dir;
      for (const auto& prim : scene.static_primitives) {
        if (const auto* box = std::get_if<BoxPrimitive>(&prim)) {
          const Vec3 local = box->pose.inverse() * q;
          const Vec3 slack = box->half_extents - local.cwiseAbs();
          CHECK(slack.minCoeff() < 1e-9);  // never strictly inside a box
        }
      }
    }
  }
  CHECK(hits > 500);
}

TEST_CASE("movers translate and spin about their own origin") {
  Mover m;
  BoxPrimitive box;
  box.pose.translation = Vec3(4, 0, 0);
  m.shape = box;
  m.linear_velocity = Vec3(0, 1, 0);
  m.angular_velocity = Vec3(0, 0, stlio::kPi / 2);  // quarter turn per second

  const Pose at0 = stlio::mover_pose_at(m, 0.0);
  CHECK((at0.translation - Vec3(4, 0, 0)).norm() < 1e-12);

  const Pose at1 = stlio::mover_pose_at(m, 1.0);
  CHECK((at1.translation - Vec3(4, 1, 0)).norm() < 1e-12);
  // After a quarter turn about z, the body x-axis points along world y.
  CHECK((at1.rotation * Vec3::UnitX() - Vec3::UnitY()).norm() < 1e-12);
}

TEST_CASE("ego trajectory is continuous and integrates its own twist") {
  EgoTrajectory ego;
  ego.initial_pose.translation = Vec3(1, 2, 0);
  ego.segments = {{2.0, Vec3(1, 0, 0), Vec3(0, 0, 0.3)},
                  {1.5, Vec3(0.5, 0.2, 0), Vec3(0, 0, -0.5)},
                  {3.0, Vec3(1.2, 0, 0.1), Vec3(0.05, 0, 0.2)}};

  // C0 continuity at the boundaries.
  for (double boundary : {2.0, 3.5}) {
    const Pose before = ego.pose_at(boundary - 1e-9);
    const Pose after = ego.pose_at(boundary + 1e-9);
    CHECK((before.translation - after.translation).norm() < 1e-6);
    CHECK(stlio::so3::log(before.rotation.conjugate() * after.rotation).norm() < 1e-6);
  }

  // Independent oracle: RK4-integrate the body twist.
  stlio::NavState s;
  s.pose = ego.initial_pose;
  const double dt = 1e-3;
  double t = 0.0;
  for (int k = 0; k < 6000; ++k) {
    const auto [w, v] = ego.twist_at(t + 0.5 * dt);  // midpoint input
    // Constant-twist step: exact within the segment.
    s.pose.translation += s.pose.rotation * (stlio::so3::integral_exp(w, dt) * v);
    s.pose.rotation = s.pose.rotation * stlio::so3::exp_quat(w * dt);
    t += dt;
  }
  const Pose direct = ego.pose_at(6.0);
  CHECK((direct.translation - s.pose.translation).norm() < 1e-6);
  CHECK(stlio::so3::log(direct.rotation.conjugate() * s.pose.rotation).norm() < 1e-6);

  // The last segment extends beyond its nominal end.
  CHECK(ego.pose_at(60.0).translation.norm() > 1.0);
}

TEST_CASE("stationary level ego measures gravity reaction plus bias") {
  SimConfig config;
  config.scene = one_box_scene();
  config.duration = 5.0;
  config.lidar.scan_period = 0.1;
  const auto data = stlio::generate_sequence(config);

  REQUIRE(!data.imu.empty());
  Vec3 gyro_mean = Vec3::Zero(), accel_mean = Vec3::Zero();
  for (const auto& s : data.imu) {
    gyro_mean += s.angular_velocity;
    accel_mean += s.linear_acceleration;
  }
  gyro_mean /= static_cast<double>(data.imu.size());
  accel_mean /= static_cast<double>(data.imu.size());

  const double n = static_cast<double>(data.imu.size());
  const double gyro_tol = 5.0 * config.imu.gyro_noise_sigma / std::sqrt(n);
  const double accel_tol = 5.0 * config.imu.accel_noise_sigma / std::sqrt(n);
  CHECK((gyro_mean - config.imu.gyro_bias).norm() < gyro_tol * 3);
  CHECK((accel_mean - (Vec3(0, 0, 9.81) + config.imu.accel_bias)).norm() < accel_tol * 3);

  // Sample times follow k/rate.
  CHECK(data.imu[0].time == doctest::Approx(0.0));
  CHECK(data.imu[1].time - data.imu[0].time == doctest::Approx(1.0 / config.imu.rate));
}

TEST_CASE("same seed reproduces the dataset bit for bit") {
  SimConfig config = stlio::make_preset("rich");
  config.duration = 1.0;
  const auto a = stlio::generate_sequence(config);
  const auto b = stlio::generate_sequence(config);
  REQUIRE(a.frames.size() == b.frames.size());
  REQUIRE(a.imu.size() == b.imu.size());
  for (std::size_t f = 0; f < a.frames.size(); ++f) {
    REQUIRE(a.frames[f].points.size() == b.frames[f].points.size());
    for (std::size_t i = 0; i < a.frames[f].points.size(); ++i) {
      const auto& pa = a.frames[f].points[i];
      const auto& pb = b.frames[f].points[i];
      CHECK((pa.point.position.array() == pb.point.position.array()).all());
      CHECK(pa.point.time == pb.point.time);
      CHECK(pa.truth_label == pb.truth_label);
    }
  }
  for (std::size_t i = 0; i < a.imu.size(); ++i) {
    CHECK((a.imu[i].angular_velocity.array() == b.imu[i].angular_velocity.array()).all());
    CHECK((a.imu[i].linear_acceleration.array() == b.imu[i].linear_acceleration.array()).all());
  }
}

TEST_CASE("stationary ego in a static noise-free scene repeats frames exactly") {
  SimConfig config;
  config.scene = one_box_scene();
  config.lidar.range_noise_sigma = 0.0;
  config.duration = 0.5;
  const auto data = stlio::generate_sequence(config);
  REQUIRE(data.frames.size() == 5);
  const auto& first = data.frames.front();
  for (const auto& frame : data.frames) {
    REQUIRE(frame.points.size() == first.points.size());
    for (std::size_t i = 0; i < frame.points.size(); ++i) {
      CHECK((frame.points[i].point.position.array() ==
             first.points[i].point.position.array())
                .all());
      CHECK(frame.points[i].ring == first.points[i].ring);
    }
  }
}

TEST_CASE("frame count and per-point timestamps follow the scan geometry") {
  SimConfig config;
  config.scene = one_box_scene();
  config.duration = 1.0;
  config.lidar.scan_period = 0.1;
  config.lidar.horizontal_res_deg = 1.0;
  const auto data = stlio::generate_sequence(config);
  CHECK(data.frames.size() == 10);
  for (const auto& frame : data.frames) {
    CHECK(frame.scan_end == doctest::Approx(frame.scan_start + 0.1));
    for (const auto& p : frame.points) {
      CHECK(p.point.time >= frame.scan_start - 1e-12);
      CHECK(p.point.time < frame.scan_end + 1e-12);
      // Azimuth-fraction rule: offsets are multiples of period/columns.
      const double frac = (p.point.time - frame.scan_start) / (0.1 / 360.0);
      CHECK(std::abs(frac - std::round(frac)) < 1e-6);
    }
  }
  // Ground truth: one entry at t=0 plus one per scan end.
  REQUIRE(data.groundtruth.size() == data.frames.size() + 1);
  CHECK(data.groundtruth.front().first == doctest::Approx(0.0));
  CHECK(data.groundtruth.back().first == doctest::Approx(1.0));
}

TEST_CASE("dynamic labels are sound: points lie on the mover at their timestamp") {
  SimConfig config;
  config.scene = one_box_scene();
  Mover m;
  BoxPrimitive box;
  box.half_extents = Vec3(0.4, 0.4, 0.9);
  box.pose.translation = Vec3(3, -2, 0);
  m.shape = box;
  m.linear_velocity = Vec3(0.3, 1.0, 0);
  m.angular_velocity = Vec3(0, 0, 0.6);
  config.scene.movers.push_back(m);
  config.duration = 2.0;
  const auto data = stlio::generate_sequence(config);

  const double sigma = config.lidar.range_noise_sigma;
  std::size_t dynamic_count = 0;
  for (const auto& frame : data.frames) {
    for (const auto& p : frame.points) {
      // Stationary identity ego: sensor frame == world frame.
      if (p.truth_label == 1) {
        ++dynamic_count;
        REQUIRE(p.mover_id == 0);
        const Pose pose = stlio::mover_pose_at(m, p.point.time);
        // Range noise is along the ray; 5-sigma keeps the expected number of
        // exceedances across thousands of samples far below one.
        CHECK(surface_distance(m.shape, pose, p.point.position) <= 5.0 * sigma + 1e-9);
      } else {
        const auto& prim = config.scene.static_primitives[0];
        const Pose pose = std::get<BoxPrimitive>(prim).pose;
        CHECK(surface_distance(prim, pose, p.point.position) <= 5.0 * sigma + 1e-9);
      }
    }
  }
  CHECK(dynamic_count > 100);
}

TEST_CASE("undistortion with ground truth puts static points back on the geometry") {
  SimConfig config;
  SceneSpec scene;
  PlanePrimitive wall;  // x = 10 plane facing -x
  wall.hx = 20;
  wall.hy = 20;
  wall.pose.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(stlio::kPi / 2, Vec3::UnitY()));
  wall.pose.translation = Vec3(10, 0, 0);
  scene.static_primitives.push_back(wall);
  config.scene = scene;
  config.lidar.range_noise_sigma = 0.0;
  config.ego.segments = {{5.0, Vec3(1.0, 0, 0), Vec3(0, 0, 0.2)}};
  config.duration = 1.0;
  const auto data = stlio::generate_sequence(config);

  // Dense ground-truth trajectory for interpolation.
  std::vector<stlio::NavState> traj;
  for (double t = 0.0; t <= 1.05; t += 0.005) {
    stlio::NavState s;
    s.pose = config.ego.pose_at(t);
    s.time = t;
    traj.push_back(s);
  }
  for (const auto& frame : data.frames) {
    stlio::RawScan scan;
    scan.scan_start = frame.scan_start;
    scan.scan_end = frame.scan_end;
    for (const auto& p : frame.points) scan.points.push_back(p.point);
    const auto world = stlio::undistort(scan, traj, Pose::identity());
    for (const auto& p : world) CHECK(std::abs(p.position.x() - 10.0) <= 1e-6);
  }
}

TEST_CASE("presets exist, are distinct, and unknown names are rejected") {
  const auto names = stlio::preset_names();
  REQUIRE(names.size() == 3);
  CHECK(std::find(names.begin(), names.end(), "rich") != names.end());
  CHECK(std::find(names.begin(), names.end(), "degenerate-corridor") != names.end());
  CHECK(std::find(names.begin(), names.end(), "mover-dominated") != names.end());
  for (const auto& name : names) {
    const SimConfig config = stlio::make_preset(name);
    CHECK(config.duration > 0);
    CHECK(!config.scene.static_primitives.empty());
  }
  CHECK(stlio::make_preset("mover-dominated").scene.movers.size() >= 6);
  CHECK_THROWS_AS(stlio::make_preset("bogus"), stlio::ConfigError);
}

TEST_CASE("mover-dominated frames are dominated by dynamic returns") {
  SimConfig config = stlio::make_preset("mover-dominated");
  config.duration = 1.0;
  const auto data = stlio::generate_sequence(config);
  std::size_t dynamic = 0, total = 0;
  for (const auto& frame : data.frames) {
    for (const auto& p : frame.points) {
      total += 1;
      dynamic += p.truth_label == 1 ? 1 : 0;
    }
  }
  REQUIRE(total > 0);
  CHECK(static_cast<double>(dynamic) / static_cast<double>(total) > 0.25);
}

}  // TEST_SUITE
