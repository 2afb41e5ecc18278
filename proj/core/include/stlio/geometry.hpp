#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "stlio/so3.hpp"

namespace stlio {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;

inline constexpr double kPi = 3.14159265358979323846;

/// A lidar return: 3D position plus its acquisition time. The frame the
/// position is expressed in is the owner's contract (sensor or world).
struct StampedPoint {
  Vec3 position = Vec3::Zero();
  double time = 0.0;
};

/// Rigid transform, rotation stored as a unit quaternion.
struct Pose {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }

  Vec3 operator*(const Vec3& p) const { return rotation * p + translation; }

  Pose compose(const Pose& other) const {
    return {rotation * other.rotation, rotation * other.translation + translation};
  }

  Pose inverse() const {
    const Eigen::Quaterniond qi = rotation.conjugate();
    return {qi, qi * (-translation)};
  }

  void normalize() { rotation.normalize(); }

  /// Slerp on rotation, lerp on translation; alpha in [0,1].
  static Pose interpolate(const Pose& a, const Pose& b, double alpha) {
    return {a.rotation.slerp(alpha, b.rotation),
            (1.0 - alpha) * a.translation + alpha * b.translation};
  }
};

/// Unit 4-vector (a,b,c,d): spatial normal plus the temporal component that
/// carries the dynamicity signal.
struct SpatioTemporalNormal {
  double a = 0.0, b = 0.0, c = 0.0, d = 0.0;

  Vec3 spatial() const { return {a, b, c}; }
  Vec4 as_vec4() const { return {a, b, c, d}; }
  double norm() const { return as_vec4().norm(); }
};

/// Symmetric 4x4 matrix, row-major upper triangle (10 unique entries).
struct SymMat4 {
  // order: (0,0)(0,1)(0,2)(0,3)(1,1)(1,2)(1,3)(2,2)(2,3)(3,3)
  std::array<double, 10> u{};

  static SymMat4 from_matrix(const Eigen::Matrix4d& m);
  Eigen::Matrix4d to_matrix() const;

  double& at(int r, int c);
  double at(int r, int c) const;
  double trace() const { return u[0] + u[4] + u[7] + u[9]; }
};

enum class StabilityLabel : std::uint8_t { Stable, Unstable };

struct DegenerateNeighborhood {};  // classification signal, not a failure

/// 4x4 covariance of scaled space-time coordinates about their mean
/// (population normalization, divisor = |N|). Times are multiplied by
/// time_scale before accumulation. Throws std::invalid_argument when the
/// neighborhood has fewer than 2 points.
std::pair<SymMat4, Vec4> spacetime_covariance(std::span<const StampedPoint> neighborhood,
                                              double time_scale);

/// Smallest eigenvalue and unit eigenvector of a symmetric 4x4 matrix.
/// Near-degenerate smallest eigenvalues (gap < 1e-12 * trace) resolve to the
/// lexicographically largest canonical vector in the eigenspace; the sign is
/// canonicalized so the first nonzero component is positive.
std::pair<double, Vec4> smallest_eigenvector(const SymMat4& m);

struct StNormalParams {
  double time_scale = 2.5;           // seconds -> meters (voxel / frame period)
  int k_min = 8;                     // minimum neighbor count
  double eigen_ratio_max = 0.25;     // lambda_min / lambda_2 above this: degenerate
  Vec3 view_origin = Vec3::Zero();   // spatial part is flipped toward this point
};

/// Tangent-hyperplane fit over neighbors plus the query point: the normal is
/// the smallest eigenvector of the scaled space-time covariance. Returns
/// nullopt when the neighborhood is degenerate (too few neighbors, or no
/// clear hyperplane by the eigenvalue ratio test). Callers are responsible
/// for ensuring the neighbors span at least two frames.
std::optional<SpatioTemporalNormal> estimate_st_normal(const StampedPoint& query,
                                                       std::span<const StampedPoint> neighbors,
                                                       const StNormalParams& params);

/// The temporal component a rigidly moving surface should exhibit,
/// -(spatial_normal . velocity), in unscaled time units.
double predicted_temporal_component(const Vec3& spatial_normal, const Vec3& velocity);

/// Angle between the 4D normal and its spatial projection (a,b,c,0).
/// Throws std::domain_error on the all-zero vector.
double temporal_angle(const SpatioTemporalNormal& n);

/// Unstable when degenerate or when the temporal angle exceeds theta_thr.
StabilityLabel classify_stability(const std::optional<SpatioTemporalNormal>& n,
                                  double theta_thr);

}  // namespace stlio
