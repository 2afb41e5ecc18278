#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>

namespace stlio::so3 {

inline Eigen::Matrix3d hat(const Eigen::Vector3d& w) {
  Eigen::Matrix3d m;
  m << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
  return m;
}

/// Rodrigues exponential, axis-angle vector to rotation matrix.
inline Eigen::Matrix3d exp(const Eigen::Vector3d& w) {
  const double theta2 = w.squaredNorm();
  if (theta2 < 1e-16) {
    const Eigen::Matrix3d W = hat(w);
    return Eigen::Matrix3d::Identity() + W + 0.5 * W * W;
  }
  const double theta = std::sqrt(theta2);
  const Eigen::Matrix3d W = hat(w / theta);
  return Eigen::Matrix3d::Identity() + std::sin(theta) * W +
         (1.0 - std::cos(theta)) * W * W;
}

inline Eigen::Quaterniond exp_quat(const Eigen::Vector3d& w) {
  const double theta = w.norm();
  if (theta < 1e-12) {
    Eigen::Quaterniond q(1.0, 0.5 * w.x(), 0.5 * w.y(), 0.5 * w.z());
    q.normalize();
    return q;
  }
  const Eigen::Vector3d axis = w / theta;
  return Eigen::Quaterniond(Eigen::AngleAxisd(theta, axis));
}

inline Eigen::Vector3d log(const Eigen::Matrix3d& R) {
  const Eigen::AngleAxisd aa(R);
  return aa.angle() * aa.axis();
}

inline Eigen::Vector3d log(const Eigen::Quaterniond& q) {
  Eigen::Quaterniond qn = q.normalized();
  if (qn.w() < 0.0) qn.coeffs() = -qn.coeffs();
  const double vn = qn.vec().norm();
  if (vn < 1e-12) return 2.0 * qn.vec();
  return 2.0 * std::atan2(vn, qn.w()) * qn.vec() / vn;
}

/// Left Jacobian of SO(3): Jl(w) = sum w^ n / (n+1)!  so that
/// integral_0^1 exp(w s) ds = Jl(w).
inline Eigen::Matrix3d left_jacobian(const Eigen::Vector3d& w) {
  const double theta2 = w.squaredNorm();
  const Eigen::Matrix3d W = hat(w);
  if (theta2 < 1e-12) {
    return Eigen::Matrix3d::Identity() + 0.5 * W + (1.0 / 6.0) * W * W;
  }
  const double theta = std::sqrt(theta2);
  return Eigen::Matrix3d::Identity() +
         ((1.0 - std::cos(theta)) / theta2) * W +
         ((theta - std::sin(theta)) / (theta2 * theta)) * W * W;
}

/// Inverse of the right Jacobian, used to linearize Log(R_ref^-1 R Exp(dw)).
inline Eigen::Matrix3d right_jacobian_inv(const Eigen::Vector3d& w) {
  const double theta2 = w.squaredNorm();
  const Eigen::Matrix3d W = hat(w);
  if (theta2 < 1e-12) {
    return Eigen::Matrix3d::Identity() + 0.5 * W + (1.0 / 12.0) * W * W;
  }
  const double theta = std::sqrt(theta2);
  const double c = 1.0 / theta2 - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  return Eigen::Matrix3d::Identity() + 0.5 * W + c * W * W;
}

/// integral_0^dt exp(w^ s) ds for a constant body rate w (rad/s).
inline Eigen::Matrix3d integral_exp(const Eigen::Vector3d& w, double dt) {
  return dt * left_jacobian(w * dt);
}

/// double integral_0^dt integral_0^s exp(w^ s') ds' ds for constant w.
inline Eigen::Matrix3d double_integral_exp(const Eigen::Vector3d& w, double dt) {
  const double n2 = w.squaredNorm();
  const Eigen::Matrix3d W = hat(w);
  if (n2 * dt * dt < 1e-12) {
    return (dt * dt / 2.0) * Eigen::Matrix3d::Identity() +
           (dt * dt * dt / 6.0) * W + (dt * dt * dt * dt / 24.0) * W * W;
  }
  const double n = std::sqrt(n2);
  const double theta = n * dt;
  const double a = dt / n2 - std::sin(theta) / (n2 * n);
  const double b = dt * dt / (2.0 * n2) + (std::cos(theta) - 1.0) / (n2 * n2);
  return (dt * dt / 2.0) * Eigen::Matrix3d::Identity() + a * W + b * W * W;
}

}  // namespace stlio::so3
