#include <doctest.h>

#include <Eigen/Core>

#include "oracles.hpp"
#include "stlio/rng.hpp"
#include "stlio/so3.hpp"

using Eigen::Matrix3d;
using Eigen::Vector3d;
namespace so3 = stlio::so3;

namespace {

Vector3d random_axis_angle(stlio::Rng& rng, double max_angle) {
  Vector3d w(rng.gaussian(), rng.gaussian(), rng.gaussian());
  if (w.norm() < 1e-12) w = Vector3d::UnitX();
  return w.normalized() * rng.uniform(0.0, max_angle);
}

/// Simpson quadrature of a matrix-valued function on [0, dt].
template <typename F>
Matrix3d simpson(F f, double dt, int n) {
  Matrix3d acc = Matrix3d::Zero();
  const double h = dt / n;
  for (int i = 0; i < n; ++i) {
    const double a = i * h;
    acc += (h / 6.0) * (f(a) + 4.0 * f(a + 0.5 * h) + f(a + h));
  }
  return acc;
}

}  // namespace

TEST_SUITE("so3") {

TEST_CASE("exp/log round trip") {
  stlio::Rng rng(42);
  for (int i = 0; i < 200; ++i) {
    const Vector3d w = random_axis_angle(rng, 3.0);
    CHECK((so3::log(so3::exp(w)) - w).norm() < 1e-9);
    CHECK((so3::log(so3::exp_quat(w)) - w).norm() < 1e-9);
  }
}

TEST_CASE("exp_quat matches matrix exponential") {
  stlio::Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    const Vector3d w = random_axis_angle(rng, 3.0);
    const Matrix3d rq = so3::exp_quat(w).toRotationMatrix();
    CHECK((rq - so3::exp(w)).norm() < 1e-12);
  }
}

TEST_CASE("left jacobian is the unit-interval integral of exp") {
  stlio::Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    const Vector3d w = random_axis_angle(rng, 2.5);
    const Matrix3d numeric = simpson([&](double s) { return so3::exp(w * s); }, 1.0, 400);
    CHECK((so3::left_jacobian(w) - numeric).norm() < 1e-9);
  }
}

TEST_CASE("integral_exp matches quadrature, including tiny rates") {
  stlio::Rng rng(13);
  for (int i = 0; i < 50; ++i) {
    const double dt = rng.uniform(1e-4, 0.5);
    Vector3d w = random_axis_angle(rng, 4.0);
    if (i % 7 == 0) w *= 1e-8;  // exercise the small-angle branch
    const Matrix3d numeric = simpson([&](double s) { return so3::exp(w * s); }, dt, 400);
    CHECK((so3::integral_exp(w, dt) - numeric).norm() < 1e-9);
  }
}

TEST_CASE("double_integral_exp matches nested quadrature") {
  stlio::Rng rng(17);
  for (int i = 0; i < 25; ++i) {
    const double dt = rng.uniform(1e-3, 0.4);
    Vector3d w = random_axis_angle(rng, 4.0);
    if (i % 5 == 0) w *= 1e-8;
    const Matrix3d numeric =
        simpson([&](double s) { return so3::integral_exp(w, s); }, dt, 200);
    CHECK((so3::double_integral_exp(w, dt) - numeric).norm() < 1e-8);
  }
}

TEST_CASE("right jacobian inverse linearizes the right perturbation") {
  // Log(Exp(w) Exp(dw)) ~= w + Jr(w)^-1 dw for small dw.
  stlio::Rng rng(19);
  for (int i = 0; i < 100; ++i) {
    const Vector3d w = random_axis_angle(rng, 2.0);
    const Vector3d dw = random_axis_angle(rng, 1e-6);
    const Vector3d lhs = so3::log(so3::exp(w) * so3::exp(dw));
    const Vector3d rhs = w + so3::right_jacobian_inv(w) * dw;
    CHECK((lhs - rhs).norm() < 1e-9);
  }
}

TEST_CASE("hat is antisymmetric and reproduces the cross product") {
  stlio::Rng rng(23);
  for (int i = 0; i < 50; ++i) {
    const Vector3d a(rng.gaussian(), rng.gaussian(), rng.gaussian());
    const Vector3d b(rng.gaussian(), rng.gaussian(), rng.gaussian());
    const Matrix3d h = so3::hat(a);
    CHECK((h + h.transpose()).norm() == doctest::Approx(0.0));
    CHECK((h * b - a.cross(b)).norm() < 1e-14);
  }
}

}  // TEST_SUITE
