#include <doctest.h>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <optional>
#include <vector>

#include "oracles.hpp"
#include "stlio/geometry.hpp"
#include "stlio/rng.hpp"

using stlio::kPi;
using stlio::Rng;
using stlio::SpatioTemporalNormal;
using stlio::StabilityLabel;
using stlio::StampedPoint;
using stlio::StNormalParams;
using stlio::SymMat4;
using stlio::Vec3;
using stlio::Vec4;

namespace {

std::vector<StampedPoint> random_neighborhood(Rng& rng, int n) {
  std::vector<StampedPoint> pts(n);
  for (auto& p : pts) {
    p.position = Vec3(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5));
    p.time = rng.uniform(0, 2);
  }
  return pts;
}

/// Patch of a plane with unit normal `n` through the origin at t=0, the whole
/// surface translating at `v`, sampled over several frames with small
/// out-of-plane jitter.
std::vector<StampedPoint> moving_plane_patch(Rng& rng, const Vec3& n, const Vec3& v,
                                             int frames, int per_frame, double jitter) {
  // Build an in-plane basis.
  const Vec3 u1 = (std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY()).cross(n).normalized();
  const Vec3 u2 = n.cross(u1);
  std::vector<StampedPoint> pts;
  for (int f = 0; f < frames; ++f) {
    const double t = 0.1 * f;
    for (int i = 0; i < per_frame; ++i) {
      const Vec3 base = rng.uniform(-0.5, 0.5) * u1 + rng.uniform(-0.5, 0.5) * u2 +
                        rng.gaussian(0.0, jitter) * n;
      pts.push_back({base + v * t, t});
    }
  }
  return pts;
}

}  // namespace

TEST_SUITE("spacetime_normals") {

TEST_CASE("covariance matches the naive accumulation") {
  Rng rng(101);
  for (int it = 0; it < 300; ++it) {
    const int n = 2 + static_cast<int>(rng.uniform_index(40));
    const double scale = rng.uniform(0.5, 5.0);
    const auto pts = random_neighborhood(rng, n);
    const auto [cov, mean] = stlio::spacetime_covariance(pts, scale);
    const auto [cov_ref, mean_ref] = oracle::spacetime_covariance(pts, scale);
    const Eigen::Matrix4d m = cov.to_matrix();
    CHECK((mean - mean_ref).norm() < 1e-10 * (1.0 + mean_ref.norm()));
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c)
        CHECK(std::abs(m(r, c) - cov_ref(r, c)) <= 1e-10 * (1.0 + std::abs(cov_ref(r, c))));
  }
}

TEST_CASE("covariance rejects neighborhoods below two points") {
  CHECK_THROWS_AS(stlio::spacetime_covariance(std::vector<StampedPoint>{}, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(stlio::spacetime_covariance(std::vector<StampedPoint>{{}}, 1.0),
                  std::invalid_argument);
}

TEST_CASE("smallest eigenvector agrees with a Jacobi reference") {
  Rng rng(103);
  for (int it = 0; it < 300; ++it) {
    Eigen::Matrix4d a;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) a(r, c) = rng.gaussian(0.0, 2.0);
    const Eigen::Matrix4d sym = 0.5 * (a + a.transpose());
    const SymMat4 m = SymMat4::from_matrix(sym);
    const auto [lambda, v] = stlio::smallest_eigenvector(m);
    const auto [vals_ref, vecs_ref] = oracle::jacobi_eigen4(sym);

    CHECK(lambda == doctest::Approx(vals_ref[0]).epsilon(1e-8));
    // Eigen residual bound (the contract, robust to eigenvalue multiplicity).
    CHECK((sym * v - lambda * v).norm() <= 1e-8 * (1.0 + sym.norm()));
    CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-12));
    // Sign canonicalization: first nonzero component positive.
    for (int i = 0; i < 4; ++i) {
      if (std::abs(v[i]) > 1e-12) {
        CHECK(v[i] > 0.0);
        break;
      }
    }
  }
}

TEST_CASE("sym4 round trip and trace") {
  Eigen::Matrix4d a;
  a << 1, 2, 3, 4, 2, 5, 6, 7, 3, 6, 8, 9, 4, 7, 9, 10;
  const SymMat4 m = SymMat4::from_matrix(a);
  CHECK((m.to_matrix() - a).norm() == doctest::Approx(0.0));
  CHECK(m.trace() == doctest::Approx(24.0));
  CHECK(m.at(2, 1) == doctest::Approx(6.0));
}

TEST_CASE("moving plane: temporal slope equals the velocity projection over time_scale") {
  Rng rng(107);
  const Vec3 n_true = Vec3(0.2, -0.3, 1.0).normalized();
  const Vec3 v(0.4, 0.1, -0.6);  // oblique to the normal
  for (double scale : {1.0, 2.5}) {
    auto pts = moving_plane_patch(rng, n_true, v, 5, 30, 0.0);
    const StampedPoint query = pts.back();
    pts.pop_back();
    StNormalParams params;
    params.time_scale = scale;
    params.view_origin = query.position + 3.0 * n_true;  // orient toward +n
    const auto est = stlio::estimate_st_normal(query, pts, params);
    REQUIRE(est.has_value());
    const Vec3 n_est = est->spatial().normalized();
    const double slope = est->d / est->spatial().norm();
    // Exact data: the fitted hyperplane satisfies slope = -(n.v)/time_scale.
    CHECK(std::abs(slope + n_est.dot(v) / scale) < 1e-9);
    CHECK(std::abs(slope + n_true.dot(v) / scale) < 1e-9);
    CHECK(est->norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("static plane: temporal angle is zero and classification is Stable") {
  Rng rng(109);
  const Vec3 n_true = Vec3(0.1, 0.9, 0.2).normalized();
  auto pts = moving_plane_patch(rng, n_true, Vec3::Zero(), 5, 25, 1e-4);
  const StampedPoint query = pts.back();
  pts.pop_back();
  StNormalParams params;
  params.view_origin = query.position + 2.0 * n_true;
  const auto est = stlio::estimate_st_normal(query, pts, params);
  REQUIRE(est.has_value());
  CHECK(stlio::temporal_angle(*est) < 1.0 * kPi / 180.0);
  CHECK(stlio::classify_stability(est, 5.7 * kPi / 180.0) == StabilityLabel::Stable);
  // Orientation followed the view point.
  CHECK(est->spatial().dot(n_true) > 0.0);
}

TEST_CASE("degenerate neighborhoods return nothing and classify Unstable") {
  Rng rng(113);
  StNormalParams params;

  // Too few neighbors.
  auto few = random_neighborhood(rng, params.k_min - 1);
  const StampedPoint q{Vec3::Zero(), 0.0};
  CHECK_FALSE(stlio::estimate_st_normal(q, few, params).has_value());

  // Collinear points: no clear hyperplane.
  std::vector<StampedPoint> line;
  for (int i = 0; i < 20; ++i) line.push_back({Vec3(0.05 * i, 0, 0), 0.0});
  CHECK_FALSE(stlio::estimate_st_normal(line.back(), line, params).has_value());

  CHECK(stlio::classify_stability(std::nullopt, 0.1) == StabilityLabel::Unstable);
}

TEST_CASE("volumetric (non-planar) neighborhoods fail the eigenvalue ratio test") {
  Rng rng(127);
  // Spatially volumetric clutter observed across the whole window: thin in no
  // direction of space-time, so no hyperplane direction clearly dominates.
  std::vector<StampedPoint> blob;
  for (int i = 0; i < 60; ++i)
    blob.push_back({Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)),
                    rng.uniform(0.0, 2.0)});
  StNormalParams params;
  CHECK_FALSE(stlio::estimate_st_normal(blob.back(), blob, params).has_value());

  // The same clutter glimpsed in a time sliver IS a thin 4D slab along scaled
  // time; the fit succeeds but the normal is almost purely temporal, so the
  // stability classifier still rejects the point.
  std::vector<StampedPoint> sliver = blob;
  for (auto& p : sliver) p.time = rng.uniform(0.0, 0.1);
  const auto fit = stlio::estimate_st_normal(sliver.back(), sliver, params);
  REQUIRE(fit.has_value());
  CHECK(stlio::temporal_angle(*fit) > 1.0);  // radians, far past any threshold
  CHECK(stlio::classify_stability(fit, 5.7 * stlio::kPi / 180.0) ==
        StabilityLabel::Unstable);
}

TEST_CASE("rotation invariance: spatial part rotates, d and angle unchanged") {
  Rng rng(131);
  for (int it = 0; it < 30; ++it) {
    const Vec3 n_true = Vec3(rng.gaussian(), rng.gaussian(), rng.gaussian()).normalized();
    const Vec3 v(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    auto pts = moving_plane_patch(rng, n_true, v, 4, 25, 1e-4);
    const StampedPoint query = pts.back();
    pts.pop_back();
    StNormalParams params;
    params.view_origin = query.position + 2.0 * n_true;

    const auto base = stlio::estimate_st_normal(query, pts, params);
    REQUIRE(base.has_value());

    const Eigen::Quaterniond rot =
        Eigen::Quaterniond(Eigen::AngleAxisd(rng.uniform(0.1, 3.0),
                                             Vec3(rng.gaussian(), rng.gaussian(), rng.gaussian())
                                                 .normalized()));
    std::vector<StampedPoint> rotated;
    for (const auto& p : pts) rotated.push_back({rot * p.position, p.time});
    StNormalParams rparams = params;
    rparams.view_origin = rot * params.view_origin;
    const StampedPoint rquery{rot * query.position, query.time};
    const auto turned = stlio::estimate_st_normal(rquery, rotated, rparams);
    REQUIRE(turned.has_value());

    CHECK((turned->spatial() - rot * base->spatial()).norm() < 1e-9);
    CHECK(std::abs(turned->d - base->d) < 1e-9);
    CHECK(std::abs(stlio::temporal_angle(*turned) - stlio::temporal_angle(*base)) < 1e-9);
  }
}

TEST_CASE("temporal angle and threshold conventions") {
  CHECK(stlio::temporal_angle({1, 0, 0, 0}) == doctest::Approx(0.0));
  CHECK(stlio::temporal_angle({0, 0, 0, 1}) == doctest::Approx(kPi / 2));
  CHECK(stlio::temporal_angle({1, 0, 0, -1}) == doctest::Approx(kPi / 4));
  CHECK_THROWS_AS(stlio::temporal_angle({0, 0, 0, 0}), std::domain_error);

  // theta_thr = 5.7 degrees corresponds to |d| ~= 0.1 on a unit normal.
  const double thr = 5.7 * kPi / 180.0;
  SpatioTemporalNormal just_under{0.0, 0.0, 1.0, 0.0995};
  SpatioTemporalNormal just_over{0.0, 0.0, 1.0, 0.1005};
  CHECK(stlio::classify_stability(just_under, thr) == StabilityLabel::Stable);
  CHECK(stlio::classify_stability(just_over, thr) == StabilityLabel::Unstable);
}

TEST_CASE("predicted temporal component is minus the normal-velocity projection") {
  CHECK(stlio::predicted_temporal_component(Vec3::UnitX(), Vec3(2, 0, 0)) ==
        doctest::Approx(-2.0));
  CHECK(stlio::predicted_temporal_component(Vec3::UnitX(), Vec3(0, 5, 0)) ==
        doctest::Approx(0.0));
  CHECK(stlio::predicted_temporal_component(Vec3(0, 0, 1), Vec3(1, 2, -3)) ==
        doctest::Approx(3.0));
}

}  // TEST_SUITE
