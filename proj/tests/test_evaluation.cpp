#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "stlio/errors.hpp"
#include "stlio/evaluation.hpp"
#include "stlio/rng.hpp"
#include "stlio/so3.hpp"

using stlio::DataError;
using stlio::FinalLabel;
using stlio::Pose;
using stlio::Rng;
using stlio::Trajectory;
using stlio::Vec3;

namespace {

Trajectory random_trajectory(Rng& rng, int n, double dt) {
  Trajectory t;
  Pose p;
  for (int i = 0; i < n; ++i) {
    p.translation += Vec3(rng.uniform(0.2, 0.6), rng.uniform(-0.2, 0.2), rng.uniform(-0.05, 0.05));
    p.rotation = p.rotation * stlio::so3::exp_quat(Vec3(0, 0, rng.uniform(-0.05, 0.05)));
    t.samples.emplace_back(i * dt, p);
  }
  return t;
}

Pose random_rigid(Rng& rng) {
  Pose p;
  p.rotation = stlio::so3::exp_quat(
      Vec3(rng.gaussian(), rng.gaussian(), rng.gaussian()).normalized() * rng.uniform(0.1, 2.5));
  p.translation = Vec3(rng.uniform(-8, 8), rng.uniform(-8, 8), rng.uniform(-8, 8));
  return p;
}

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("association pairs identical timestamps completely") {
  Rng rng(701);
  const Trajectory a = random_trajectory(rng, 40, 0.1);
  const auto pairs = stlio::associate(a, a, 0.01);
  REQUIRE(pairs.size() == a.samples.size());
  for (const auto& p : pairs) CHECK(p.time_a == p.time_b);
}

TEST_CASE("association matches brute-force nearest within max_dt") {
  Rng rng(703);
  Trajectory a = random_trajectory(rng, 60, 0.1);
  Trajectory b = random_trajectory(rng, 60, 0.1);
  // Jitter b's timestamps within +/- 4 ms.
  for (auto& [t, pose] : b.samples) t += rng.uniform(-0.004, 0.004);

  const auto pairs = stlio::associate(a, b, 0.01);
  REQUIRE(!pairs.empty());
  for (const auto& p : pairs) {
    CHECK(std::abs(p.time_a - p.time_b) <= 0.01);
    // No b-sample is strictly closer than the chosen one.
    for (const auto& [t, pose] : b.samples)
      CHECK(std::abs(p.time_a - p.time_b) <= std::abs(p.time_a - t) + 1e-15);
  }
}

TEST_CASE("disjoint time ranges fail association") {
  Rng rng(707);
  Trajectory a = random_trajectory(rng, 10, 0.1);
  Trajectory b = random_trajectory(rng, 10, 0.1);
  for (auto& [t, pose] : b.samples) t += 100.0;
  CHECK_THROWS_AS(stlio::associate(a, b, 0.01), DataError);
  CHECK_THROWS_AS(stlio::associate(a, Trajectory{}, 0.01), DataError);
}

TEST_CASE("alignment recovers a random rigid transform exactly") {
  Rng rng(709);
  for (int it = 0; it < 100; ++it) {
    const Trajectory truth = random_trajectory(rng, 25, 0.1);
    const Pose offset = random_rigid(rng);
    Trajectory moved = truth;
    for (auto& [t, pose] : moved.samples) {
      pose.translation = offset * pose.translation;
      pose.rotation = offset.rotation * pose.rotation;
    }
    const auto pairs = stlio::associate(moved, truth, 0.01);
    const Pose align = stlio::umeyama_align(pairs);
    // Aligning the moved trajectory back onto truth leaves zero error.
    CHECK(stlio::ate_rmse(pairs, align) < 1e-9);
    // And the recovered transform is the inverse of the applied offset.
    const Pose recovered_offset = align.inverse();
    CHECK((recovered_offset.translation - offset.translation).norm() < 1e-9);
    CHECK(stlio::so3::log(recovered_offset.rotation.conjugate() * offset.rotation).norm() <
          1e-9);
  }
}

TEST_CASE("alignment agrees with the eigen umeyama reference") {
  Rng rng(719);
  for (int it = 0; it < 100; ++it) {
    Trajectory a = random_trajectory(rng, 30, 0.1);
    Trajectory b = random_trajectory(rng, 30, 0.1);
    const auto pairs = stlio::associate(a, b, 0.01);
    const Pose align = stlio::umeyama_align(pairs);

    std::vector<Vec3> from, to;
    for (const auto& p : pairs) {
      from.push_back(p.a.translation);
      to.push_back(p.b.translation);
    }
    const auto ref = oracle::eigen_umeyama(from, to);
    CHECK((align.rotation.toRotationMatrix() - ref.rotation).norm() < 1e-8);
    CHECK((align.translation - ref.translation).norm() < 1e-8);
  }
}

TEST_CASE("straight-line trajectories still align onto each other") {
  // Collinear positions leave a rotation DOF unconstrained; the alignment
  // must still be one of the optimal solutions instead of an error, because
  // corridor-style sequences produce exactly this geometry.
  Trajectory a, b;
  for (int i = 0; i < 10; ++i) {
    Pose pa, pb;
    pa.translation = Vec3(0.5 * i, 0, 0);
    pb.translation = Vec3(1.0, 2.0, 0.0) + 0.5 * i * Vec3(0, 1, 0);  // rotated + shifted line
    a.samples.emplace_back(0.1 * i, pa);
    b.samples.emplace_back(0.1 * i, pb);
  }
  const auto pairs = stlio::associate(a, b, 0.01);
  const Pose align = stlio::umeyama_align(pairs);
  CHECK(stlio::ate_rmse(pairs, align) < 1e-9);  // exact overlay is attainable

  // Too few samples to constrain anything at all is still an error.
  std::vector<stlio::PosePair> two(pairs.begin(), pairs.begin() + 2);
  CHECK_THROWS_AS(stlio::umeyama_align(two), DataError);
}

TEST_CASE("rmse is invariant under rigid remapping of the estimate") {
  Rng rng(727);
  const Trajectory truth = random_trajectory(rng, 40, 0.1);
  Trajectory estimate = truth;
  // Perturb the estimate so the error is nonzero.
  for (auto& [t, pose] : estimate.samples)
    pose.translation += Vec3(rng.gaussian(0, 0.05), rng.gaussian(0, 0.05), 0);
  const double base = stlio::aligned_ate_rmse(estimate, truth);

  const Pose offset = random_rigid(rng);
  for (auto& [t, pose] : estimate.samples) {
    pose.translation = offset * pose.translation;
    pose.rotation = offset.rotation * pose.rotation;
  }
  const double shifted = stlio::aligned_ate_rmse(estimate, truth);
  CHECK(shifted == doctest::Approx(base).epsilon(1e-9));
  CHECK(base > 0.0);
}

TEST_CASE("alternating offsets survive alignment with the expected rmse") {
  // A constant offset is absorbed by alignment; alternating +/-0.1 m across
  // the trajectory's lateral axis is not.
  Trajectory truth, estimate;
  for (int i = 0; i < 100; ++i) {
    Pose t;
    t.translation = Vec3(0.5 * i, 2.0 * std::sin(0.2 * i), 0.3 * std::cos(0.13 * i));
    truth.samples.emplace_back(0.1 * i, t);
    Pose e = t;
    e.translation.y() += (i % 2 == 0 ? 0.1 : -0.1);
    estimate.samples.emplace_back(0.1 * i, e);
  }
  const double rmse = stlio::aligned_ate_rmse(estimate, truth);
  CHECK(rmse == doctest::Approx(0.1).epsilon(0.05));
}

TEST_CASE("map scores match hand-computed recalls and the harmonic mean") {
  using L = FinalLabel;
  // Truth: 6 static, 4 dynamic. Prediction keeps 5 statics, flags 3 dynamics.
  const std::vector<L> truth = {L::Static, L::Static, L::Static, L::Static, L::Static,
                                L::Static, L::Dynamic, L::Dynamic, L::Dynamic, L::Dynamic};
  const std::vector<L> pred = {L::Static, L::Static, L::Static, L::Static, L::Static,
                               L::Dynamic, L::Dynamic, L::Dynamic, L::Dynamic, L::Static};
  const auto score = stlio::map_scores(pred, truth);
  REQUIRE(score.sa.has_value());
  REQUIRE(score.da.has_value());
  REQUIRE(score.ha.has_value());
  const double sa = 100.0 * 5 / 6, da = 100.0 * 3 / 4;
  CHECK(*score.sa == doctest::Approx(sa));
  CHECK(*score.da == doctest::Approx(da));
  CHECK(*score.ha == doctest::Approx(2 * sa * da / (sa + da)));
  CHECK(score.true_static == 5);
  CHECK(score.false_static == 1);
  CHECK(score.true_dynamic == 3);
  CHECK(score.false_dynamic == 1);
}

TEST_CASE("harmonic mean fixtures and bounds") {
  using L = FinalLabel;
  // SA = DA = 80 -> HA = 80.
  {
    std::vector<L> truth, pred;
    for (int i = 0; i < 5; ++i) {
      truth.push_back(L::Static);
      pred.push_back(i < 4 ? L::Static : L::Dynamic);
    }
    for (int i = 0; i < 5; ++i) {
      truth.push_back(L::Dynamic);
      pred.push_back(i < 4 ? L::Dynamic : L::Static);
    }
    const auto s = stlio::map_scores(pred, truth);
    CHECK(*s.ha == doctest::Approx(80.0));
  }
  // SA = 100, DA = 50 -> HA = 66.67 (within 0.01).
  {
    std::vector<L> truth = {L::Static, L::Static, L::Dynamic, L::Dynamic};
    std::vector<L> pred = {L::Static, L::Static, L::Dynamic, L::Static};
    const auto s = stlio::map_scores(pred, truth);
    CHECK(std::abs(*s.ha - 66.67) < 0.01);
  }
  // Random instances: min <= HA <= max, and swapping conventions swaps SA/DA.
  Rng rng(733);
  for (int it = 0; it < 200; ++it) {
    std::vector<L> truth, pred;
    const int n = 20 + static_cast<int>(rng.uniform_index(80));
    for (int i = 0; i < n; ++i) {
      truth.push_back(rng.uniform() < 0.5 ? L::Static : L::Dynamic);
      pred.push_back(rng.uniform() < 0.5 ? L::Static : L::Dynamic);
    }
    const auto s = stlio::map_scores(pred, truth);
    if (s.sa && s.da) {
      CHECK(*s.ha >= std::min(*s.sa, *s.da) - 1e-9);
      CHECK(*s.ha <= std::max(*s.sa, *s.da) + 1e-9);

      auto flip = [](std::vector<L> v) {
        for (auto& l : v) l = (l == L::Static ? L::Dynamic : L::Static);
        return v;
      };
      const auto swapped = stlio::map_scores(flip(pred), flip(truth));
      CHECK(*swapped.sa == doctest::Approx(*s.da));
      CHECK(*swapped.da == doctest::Approx(*s.sa));
    }
  }
}

TEST_CASE("single-class truth leaves the other recall absent") {
  using L = FinalLabel;
  const std::vector<L> truth(10, L::Static);
  const std::vector<L> pred(10, L::Static);
  const auto s = stlio::map_scores(pred, truth);
  CHECK(s.sa.has_value());
  CHECK_FALSE(s.da.has_value());
  CHECK_FALSE(s.ha.has_value());
  CHECK_THROWS_AS(stlio::map_scores(pred, std::vector<L>(9, L::Static)), std::invalid_argument);
}

}  // TEST_SUITE
