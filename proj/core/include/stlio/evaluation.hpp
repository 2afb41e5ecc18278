#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "stlio/geometry.hpp"
#include "stlio/scc.hpp"

namespace stlio {

struct Trajectory {
  std::vector<std::pair<double, Pose>> samples;  // strictly increasing times
};

struct MapScore {
  std::optional<double> sa;  // static recall, percent
  std::optional<double> da;  // dynamic recall, percent
  std::optional<double> ha;  // harmonic mean of the two
  std::uint64_t true_static = 0, false_static = 0;    // truth static: kept / lost
  std::uint64_t true_dynamic = 0, false_dynamic = 0;  // truth dynamic: kept / lost
};

struct PosePair {
  double time_a = 0.0, time_b = 0.0;
  Pose a, b;
};

/// Pairs every a-sample with the nearest-in-time b-sample within max_dt;
/// unpaired samples are dropped. Throws DataError when nothing pairs.
std::vector<PosePair> associate(const Trajectory& a, const Trajectory& b, double max_dt = 0.01);

/// Closed-form least-squares rigid alignment (rotation + translation, unit
/// scale) minimizing sum ||R p_a + t - p_b||^2. Needs at least 3 pairs.
/// Rank-deficient position sets (straight-line trajectories) yield one of
/// the equally optimal alignments rather than an error.
Pose umeyama_align(const std::vector<PosePair>& pairs);

/// RMS position error of the pairs after applying `alignment` to the
/// a-positions.
double ate_rmse(const std::vector<PosePair>& pairs, const Pose& alignment);

/// Associate + align + score in one step.
double aligned_ate_rmse(const Trajectory& estimate, const Trajectory& truth,
                        double max_dt = 0.01);

/// Recall of each class: SA over truth-static points, DA over truth-dynamic
/// points, HA their harmonic mean; a recall is absent when its truth class is
/// empty. Throws on length mismatch.
MapScore map_scores(const std::vector<FinalLabel>& predicted,
                    const std::vector<FinalLabel>& truth);

}  // namespace stlio
