#pragma once

#include <string>

#include "stlio/config.hpp"
#include "stlio/dataset_io.hpp"

namespace stlio {

struct OdometryStats {
  int frames = 0;
  int registered = 0;  // frames past bootstrap
  int degenerate = 0;  // registered frames that fell back to the IMU prior
  double mean_total_ms = 0.0;
};

/// Full odometry run: bootstrap, per-frame propagate/undistort/downsample,
/// dynamic-aware registration, spatial-consistency refinement, map upkeep.
/// Writes trajectory_tum.txt, map.txt, and diagnostics.jsonl under out_dir.
OdometryStats run_odometry(const Dataset& dataset, const PipelineConfig& config,
                           const std::string& out_dir);

struct EvalOptions {
  std::string estimate_trajectory;
  std::string truth_trajectory;
  std::string predicted_map;   // optional: empty skips map scoring
  std::string dataset_dir;     // needed with predicted_map (truth labels)
  std::string diagnostics;     // optional: timing percentiles + series
  std::string out_dir;
  int skip_frames = 0;         // warm-up frames excluded from map scoring
  double max_dt = 0.01;
};

/// Metric assembly: aligned trajectory error, map recall scores, timing
/// percentiles. Writes metrics.json and series.csv under out_dir and returns
/// the metrics document.
std::string run_evaluation(const EvalOptions& options);

}  // namespace stlio
