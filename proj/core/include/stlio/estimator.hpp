#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "stlio/geometry.hpp"
#include "stlio/preprocessing.hpp"
#include "stlio/temporal_map.hpp"
#include "stlio/voxel_map.hpp"

namespace stlio {

/// How the registration treats moving-object evidence.
///   Full        — re-classify stability inside every iteration (joint solve)
///   Sequential  — classify once at the prior, then register with fixed labels
///   NoDynamic   — skip classification entirely (all points weigh in)
enum class DynamicMode { Full, Sequential, NoDynamic };

struct RegistrationConfig {
  int max_iter = 10;
  double epsilon = 1e-3;            // convergence: ||(dtheta, dt)||, rad+m mixed
  double theta_thr = 5.7 * kPi / 180.0;
  int k_neighbors = 20;
  double neighbor_max_dist = 1.0;   // cap on usable spatio-temporal neighbors, m
  double max_corr_dist = 0.5;       // plane correspondence gate, m
  double huber_delta = 0.1;         // m
  double sigma_lidar = 0.02;        // per-point measurement sigma, m
  // prior standard deviations, each per propagated second
  double prior_sigma_rot = 0.01;    // rad/s
  double prior_sigma_trans = 0.1;   // m/s
  double prior_sigma_vel = 0.1;     // (m/s)/s
  double prior_sigma_bias = 1e3;    // effectively unconstrained
  int min_stable_points = 50;
  double cache_tol = 0.05;          // m of motion before kNN caches invalidate
  bool sticky_unstable = false;     // once Unstable, never back to Stable
  double time_scale = 2.5;          // seconds -> spatial-equivalent units
  int k_min = 8;
  double eigen_ratio_max = 0.25;
  DynamicMode mode = DynamicMode::Full;
  int threads = 1;
};

struct CorrespondenceRecord {
  bool found = false;
  VoxelKey plane_key;
  double residual = 0.0;
};

struct RegistrationTiming {
  double normals_ms = 0.0;
  double correspondence_ms = 0.0;
  double solve_ms = 0.0;
  double total_ms = 0.0;
};

struct RegistrationResult {
  NavState state;
  std::vector<StabilityLabel> labels;              // aligned with the input cloud
  std::vector<CorrespondenceRecord> correspondences;
  int iterations = 0;
  bool converged = false;
  // robust cost (before, after) of every accepted damped step, in order
  std::vector<std::pair<double, double>> iteration_costs;
  RegistrationTiming timing;
};

/// Point-to-plane residual r = n . (R p_b + t - q) and its 1x6 jacobian over
/// the right perturbation (delta_theta, delta_t):
///   dr/dtheta = -n^T R [p_b]_x ,  dr/dt = n^T.
std::pair<double, Eigen::Matrix<double, 1, 6>> point_to_plane_residual_and_jacobian(
    const NavState& state, const Vec3& body_point, const PlaneVoxel& plane);

/// One damped normal-equation solve: (H + lambda I) delta = -g. Throws
/// DegeneracyError when the solve is non-finite.
Eigen::Matrix<double, 6, 1> solve_gauss_newton_step(const Eigen::Matrix<double, 6, 6>& h,
                                                    const Eigen::Matrix<double, 6, 1>& g,
                                                    double lambda);

/// Stability labels for a body-frame cloud transformed by `state`, exactly as
/// the registration's per-iteration classification computes them.
std::vector<StabilityLabel> classify_cloud(const std::vector<StampedPoint>& body_cloud,
                                           const NavState& state, const TemporalWindowMap& mt,
                                           const RegistrationConfig& cfg);

/// Dynamic-aware iterated registration: alternate per-point stability
/// classification against the spatio-temporal map with damped Gauss-Newton
/// point-to-plane alignment of the Stable subset against the plane map,
/// anchored by a quadratic prior on the propagated state. `prior_dt` is the
/// propagated duration that scales the prior weights. Throws DegeneracyError
/// when fewer than min_stable_points Stable points find correspondences.
RegistrationResult register_scan(const std::vector<StampedPoint>& body_cloud,
                                 const TemporalWindowMap& mt, const PlaneVoxelMap& mv,
                                 const NavState& prior, double prior_dt,
                                 const RegistrationConfig& cfg);

/// Bootstrap: inserts the first frames into both maps with every point
/// treated Stable. `clouds` are undistorted world-frame scans.
void initialize_maps(const std::vector<std::vector<StampedPoint>>& clouds,
                     const std::vector<double>& frame_times, TemporalWindowMap& mt,
                     PlaneVoxelMap& mv);

}  // namespace stlio
