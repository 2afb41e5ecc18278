#pragma once

#include <string>
#include <variant>
#include <vector>

#include "stlio/estimator.hpp"
#include "stlio/scc.hpp"
#include "stlio/simulator.hpp"
#include "stlio/temporal_map.hpp"
#include "stlio/voxel_map.hpp"

namespace stlio {

/// Every pipeline tunable, grouped by the module it feeds. Defaults here are
/// the library defaults; load_pipeline_config overlays a JSON file and the
/// CLI overlays flags on top of that.
struct PipelineConfig {
  // preprocessing
  double downsample_cell = 0.25;
  double max_imu_gap = 0.05;
  double gravity_z = -9.81;
  // temporal_map
  double mt_window = 2.0;
  // voxel_map
  double mv_voxel_size = 1.0;
  int mv_max_points_per_voxel = 50;
  int mv_plane_min_points = 6;
  double mv_plane_residual_max = 0.05;  // meters; squared into the fit bound
  double mv_plane_eigen_ratio_max = 0.25;
  double max_corr_dist = 0.5;
  // registration
  int max_iter = 10;
  double epsilon = 1e-3;
  double theta_thr_deg = 5.7;
  int k_neighbors = 20;
  double neighbor_max_dist = 1.0;
  double huber_delta = 0.1;
  double sigma_lidar = 0.02;
  double prior_sigma_rot = 0.01;
  double prior_sigma_trans = 0.1;
  double prior_sigma_vel = 0.1;
  double prior_sigma_bias = 1000.0;
  int min_stable_points = 50;
  double cache_tol = 0.05;
  bool sticky_unstable = false;
  double time_scale = 2.5;
  int k_min = 8;
  double eigen_ratio_max = 0.25;
  // scc
  double upsample_radius = 0.3;
  double dbscan_eps = 0.5;
  int dbscan_min_pts = 5;
  double max_box_volume = 60.0;
  double max_box_edge = 8.0;
  double overlap_thr = 0.3;
  double record_voxel_size = 0.5;
  double record_horizon = 10.0;
  double mark_radius = 30.0;  // M_scc is maintained only this close to the sensor
  // pipeline
  int n_bootstrap = 5;
  int threads = 1;
  std::string mode = "full";  // full | sequential | no-dynamic
};

using ConfigFieldPtr =
    std::variant<double PipelineConfig::*, int PipelineConfig::*, bool PipelineConfig::*,
                 std::string PipelineConfig::*>;

struct ConfigField {
  const char* group;
  const char* key;
  ConfigFieldPtr ptr;
};

/// The single source of truth for config keys: JSON loading, validation
/// messages, and CLI flag generation all iterate this registry.
const std::vector<ConfigField>& config_fields();

/// Parses a grouped JSON document; unknown groups or keys are rejected.
PipelineConfig pipeline_config_from_json(const std::string& text);
PipelineConfig load_pipeline_config(const std::string& path);
std::string pipeline_config_to_json(const PipelineConfig& config);

/// Range/consistency checks; throws ConfigError naming the offending key.
void validate(const PipelineConfig& config);

DynamicMode parse_mode(const std::string& mode);
RegistrationConfig to_registration_config(const PipelineConfig& config);
PlaneVoxelMap::Params to_plane_map_params(const PipelineConfig& config);
StaticVoxelRecord::Params to_record_params(const PipelineConfig& config);
SccConfig to_scc_config(const PipelineConfig& config);

/// Scene/sensor description for the simulator, JSON round-trippable.
SimConfig sim_config_from_json(const std::string& text);
SimConfig load_sim_config(const std::string& path);
std::string sim_config_to_json(const SimConfig& config);

}  // namespace stlio
