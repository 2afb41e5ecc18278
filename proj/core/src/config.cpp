#include "stlio/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <sstream>

#include "stlio/errors.hpp"

namespace stlio {

using nlohmann::json;

const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = {
      {"preprocessing", "downsample_cell", &PipelineConfig::downsample_cell},
      {"preprocessing", "max_imu_gap", &PipelineConfig::max_imu_gap},
      {"preprocessing", "gravity_z", &PipelineConfig::gravity_z},
      {"temporal_map", "window", &PipelineConfig::mt_window},
      {"voxel_map", "voxel_size", &PipelineConfig::mv_voxel_size},
      {"voxel_map", "max_points_per_voxel", &PipelineConfig::mv_max_points_per_voxel},
      {"voxel_map", "plane_min_points", &PipelineConfig::mv_plane_min_points},
      {"voxel_map", "plane_residual_max", &PipelineConfig::mv_plane_residual_max},
      {"voxel_map", "plane_eigen_ratio_max", &PipelineConfig::mv_plane_eigen_ratio_max},
      {"voxel_map", "max_corr_dist", &PipelineConfig::max_corr_dist},
      {"registration", "max_iter", &PipelineConfig::max_iter},
      {"registration", "epsilon", &PipelineConfig::epsilon},
      {"registration", "theta_thr_deg", &PipelineConfig::theta_thr_deg},
      {"registration", "k_neighbors", &PipelineConfig::k_neighbors},
      {"registration", "neighbor_max_dist", &PipelineConfig::neighbor_max_dist},
      {"registration", "huber_delta", &PipelineConfig::huber_delta},
      {"registration", "sigma_lidar", &PipelineConfig::sigma_lidar},
      {"registration", "prior_sigma_rot", &PipelineConfig::prior_sigma_rot},
      {"registration", "prior_sigma_trans", &PipelineConfig::prior_sigma_trans},
      {"registration", "prior_sigma_vel", &PipelineConfig::prior_sigma_vel},
      {"registration", "prior_sigma_bias", &PipelineConfig::prior_sigma_bias},
      {"registration", "min_stable_points", &PipelineConfig::min_stable_points},
      {"registration", "cache_tol", &PipelineConfig::cache_tol},
      {"registration", "sticky_unstable", &PipelineConfig::sticky_unstable},
      {"registration", "time_scale", &PipelineConfig::time_scale},
      {"registration", "k_min", &PipelineConfig::k_min},
      {"registration", "eigen_ratio_max", &PipelineConfig::eigen_ratio_max},
      {"scc", "upsample_radius", &PipelineConfig::upsample_radius},
      {"scc", "dbscan_eps", &PipelineConfig::dbscan_eps},
      {"scc", "dbscan_min_pts", &PipelineConfig::dbscan_min_pts},
      {"scc", "max_box_volume", &PipelineConfig::max_box_volume},
      {"scc", "max_box_edge", &PipelineConfig::max_box_edge},
      {"scc", "overlap_thr", &PipelineConfig::overlap_thr},
      {"scc", "record_voxel_size", &PipelineConfig::record_voxel_size},
      {"scc", "record_horizon", &PipelineConfig::record_horizon},
      {"scc", "mark_radius", &PipelineConfig::mark_radius},
      {"pipeline", "n_bootstrap", &PipelineConfig::n_bootstrap},
      {"pipeline", "threads", &PipelineConfig::threads},
      {"pipeline", "mode", &PipelineConfig::mode},
  };
  return fields;
}

namespace {

void assign_field(PipelineConfig& config, const ConfigField& field, const json& value,
                  const std::string& where) {
  try {
    std::visit(
        [&](auto ptr) {
          using T = std::remove_reference_t<decltype(config.*ptr)>;
          if constexpr (std::is_same_v<T, bool>) {
            if (!value.is_boolean()) throw ConfigError(where + ": expected a boolean");
          } else if constexpr (std::is_same_v<T, std::string>) {
            if (!value.is_string()) throw ConfigError(where + ": expected a string");
          } else if constexpr (std::is_same_v<T, int>) {
            if (!value.is_number_integer()) throw ConfigError(where + ": expected an integer");
          } else {
            if (!value.is_number()) throw ConfigError(where + ": expected a number");
          }
          config.*ptr = value.get<T>();
        },
        field.ptr);
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

}  // namespace

PipelineConfig pipeline_config_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse failure: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config root must be an object");

  PipelineConfig config;
  const auto& fields = config_fields();
  for (const auto& [group_name, group] : doc.items()) {
    if (!group.is_object()) {
      throw ConfigError("config group '" + group_name + "' must be an object");
    }
    const bool known_group =
        std::any_of(fields.begin(), fields.end(),
                    [&](const ConfigField& f) { return group_name == f.group; });
    if (!known_group) throw ConfigError("unknown config group '" + group_name + "'");
    for (const auto& [key, value] : group.items()) {
      const auto it = std::find_if(fields.begin(), fields.end(), [&](const ConfigField& f) {
        return group_name == f.group && key == f.key;
      });
      if (it == fields.end()) {
        throw ConfigError("unknown config key '" + group_name + "." + key + "'");
      }
      assign_field(config, *it, value, group_name + "." + key);
    }
  }
  validate(config);
  return config;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return pipeline_config_from_json(buf.str());
}

std::string pipeline_config_to_json(const PipelineConfig& config) {
  json doc;
  for (const auto& field : config_fields()) {
    std::visit([&](auto ptr) { doc[field.group][field.key] = config.*ptr; }, field.ptr);
  }
  return doc.dump(2) + "\n";
}

void validate(const PipelineConfig& c) {
  const auto positive = [](double v, const char* key) {
    if (!(v > 0.0)) throw ConfigError(std::string(key) + " must be positive");
  };
  positive(c.downsample_cell, "preprocessing.downsample_cell");
  positive(c.max_imu_gap, "preprocessing.max_imu_gap");
  positive(c.mt_window, "temporal_map.window");
  positive(c.mv_voxel_size, "voxel_map.voxel_size");
  positive(c.mv_plane_residual_max, "voxel_map.plane_residual_max");
  positive(c.mv_plane_eigen_ratio_max, "voxel_map.plane_eigen_ratio_max");
  positive(c.max_corr_dist, "voxel_map.max_corr_dist");
  positive(c.epsilon, "registration.epsilon");
  positive(c.neighbor_max_dist, "registration.neighbor_max_dist");
  positive(c.huber_delta, "registration.huber_delta");
  positive(c.sigma_lidar, "registration.sigma_lidar");
  positive(c.prior_sigma_rot, "registration.prior_sigma_rot");
  positive(c.prior_sigma_trans, "registration.prior_sigma_trans");
  positive(c.prior_sigma_vel, "registration.prior_sigma_vel");
  positive(c.prior_sigma_bias, "registration.prior_sigma_bias");
  positive(c.cache_tol, "registration.cache_tol");
  positive(c.time_scale, "registration.time_scale");
  positive(c.eigen_ratio_max, "registration.eigen_ratio_max");
  positive(c.upsample_radius, "scc.upsample_radius");
  positive(c.dbscan_eps, "scc.dbscan_eps");
  positive(c.max_box_volume, "scc.max_box_volume");
  positive(c.max_box_edge, "scc.max_box_edge");
  positive(c.record_voxel_size, "scc.record_voxel_size");
  positive(c.record_horizon, "scc.record_horizon");
  positive(c.mark_radius, "scc.mark_radius");
  if (c.mv_max_points_per_voxel < 3) {
    throw ConfigError("voxel_map.max_points_per_voxel must be >= 3");
  }
  if (c.mv_plane_min_points < 3) throw ConfigError("voxel_map.plane_min_points must be >= 3");
  if (c.max_iter < 1) throw ConfigError("registration.max_iter must be >= 1");
  if (c.k_neighbors < 1) throw ConfigError("registration.k_neighbors must be >= 1");
  if (c.k_min < 2) throw ConfigError("registration.k_min must be >= 2");
  if (c.min_stable_points < 1) throw ConfigError("registration.min_stable_points must be >= 1");
  if (!(c.theta_thr_deg > 0.0 && c.theta_thr_deg < 90.0)) {
    throw ConfigError("registration.theta_thr_deg must lie in (0, 90)");
  }
  if (c.dbscan_min_pts < 1) throw ConfigError("scc.dbscan_min_pts must be >= 1");
  if (!(c.overlap_thr > 0.0 && c.overlap_thr < 1.0)) {
    throw ConfigError("scc.overlap_thr must lie in (0, 1)");
  }
  if (c.n_bootstrap < 1) throw ConfigError("pipeline.n_bootstrap must be >= 1");
  if (c.threads < 1) throw ConfigError("pipeline.threads must be >= 1");
  parse_mode(c.mode);
}

DynamicMode parse_mode(const std::string& mode) {
  if (mode == "full") return DynamicMode::Full;
  if (mode == "sequential") return DynamicMode::Sequential;
  if (mode == "no-dynamic") return DynamicMode::NoDynamic;
  throw ConfigError("pipeline.mode must be one of full/sequential/no-dynamic, got '" + mode +
                    "'");
}

RegistrationConfig to_registration_config(const PipelineConfig& c) {
  RegistrationConfig r;
  r.max_iter = c.max_iter;
  r.epsilon = c.epsilon;
  r.theta_thr = c.theta_thr_deg * kPi / 180.0;
  r.k_neighbors = c.k_neighbors;
  r.neighbor_max_dist = c.neighbor_max_dist;
  r.max_corr_dist = c.max_corr_dist;
  r.huber_delta = c.huber_delta;
  r.sigma_lidar = c.sigma_lidar;
  r.prior_sigma_rot = c.prior_sigma_rot;
  r.prior_sigma_trans = c.prior_sigma_trans;
  r.prior_sigma_vel = c.prior_sigma_vel;
  r.prior_sigma_bias = c.prior_sigma_bias;
  r.min_stable_points = c.min_stable_points;
  r.cache_tol = c.cache_tol;
  r.sticky_unstable = c.sticky_unstable;
  r.time_scale = c.time_scale;
  r.k_min = c.k_min;
  r.eigen_ratio_max = c.eigen_ratio_max;
  r.mode = parse_mode(c.mode);
  r.threads = c.threads;
  return r;
}

PlaneVoxelMap::Params to_plane_map_params(const PipelineConfig& c) {
  PlaneVoxelMap::Params p;
  p.voxel_size = c.mv_voxel_size;
  p.max_points_per_voxel = c.mv_max_points_per_voxel;
  p.max_corr_dist = c.max_corr_dist;
  p.fit.min_points = c.mv_plane_min_points;
  p.fit.plane_eps = c.mv_plane_residual_max * c.mv_plane_residual_max;
  p.fit.plane_ratio = c.mv_plane_eigen_ratio_max;
  return p;
}

StaticVoxelRecord::Params to_record_params(const PipelineConfig& c) {
  return {c.record_voxel_size, c.record_horizon};
}

SccConfig to_scc_config(const PipelineConfig& c) {
  SccConfig s;
  s.upsample_radius = c.upsample_radius;
  s.dbscan_eps = c.dbscan_eps;
  s.dbscan_min_pts = c.dbscan_min_pts;
  s.max_box_volume = c.max_box_volume;
  s.max_box_edge = c.max_box_edge;
  s.overlap_thr = c.overlap_thr;
  return s;
}

namespace {

Vec3 vec3_from(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(where + ": expected [x, y, z]");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json vec3_to(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Pose pose_from(const json& j, const std::string& where) {
  Pose p;
  for (const auto& [key, value] : j.items()) {
    if (key == "position") {
      p.translation = vec3_from(value, where + ".position");
    } else if (key == "rpy_deg") {
      const Vec3 rpy = vec3_from(value, where + ".rpy_deg") * (kPi / 180.0);
      p.rotation = Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) *
                   Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
                   Eigen::AngleAxisd(rpy.x(), Vec3::UnitX());
    } else if (key == "quat_xyzw") {
      if (!value.is_array() || value.size() != 4) {
        throw ConfigError(where + ".quat_xyzw: expected [x, y, z, w]");
      }
      p.rotation = Eigen::Quaterniond(value[3].get<double>(), value[0].get<double>(),
                                      value[1].get<double>(), value[2].get<double>())
                       .normalized();
    } else {
      throw ConfigError(where + ": unknown pose key '" + key + "'");
    }
  }
  return p;
}

json pose_to(const Pose& p) {
  json j;
  j["position"] = vec3_to(p.translation);
  j["quat_xyzw"] = json::array(
      {p.rotation.x(), p.rotation.y(), p.rotation.z(), p.rotation.w()});
  return j;
}

Primitive primitive_from(const json& j, const std::string& where) {
  const std::string type = j.value("type", "");
  if (type == "box") {
    BoxPrimitive box;
    box.half_extents = vec3_from(j.at("half_extents"), where + ".half_extents");
    if (j.contains("pose")) box.pose = pose_from(j.at("pose"), where + ".pose");
    for (const auto& [key, value] : j.items()) {
      if (key != "type" && key != "half_extents" && key != "pose") {
        throw ConfigError(where + ": unknown box key '" + key + "'");
      }
    }
    return box;
  }
  if (type == "plane") {
    PlanePrimitive plane;
    if (j.contains("half_extents")) {
      const auto& he = j.at("half_extents");
      if (!he.is_array() || he.size() != 2) {
        throw ConfigError(where + ".half_extents: expected [hx, hy]");
      }
      plane.hx = he[0].is_null() ? std::numeric_limits<double>::infinity()
                                 : he[0].get<double>();
      plane.hy = he[1].is_null() ? std::numeric_limits<double>::infinity()
                                 : he[1].get<double>();
    }
    if (j.contains("pose")) plane.pose = pose_from(j.at("pose"), where + ".pose");
    for (const auto& [key, value] : j.items()) {
      if (key != "type" && key != "half_extents" && key != "pose") {
        throw ConfigError(where + ": unknown plane key '" + key + "'");
      }
    }
    return plane;
  }
  throw ConfigError(where + ": primitive type must be 'box' or 'plane'");
}

json primitive_to(const Primitive& prim) {
  json j;
  if (const auto* box = std::get_if<BoxPrimitive>(&prim)) {
    j["type"] = "box";
    j["half_extents"] = vec3_to(box->half_extents);
    j["pose"] = pose_to(box->pose);
  } else {
    const auto& plane = std::get<PlanePrimitive>(prim);
    j["type"] = "plane";
    j["half_extents"] = json::array({std::isfinite(plane.hx) ? json(plane.hx) : json(),
                                     std::isfinite(plane.hy) ? json(plane.hy) : json()});
    j["pose"] = pose_to(plane.pose);
  }
  return j;
}

}  // namespace

SimConfig sim_config_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scene parse failure: ") + e.what());
  }

  SimConfig c;
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "duration") {
        c.duration = value.get<double>();
      } else if (key == "seed") {
        c.seed = value.get<std::uint64_t>();
      } else if (key == "lidar") {
        for (const auto& [k, v] : value.items()) {
          if (k == "n_rings") c.lidar.n_rings = v.get<int>();
          else if (k == "vertical_fov_deg") c.lidar.vertical_fov_deg = v.get<double>();
          else if (k == "horizontal_res_deg") c.lidar.horizontal_res_deg = v.get<double>();
          else if (k == "scan_period") c.lidar.scan_period = v.get<double>();
          else if (k == "max_range") c.lidar.max_range = v.get<double>();
          else if (k == "range_noise_sigma") c.lidar.range_noise_sigma = v.get<double>();
          else throw ConfigError("unknown lidar key '" + k + "'");
        }
      } else if (key == "imu") {
        for (const auto& [k, v] : value.items()) {
          if (k == "rate") c.imu.rate = v.get<double>();
          else if (k == "gyro_noise_sigma") c.imu.gyro_noise_sigma = v.get<double>();
          else if (k == "accel_noise_sigma") c.imu.accel_noise_sigma = v.get<double>();
          else if (k == "gyro_bias") c.imu.gyro_bias = vec3_from(v, "imu.gyro_bias");
          else if (k == "accel_bias") c.imu.accel_bias = vec3_from(v, "imu.accel_bias");
          else throw ConfigError("unknown imu key '" + k + "'");
        }
      } else if (key == "ego") {
        for (const auto& [k, v] : value.items()) {
          if (k == "initial_pose") {
            c.ego.initial_pose = pose_from(v, "ego.initial_pose");
          } else if (k == "segments") {
            for (std::size_t i = 0; i < v.size(); ++i) {
              EgoSegment seg;
              for (const auto& [sk, sv] : v[i].items()) {
                const std::string where = "ego.segments[" + std::to_string(i) + "]";
                if (sk == "duration") seg.duration = sv.get<double>();
                else if (sk == "linear_velocity") seg.linear_velocity = vec3_from(sv, where);
                else if (sk == "angular_velocity") seg.angular_velocity = vec3_from(sv, where);
                else throw ConfigError(where + ": unknown key '" + sk + "'");
              }
              c.ego.segments.push_back(seg);
            }
          } else {
            throw ConfigError("unknown ego key '" + k + "'");
          }
        }
      } else if (key == "static") {
        for (std::size_t i = 0; i < value.size(); ++i) {
          c.scene.static_primitives.push_back(
              primitive_from(value[i], "static[" + std::to_string(i) + "]"));
        }
      } else if (key == "movers") {
        for (std::size_t i = 0; i < value.size(); ++i) {
          const std::string where = "movers[" + std::to_string(i) + "]";
          Mover m;
          for (const auto& [mk, mv] : value[i].items()) {
            if (mk == "shape") m.shape = primitive_from(mv, where + ".shape");
            else if (mk == "linear_velocity") m.linear_velocity = vec3_from(mv, where);
            else if (mk == "angular_velocity") m.angular_velocity = vec3_from(mv, where);
            else throw ConfigError(where + ": unknown key '" + mk + "'");
          }
          c.scene.movers.push_back(m);
        }
      } else {
        throw ConfigError("unknown scene key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scene parse failure: ") + e.what());
  }
  return c;
}

SimConfig load_sim_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read scene file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return sim_config_from_json(buf.str());
}

std::string sim_config_to_json(const SimConfig& c) {
  json doc;
  doc["duration"] = c.duration;
  doc["seed"] = c.seed;
  doc["lidar"] = {{"n_rings", c.lidar.n_rings},
                  {"vertical_fov_deg", c.lidar.vertical_fov_deg},
                  {"horizontal_res_deg", c.lidar.horizontal_res_deg},
                  {"scan_period", c.lidar.scan_period},
                  {"max_range", c.lidar.max_range},
                  {"range_noise_sigma", c.lidar.range_noise_sigma}};
  doc["imu"] = {{"rate", c.imu.rate},
                {"gyro_noise_sigma", c.imu.gyro_noise_sigma},
                {"accel_noise_sigma", c.imu.accel_noise_sigma},
                {"gyro_bias", vec3_to(c.imu.gyro_bias)},
                {"accel_bias", vec3_to(c.imu.accel_bias)}};
  doc["ego"]["initial_pose"] = pose_to(c.ego.initial_pose);
  doc["ego"]["segments"] = json::array();
  for (const auto& seg : c.ego.segments) {
    doc["ego"]["segments"].push_back({{"duration", seg.duration},
                                      {"linear_velocity", vec3_to(seg.linear_velocity)},
                                      {"angular_velocity", vec3_to(seg.angular_velocity)}});
  }
  doc["static"] = json::array();
  for (const auto& prim : c.scene.static_primitives) doc["static"].push_back(primitive_to(prim));
  doc["movers"] = json::array();
  for (const auto& m : c.scene.movers) {
    doc["movers"].push_back({{"shape", primitive_to(m.shape)},
                             {"linear_velocity", vec3_to(m.linear_velocity)},
                             {"angular_velocity", vec3_to(m.angular_velocity)}});
  }
  return doc.dump(2) + "\n";
}

}  // namespace stlio
