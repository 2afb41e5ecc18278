#include "stlio/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

#include "stlio/errors.hpp"
#include "stlio/estimator.hpp"
#include "stlio/scc.hpp"

namespace stlio {

namespace {

using Clock = std::chrono::steady_clock;
namespace fs = std::filesystem;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// IMU samples covering [from, to] with one sample of margin on each side.
std::vector<ImuSample> imu_slice(const std::vector<ImuSample>& imu, double from, double to) {
  std::vector<ImuSample> out;
  for (std::size_t i = 0; i < imu.size(); ++i) {
    const bool inside = imu[i].time >= from && imu[i].time <= to;
    const bool lead = i + 1 < imu.size() && imu[i].time < from && imu[i + 1].time >= from;
    const bool trail = i > 0 && imu[i].time > to && imu[i - 1].time <= to;
    if (inside || lead || trail) out.push_back(imu[i]);
  }
  return out;
}

struct FrameInputs {
  FrameData data;
  double scan_start = 0.0;
  double scan_end = 0.0;
  std::vector<StampedPoint> cloud;  // sensor frame, absolute times
};

FrameInputs load_frame(const Dataset& dataset, std::size_t index, double period) {
  FrameInputs in;
  in.data = dataset.frame(index);
  in.scan_start = in.data.frame_time;
  in.scan_end = in.data.frame_time + period;
  in.cloud.reserve(in.data.points.size());
  for (const auto& p : in.data.points) in.cloud.push_back(p.point);
  return in;
}

double frame_period(const Dataset& dataset) {
  if (dataset.size() >= 2) {
    const double t0 = dataset.frame(0).frame_time;
    const double t1 = dataset.frame(1).frame_time;
    if (t1 > t0) return t1 - t0;
  }
  // single frame: span of its own point times, padded
  const FrameData f = dataset.frame(0);
  double span = 0.1;
  for (const auto& p : f.points) span = std::max(span, p.point.time - f.frame_time);
  return span;
}

}  // namespace

OdometryStats run_odometry(const Dataset& dataset, const PipelineConfig& config,
                           const std::string& out_dir) {
  validate(config);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create output directory: " + out_dir);

  const double period = frame_period(dataset);
  const Vec3 gravity(0.0, 0.0, config.gravity_z);
  const RegistrationConfig reg_cfg = to_registration_config(config);
  const SccConfig scc_cfg = to_scc_config(config);

  TemporalWindowMap mt(config.mt_window);
  PlaneVoxelMap mv(to_plane_map_params(config));
  StaticVoxelRecord record(to_record_params(config));

  // Start from the ground-truth origin when the dataset carries one (ATE is
  // alignment-invariant; this only fixes the gauge), else from identity.
  NavState state;
  state.time = dataset.frame(0).frame_time;
  if (dataset.groundtruth && !dataset.groundtruth->samples.empty()) {
    state.pose = dataset.groundtruth->samples.front().second;
  }

  Trajectory trajectory;
  MapWriter map_writer((fs::path(out_dir) / "map.txt").string());
  JsonlWriter diag((fs::path(out_dir) / "diagnostics.jsonl").string());

  OdometryStats stats;
  stats.frames = static_cast<int>(dataset.size());
  double total_ms_sum = 0.0;
  const int n_bootstrap = std::min<int>(config.n_bootstrap, static_cast<int>(dataset.size()));

  NavState prev_state = state;
  bool have_prev = false;

  for (std::size_t f = 0; f < dataset.size(); ++f) {
    const auto t_frame = Clock::now();
    FrameInputs in = load_frame(dataset, f, period);

    // --- propagation and undistortion -----------------------------------
    const auto imu = imu_slice(dataset.imu, state.time, in.scan_end);
    const PropagationResult prop = propagate(state, imu, in.scan_end, gravity,
                                             config.max_imu_gap);
    const NavState prior = prop.prior;

    const Pose extrinsic;  // lidar mounted at the body origin
    const std::vector<StampedPoint> world_prior =
        undistort({in.cloud, in.scan_start, in.scan_end}, prop.trajectory, extrinsic,
                  config.threads);
    // deskewed body-frame copy: the scan as if taken at scan_end
    const Pose prior_inv = prior.pose.inverse();
    std::vector<StampedPoint> body(world_prior.size());
    for (std::size_t i = 0; i < world_prior.size(); ++i) {
      body[i] = {prior_inv * world_prior[i].position, world_prior[i].time};
    }

    const std::vector<std::size_t> keep = voxel_downsample_indices(body, config.downsample_cell);
    std::vector<StampedPoint> body_ds;
    body_ds.reserve(keep.size());
    for (const std::size_t i : keep) body_ds.push_back(body[i]);

    // --- pose estimate ----------------------------------------------------
    const bool bootstrap = static_cast<int>(f) < n_bootstrap;
    bool degenerate = false;
    RegistrationResult reg;
    // Lidar-corrected poses carry the only velocity information the IMU
    // cannot observe (constant velocity is invisible to accelerometers).
    const auto refresh_velocity = [&] {
      if (have_prev && in.scan_end > prev_state.time) {
        state.velocity = (state.pose.translation - prev_state.pose.translation) /
                         (in.scan_end - prev_state.time);
      }
    };
    if (bootstrap) {
      // Cold start: the joint dynamic-aware estimator needs populated maps,
      // but inserting scans at unrefined priors would smear every surface by
      // the unobserved motion. Align each bootstrap scan classically (every
      // point treated stable) against the map built so far.
      if (mv.voxel_count() == 0) {
        state = prior;
        reg.state = state;
      } else {
        RegistrationConfig boot_cfg = reg_cfg;
        boot_cfg.mode = DynamicMode::NoDynamic;
        try {
          reg = register_scan(body_ds, mt, mv, prior, in.scan_end - prev_state.time, boot_cfg);
          state = reg.state;
          refresh_velocity();
        } catch (const DegeneracyError&) {
          state = prior;
          reg.state = prior;
        }
      }
      reg.labels.assign(body_ds.size(), StabilityLabel::Stable);
    } else {
      stats.registered += 1;
      try {
        reg = register_scan(body_ds, mt, mv, prior, in.scan_end - prev_state.time, reg_cfg);
        state = reg.state;
        refresh_velocity();
      } catch (const DegeneracyError&) {
        degenerate = true;
        stats.degenerate += 1;
        state = prior;
        reg.state = prior;
        reg.labels = classify_cloud(body_ds, prior, mt, reg_cfg);
        reg.correspondences.assign(body_ds.size(), {});
      }
    }
    prev_state = state;
    have_prev = true;

    // --- spatial consistency refinement ----------------------------------
    const auto t_scc = Clock::now();
    std::vector<StampedPoint> full_world(body.size());
    for (std::size_t i = 0; i < body.size(); ++i) {
      full_world[i] = {state.pose * body[i].position, body[i].time};
    }
    std::vector<Vec3> unstable_world;
    for (std::size_t i = 0; i < body_ds.size(); ++i) {
      if (reg.labels[i] == StabilityLabel::Unstable) {
        unstable_world.push_back(state.pose * body_ds[i].position);
      }
    }
    const RefineResult refined =
        refine_dynamic_labels(unstable_world, full_world, record, scc_cfg);
    const std::vector<FinalLabel>& final_labels = refined.labels;
    const double scc_ms = ms_since(t_scc);

    if (std::getenv("STLIO_SCC_DEBUG") != nullptr) {
      const auto cand = upsample_unstable(unstable_world, full_world, scc_cfg.upsample_radius);
      std::vector<Vec3> cpos;
      cpos.reserve(cand.size());
      for (const std::uint32_t i : cand) cpos.push_back(full_world[i].position);
      const DbscanResult groups = dbscan(cpos, scc_cfg.dbscan_eps, scc_cfg.dbscan_min_pts);
      std::size_t truth_dyn = 0, truth_dyn_cand = 0, truth_dyn_final = 0;
      std::vector<char> is_cand(body.size(), 0);
      for (const std::uint32_t i : cand) is_cand[i] = 1;
      for (std::size_t i = 0; i < body.size(); ++i) {
        if (in.data.points[i].truth_label != 1) continue;
        ++truth_dyn;
        truth_dyn_cand += is_cand[i];
        truth_dyn_final += final_labels[i] == FinalLabel::Dynamic ? 1 : 0;
      }
      std::fprintf(stderr,
                   "[scc] f=%zu unstable_ds=%zu cand=%zu clusters=%zu noise=%zu "
                   "tdyn=%zu tdyn_cand=%zu tdyn_final=%zu record=%zu\n",
                   f, unstable_world.size(), cand.size(), groups.clusters.size(),
                   groups.noise.size(), truth_dyn, truth_dyn_cand, truth_dyn_final,
                   record.size());
      for (std::size_t c = 0; c < groups.clusters.size(); ++c) {
        const auto& cl = groups.clusters[c];
        const Vec3 edges = cl.box_max - cl.box_min;
        const double volume = edges.x() * edges.y() * edges.z();
        const bool kept =
            !(volume > scc_cfg.max_box_volume || edges.maxCoeff() > scc_cfg.max_box_edge);
        const double ov = record.overlap_fraction(cl.box_min, cl.box_max);
        std::size_t dyn_members = 0;
        for (const std::uint32_t k : cl.members) {
          dyn_members += in.data.points[cand[k]].truth_label == 1 ? 1 : 0;
        }
        std::fprintf(stderr,
                     "[scc]   c=%zu n=%zu edges=(%.1f,%.1f,%.1f) vol=%.1f kept=%d ov=%.2f "
                     "label=%s tdyn=%zu/%zu ctr=(%.1f,%.1f,%.1f)\n",
                     c, cl.members.size(), edges.x(), edges.y(), edges.z(), volume,
                     kept ? 1 : 0, ov,
                     kept && ov < scc_cfg.overlap_thr ? "DYN" : "STA", dyn_members,
                     cl.members.size(), 0.5 * (cl.box_min.x() + cl.box_max.x()),
                     0.5 * (cl.box_min.y() + cl.box_max.y()),
                     0.5 * (cl.box_min.z() + cl.box_max.z()));
      }
    }

    // --- map upkeep (after classification) --------------------------------
    mt.push_frame(in.scan_end, [&] {
      std::vector<StampedPoint> world_ds(body_ds.size());
      for (std::size_t i = 0; i < body_ds.size(); ++i) {
        world_ds[i] = {state.pose * body_ds[i].position, body_ds[i].time};
      }
      return world_ds;
    }());

    std::vector<Vec3> confirmed_static;
    std::vector<VoxelKey> static_keys;
    const double mark_r2 = config.mark_radius * config.mark_radius;
    for (std::size_t i = 0; i < body_ds.size(); ++i) {
      if (reg.labels[i] != StabilityLabel::Stable) continue;
      if (final_labels[keep[i]] != FinalLabel::Static) continue;
      const Vec3 world = state.pose * body_ds[i].position;
      confirmed_static.push_back(world);
      // Cluster members vetoed as false positives are ambiguous, not
      // confirmed static; recording them would stamp object surfaces into
      // the record whenever a cluster is misjudged once, and that stamp
      // then vetoes the same object on every later frame.
      if (refined.candidate[keep[i]]) continue;
      if ((world - state.pose.translation).squaredNorm() <= mark_r2) {
        static_keys.push_back(VoxelKey::of(world, config.record_voxel_size));
      }
    }
    mv.insert_static_points(confirmed_static);
    // Bootstrap labels are asserted, not estimated; recording them as
    // confirmed-static space would permanently stamp every mover's surface
    // into the short-term record and veto those objects as "already static"
    // for the rest of the run.
    if (!bootstrap) {
      record.mark_static(static_keys, in.scan_end);
      // Moving objects sweep through space; a voxel they currently occupy
      // must not stay on record as confirmed static, or the next object
      // crossing it is vetoed by its own wake.
      std::vector<VoxelKey> occupied_keys;
      for (std::size_t i = 0; i < full_world.size(); ++i) {
        if (final_labels[i] != FinalLabel::Dynamic) continue;
        occupied_keys.push_back(
            VoxelKey::of(full_world[i].position, config.record_voxel_size));
      }
      record.unmark(occupied_keys, in.scan_end);
    }

    // --- outputs -----------------------------------------------------------
    trajectory.samples.emplace_back(in.scan_end, state.pose);
    for (std::size_t i = 0; i < full_world.size(); ++i) {
      map_writer.add(full_world[i].position, final_labels[i]);
    }

    const double total_ms = ms_since(t_frame);
    total_ms_sum += total_ms;
    std::size_t n_stable = 0;
    for (const auto lab : reg.labels) n_stable += lab == StabilityLabel::Stable ? 1 : 0;
    std::size_t n_dynamic = 0;
    for (const auto lab : final_labels) n_dynamic += lab == FinalLabel::Dynamic ? 1 : 0;

    nlohmann::json line;
    line["frame"] = f;
    line["time"] = in.scan_end;
    line["bootstrap"] = bootstrap;
    line["degenerate"] = degenerate;
    line["iterations"] = reg.iterations;
    line["converged"] = reg.converged;
    line["points"] = body.size();
    line["downsampled"] = body_ds.size();
    line["stable_fraction"] =
        body_ds.empty() ? 1.0 : static_cast<double>(n_stable) / body_ds.size();
    line["dynamic_fraction"] =
        full_world.empty() ? 0.0 : static_cast<double>(n_dynamic) / full_world.size();
    line["est_ms"] = {{"normals", reg.timing.normals_ms},
                      {"correspondence", reg.timing.correspondence_ms},
                      {"solve", reg.timing.solve_ms},
                      {"total", reg.timing.total_ms}};
    line["scc_ms"] = scc_ms;
    line["total_ms"] = total_ms;
    diag.write_line(line.dump());
  }

  write_tum_trajectory((fs::path(out_dir) / "trajectory_tum.txt").string(), trajectory);
  stats.mean_total_ms = dataset.size() ? total_ms_sum / dataset.size() : 0.0;
  return stats;
}

namespace {

nlohmann::json percentiles(std::vector<double> values) {
  nlohmann::json out;
  if (values.empty()) return out;
  std::sort(values.begin(), values.end());
  const auto at = [&](double q) {
    const double idx = q * (values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(idx);
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (values[hi] - values[lo]) * (idx - lo);
  };
  double mean = 0.0;
  for (const double v : values) mean += v;
  out["mean"] = mean / values.size();
  out["p50"] = at(0.50);
  out["p90"] = at(0.90);
  out["p99"] = at(0.99);
  return out;
}

}  // namespace

std::string run_evaluation(const EvalOptions& options) {
  nlohmann::json metrics;

  const Trajectory estimate = read_tum_trajectory(options.estimate_trajectory);
  const Trajectory truth = read_tum_trajectory(options.truth_trajectory);
  const auto pairs = associate(estimate, truth, options.max_dt);
  const Pose alignment = umeyama_align(pairs);
  metrics["ate_rmse"] = ate_rmse(pairs, alignment);
  metrics["pose_pairs"] = pairs.size();

  if (!options.predicted_map.empty()) {
    if (options.dataset_dir.empty()) {
      throw ConfigError("map scoring needs the dataset directory for truth labels");
    }
    const auto predicted = read_map(options.predicted_map);
    const Dataset dataset = open_dataset(options.dataset_dir);

    std::vector<FinalLabel> pred_labels, truth_labels;
    std::size_t cursor = 0;
    for (std::size_t f = 0; f < dataset.size(); ++f) {
      const FrameData frame = dataset.frame(f);
      if (cursor + frame.points.size() > predicted.size()) {
        throw DataError("predicted map has fewer points than the dataset frames");
      }
      for (std::size_t i = 0; i < frame.points.size(); ++i, ++cursor) {
        if (static_cast<int>(f) < options.skip_frames) continue;  // warm-up
        const std::uint8_t truth_label = frame.points[i].truth_label;
        if (truth_label == 255) continue;  // unlabeled
        pred_labels.push_back(predicted[cursor].label);
        truth_labels.push_back(truth_label == 1 ? FinalLabel::Dynamic : FinalLabel::Static);
      }
    }
    if (cursor != predicted.size()) {
      throw DataError("predicted map has more points than the dataset frames");
    }
    const MapScore score = map_scores(pred_labels, truth_labels);
    metrics["map"]["scored_points"] = pred_labels.size();
    metrics["map"]["skip_frames"] = options.skip_frames;
    if (score.sa) metrics["map"]["sa"] = *score.sa;
    if (score.da) metrics["map"]["da"] = *score.da;
    if (score.ha) metrics["map"]["ha"] = *score.ha;
    metrics["map"]["counts"] = {{"true_static", score.true_static},
                                {"false_static", score.false_static},
                                {"true_dynamic", score.true_dynamic},
                                {"false_dynamic", score.false_dynamic}};
  }

  std::string series_csv = "frame,time,stable_fraction,est_ms,scc_ms,total_ms\n";
  if (!options.diagnostics.empty()) {
    std::ifstream in(options.diagnostics);
    if (!in) throw DataError("cannot read diagnostics: " + options.diagnostics);
    std::vector<double> est_ms, scc_ms, total_ms;
    std::string line;
    char row[256];
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed diagnostics line: ") + e.what());
      }
      est_ms.push_back(j["est_ms"]["total"].get<double>());
      scc_ms.push_back(j["scc_ms"].get<double>());
      total_ms.push_back(j["total_ms"].get<double>());
      std::snprintf(row, sizeof(row), "%llu,%.6f,%.6f,%.3f,%.3f,%.3f\n",
                    static_cast<unsigned long long>(j["frame"].get<std::uint64_t>()),
                    j["time"].get<double>(), j["stable_fraction"].get<double>(),
                    est_ms.back(), scc_ms.back(), total_ms.back());
      series_csv += row;
    }
    metrics["timing"]["estimation_ms"] = percentiles(est_ms);
    metrics["timing"]["scc_ms"] = percentiles(scc_ms);
    metrics["timing"]["total_ms"] = percentiles(total_ms);
  }

  if (!options.out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(options.out_dir, ec);
    if (ec) throw DataError("cannot create output directory: " + options.out_dir);
    std::ofstream mj(fs::path(options.out_dir) / "metrics.json");
    mj << metrics.dump(2) << '\n';
    std::ofstream sc(fs::path(options.out_dir) / "series.csv");
    sc << series_csv;
  }
  return metrics.dump(2);
}

}  // namespace stlio
