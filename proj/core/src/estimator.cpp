#include "stlio/estimator.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <chrono>
#include <cmath>

#include "stlio/errors.hpp"
#include "stlio/parallel.hpp"
#include "stlio/so3.hpp"

namespace stlio {

namespace {

using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

double huber_rho(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
}

double huber_weight(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 1.0 : delta / a;
}

struct PriorWeights {
  double rot = 0.0;
  double trans = 0.0;
};

PriorWeights prior_weights(const RegistrationConfig& cfg, double prior_dt) {
  const double dt = std::max(prior_dt, 1e-3);
  const double sr = cfg.prior_sigma_rot * dt;
  const double st = cfg.prior_sigma_trans * dt;
  return {1.0 / (sr * sr), 1.0 / (st * st)};
}

double prior_cost(const NavState& state, const NavState& prior, const PriorWeights& w) {
  const Vec3 r_rot = so3::log(prior.pose.rotation.conjugate() * state.pose.rotation);
  const Vec3 r_tr = state.pose.translation - prior.pose.translation;
  return 0.5 * (w.rot * r_rot.squaredNorm() + w.trans * r_tr.squaredNorm());
}

NavState apply_update(const NavState& s, const Vec6& delta) {
  NavState out = s;
  out.pose.rotation = (s.pose.rotation * so3::exp_quat(delta.head<3>())).normalized();
  out.pose.translation = s.pose.translation + delta.tail<3>();
  return out;
}

// Shared classification core: spatio-temporal normal per point from a
// prebuilt neighborhood, evaluated at `state`.
void classify_with_hoods(const std::vector<StampedPoint>& body_cloud, const NavState& state,
                         const std::vector<std::vector<StampedPoint>>& hoods,
                         const RegistrationConfig& cfg, std::vector<StabilityLabel>& out) {
  StNormalParams sp;
  sp.time_scale = cfg.time_scale;
  sp.k_min = cfg.k_min;
  sp.eigen_ratio_max = cfg.eigen_ratio_max;
  sp.view_origin = state.pose.translation;
  parallel_for(body_cloud.size(), cfg.threads, [&](std::size_t i) {
    const StampedPoint query{state.pose * body_cloud[i].position, body_cloud[i].time};
    const auto normal = estimate_st_normal(query, hoods[i], sp);
    const StabilityLabel lab = classify_stability(normal, cfg.theta_thr);
    out[i] = (cfg.sticky_unstable && out[i] == StabilityLabel::Unstable)
                 ? StabilityLabel::Unstable
                 : lab;
  });
}

void build_hoods(const std::vector<StampedPoint>& body_cloud, const NavState& state,
                 const TemporalWindowMap& mt, const RegistrationConfig& cfg,
                 std::vector<std::vector<StampedPoint>>& hoods) {
  const double max_d2 = cfg.neighbor_max_dist * cfg.neighbor_max_dist;
  parallel_for(body_cloud.size(), cfg.threads, [&](std::size_t i) {
    const Vec3 world = state.pose * body_cloud[i].position;
    const auto found = mt.knn(world, cfg.k_neighbors);
    auto& hood = hoods[i];
    hood.clear();
    hood.reserve(found.size());
    for (const auto& nb : found) {
      if (nb.dist2 <= max_d2) hood.push_back(nb.point);
    }
  });
}

}  // namespace

std::pair<double, Eigen::Matrix<double, 1, 6>> point_to_plane_residual_and_jacobian(
    const NavState& state, const Vec3& body_point, const PlaneVoxel& plane) {
  const Eigen::Matrix3d r = state.pose.rotation.toRotationMatrix();
  const Vec3 world = r * body_point + state.pose.translation;
  const double residual = plane.normal.dot(world - plane.centroid);
  Eigen::Matrix<double, 1, 6> jac;
  jac.head<3>() = -plane.normal.transpose() * r * so3::hat(body_point);
  jac.tail<3>() = plane.normal.transpose();
  return {residual, jac};
}

Vec6 solve_gauss_newton_step(const Mat6& h, const Vec6& g, double lambda) {
  const Mat6 damped = h + lambda * Mat6::Identity();
  const Vec6 delta = damped.ldlt().solve(-g);
  if (!delta.allFinite()) throw DegeneracyError("non-finite normal-equation solve");
  return delta;
}

std::vector<StabilityLabel> classify_cloud(const std::vector<StampedPoint>& body_cloud,
                                           const NavState& state, const TemporalWindowMap& mt,
                                           const RegistrationConfig& cfg) {
  std::vector<StabilityLabel> labels(body_cloud.size(), StabilityLabel::Stable);
  if (cfg.mode == DynamicMode::NoDynamic) return labels;
  std::vector<std::vector<StampedPoint>> hoods(body_cloud.size());
  build_hoods(body_cloud, state, mt, cfg, hoods);
  RegistrationConfig fresh = cfg;
  fresh.sticky_unstable = false;  // a one-shot classification has no history
  classify_with_hoods(body_cloud, state, hoods, fresh, labels);
  return labels;
}

RegistrationResult register_scan(const std::vector<StampedPoint>& body_cloud,
                                 const TemporalWindowMap& mt, const PlaneVoxelMap& mv,
                                 const NavState& prior, double prior_dt,
                                 const RegistrationConfig& cfg) {
  const auto t_total = Clock::now();
  const std::size_t n = body_cloud.size();
  RegistrationResult out;
  out.state = prior;
  out.labels.assign(n, StabilityLabel::Stable);
  out.correspondences.assign(n, {});

  const PriorWeights pw = prior_weights(cfg, prior_dt);

  double r_max = 0.0;
  for (const auto& p : body_cloud) r_max = std::max(r_max, p.position.norm());

  // kNN neighborhoods are cached across iterations; sub-tolerance motion of
  // the state cannot change them meaningfully, so they are rebuilt only when
  // the worst-case point displacement since the cached pose exceeds cache_tol.
  std::vector<std::vector<StampedPoint>> hoods(n);
  bool cache_valid = false;
  Pose cache_pose;
  const auto displacement = [&](const Pose& a, const Pose& b) {
    const double dt = (a.translation - b.translation).norm();
    const double ang = Eigen::AngleAxisd(a.rotation.conjugate() * b.rotation).angle();
    return dt + std::abs(ang) * r_max;
  };
  const auto ensure_hoods = [&](const NavState& st) {
    if (cache_valid && displacement(cache_pose, st.pose) <= cfg.cache_tol) return;
    build_hoods(body_cloud, st, mt, cfg, hoods);
    cache_pose = st.pose;
    cache_valid = true;
  };

  NavState state = prior;
  double lambda = 1e-4;
  bool converged = false;
  int iters = 0;

  struct Corr {
    std::uint32_t index;
    PlaneVoxel plane;
    VoxelKey key;
  };
  std::vector<Corr> corrs;
  corrs.reserve(n);

  for (int iter = 1; iter <= cfg.max_iter; ++iter) {
    iters = iter;

    // (1) stability labels at the current state
    if (cfg.mode == DynamicMode::Full ||
        (cfg.mode == DynamicMode::Sequential && iter == 1)) {
      const auto t0 = Clock::now();
      ensure_hoods(state);
      classify_with_hoods(body_cloud, state, hoods, cfg, out.labels);
      out.timing.normals_ms += ms_since(t0);
    }

    // (2) plane correspondences for the Stable subset
    {
      const auto t0 = Clock::now();
      std::vector<std::optional<CorrespondenceQuery>> found(n);
      parallel_for(n, cfg.threads, [&](std::size_t i) {
        if (out.labels[i] != StabilityLabel::Stable) return;
        const Vec3 world = state.pose * body_cloud[i].position;
        found[i] = mv.query_correspondence(world, cfg.max_corr_dist);
      });
      corrs.clear();
      for (std::size_t i = 0; i < n; ++i) {
        if (found[i]) {
          corrs.push_back({static_cast<std::uint32_t>(i), found[i]->plane, found[i]->key});
        }
      }
      out.timing.correspondence_ms += ms_since(t0);
    }
    if (static_cast<int>(corrs.size()) < cfg.min_stable_points) {
      throw DegeneracyError("too few stable points with plane correspondences: " +
                            std::to_string(corrs.size()));
    }

    // (3) one damped Gauss-Newton step of the joint objective on the frozen
    // correspondence set
    const auto t0 = Clock::now();
    const double inv_sigma2 = 1.0 / (cfg.sigma_lidar * cfg.sigma_lidar);
    Mat6 h = Mat6::Zero();
    Vec6 g = Vec6::Zero();
    double cost_before = prior_cost(state, prior, pw);
    for (const Corr& c : corrs) {
      const auto [r, jac] =
          point_to_plane_residual_and_jacobian(state, body_cloud[c.index].position, c.plane);
      const double w = huber_weight(r, cfg.huber_delta) * inv_sigma2;
      h.noalias() += w * jac.transpose() * jac;
      g.noalias() += w * jac.transpose() * r;
      cost_before += huber_rho(r, cfg.huber_delta) * inv_sigma2;
    }
    {
      const Vec3 r_rot = so3::log(prior.pose.rotation.conjugate() * state.pose.rotation);
      const Eigen::Matrix3d j_rot = so3::right_jacobian_inv(r_rot);
      h.topLeftCorner<3, 3>().noalias() += pw.rot * j_rot.transpose() * j_rot;
      g.head<3>().noalias() += pw.rot * j_rot.transpose() * r_rot;
      const Vec3 r_tr = state.pose.translation - prior.pose.translation;
      h.bottomRightCorner<3, 3>().diagonal().array() += pw.trans;
      g.tail<3>() += pw.trans * r_tr;
    }

    const auto fixed_set_cost = [&](const NavState& st) {
      double cost = prior_cost(st, prior, pw);
      for (const Corr& c : corrs) {
        const auto [r, jac] =
            point_to_plane_residual_and_jacobian(st, body_cloud[c.index].position, c.plane);
        (void)jac;
        cost += huber_rho(r, cfg.huber_delta) * inv_sigma2;
      }
      return cost;
    };

    bool accepted = false;
    Vec6 delta = Vec6::Zero();
    int bad_solves = 0;
    for (int attempt = 0; attempt < 12 && !accepted; ++attempt) {
      Vec6 trial;
      try {
        trial = solve_gauss_newton_step(h, g, lambda);
      } catch (const DegeneracyError&) {
        if (++bad_solves >= 4) throw;
        lambda *= 100.0;
        continue;
      }
      const NavState cand = apply_update(state, trial);
      const double cost_after = fixed_set_cost(cand);
      if (cost_after <= cost_before * (1.0 + 1e-12) + 1e-15) {
        state = cand;
        delta = trial;
        out.iteration_costs.push_back({cost_before, cost_after});
        lambda = std::max(lambda / 3.0, 1e-9);
        accepted = true;
      } else {
        lambda *= 4.0;
      }
    }
    out.timing.solve_ms += ms_since(t0);
    if (!accepted) break;  // heavily damped step still refused: local stall

    if (delta.norm() < cfg.epsilon) {
      converged = true;
      break;
    }
  }

  out.state = state;
  out.state.velocity = prior.velocity;  // no lidar observability within a frame
  out.state.gyro_bias = prior.gyro_bias;
  out.state.accel_bias = prior.accel_bias;
  out.iterations = iters;
  out.converged = converged;

  // Final labels are recomputed at the returned state so that labels and pose
  // are mutually consistent: classifying again at this state reproduces them.
  if (cfg.mode == DynamicMode::Full) {
    const auto t0 = Clock::now();
    std::vector<StabilityLabel> fresh = classify_cloud(body_cloud, state, mt, cfg);
    if (cfg.sticky_unstable) {
      for (std::size_t i = 0; i < n; ++i) {
        if (out.labels[i] == StabilityLabel::Unstable) fresh[i] = StabilityLabel::Unstable;
      }
    }
    out.labels = std::move(fresh);
    out.timing.normals_ms += ms_since(t0);
  }

  // Correspondence records at the final state, for diagnostics and map gating.
  {
    std::vector<std::optional<CorrespondenceQuery>> found(n);
    parallel_for(n, cfg.threads, [&](std::size_t i) {
      if (out.labels[i] != StabilityLabel::Stable) return;
      const Vec3 world = state.pose * body_cloud[i].position;
      found[i] = mv.query_correspondence(world, cfg.max_corr_dist);
    });
    for (std::size_t i = 0; i < n; ++i) {
      if (found[i]) {
        out.correspondences[i] = {true, found[i]->key, found[i]->distance};
      }
    }
  }

  out.timing.total_ms = ms_since(t_total);
  return out;
}

void initialize_maps(const std::vector<std::vector<StampedPoint>>& clouds,
                     const std::vector<double>& frame_times, TemporalWindowMap& mt,
                     PlaneVoxelMap& mv) {
  if (clouds.size() != frame_times.size()) {
    throw std::invalid_argument("clouds and frame_times must align");
  }
  for (std::size_t f = 0; f < clouds.size(); ++f) {
    mt.push_frame(frame_times[f], clouds[f]);
    std::vector<Vec3> positions;
    positions.reserve(clouds[f].size());
    for (const auto& p : clouds[f]) positions.push_back(p.position);
    mv.insert_static_points(positions);
  }
}

}  // namespace stlio
