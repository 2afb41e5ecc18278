#include "stlio/evaluation.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "stlio/errors.hpp"

namespace stlio {

std::vector<PosePair> associate(const Trajectory& a, const Trajectory& b, double max_dt) {
  if (max_dt <= 0.0) throw std::invalid_argument("max_dt must be positive");
  std::vector<PosePair> pairs;
  if (b.samples.empty()) throw DataError("association failed: empty reference trajectory");
  for (const auto& [ta, pa] : a.samples) {
    // nearest b-sample by time; b is sorted by the Trajectory invariant
    const auto it = std::lower_bound(
        b.samples.begin(), b.samples.end(), ta,
        [](const std::pair<double, Pose>& s, double t) { return s.first < t; });
    const std::pair<double, Pose>* cand = nullptr;
    if (it != b.samples.end()) cand = &*it;
    if (it != b.samples.begin()) {
      const auto& prev = *(it - 1);
      if (!cand || std::abs(prev.first - ta) <= std::abs(cand->first - ta)) cand = &prev;
    }
    if (cand && std::abs(cand->first - ta) <= max_dt) {
      pairs.push_back({ta, cand->first, pa, cand->second});
    }
  }
  if (pairs.empty()) throw DataError("association failed: no samples within max_dt");
  return pairs;
}

Pose umeyama_align(const std::vector<PosePair>& pairs) {
  if (pairs.size() < 3) throw DataError("alignment needs at least 3 pose pairs");

  Vec3 mean_a = Vec3::Zero(), mean_b = Vec3::Zero();
  for (const auto& p : pairs) {
    mean_a += p.a.translation;
    mean_b += p.b.translation;
  }
  mean_a /= static_cast<double>(pairs.size());
  mean_b /= static_cast<double>(pairs.size());

  Eigen::Matrix3d cross = Eigen::Matrix3d::Zero();
  for (const auto& p : pairs) {
    const Vec3 da = p.a.translation - mean_a;
    cross += (p.b.translation - mean_b) * da.transpose();
  }
  cross /= static_cast<double>(pairs.size());

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  // Rank-deficient point sets (straight-line or stationary trajectories)
  // leave some rotation unconstrained; the sign-corrected SVD solution below
  // is still a global minimizer of the residual, so alignment stays usable.
  Eigen::Matrix3d s = Eigen::Matrix3d::Identity();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) s(2, 2) = -1.0;

  Pose out;
  out.rotation = Eigen::Quaterniond(svd.matrixU() * s * svd.matrixV().transpose());
  out.translation = mean_b - out.rotation.toRotationMatrix() * mean_a;
  return out;
}

double ate_rmse(const std::vector<PosePair>& pairs, const Pose& alignment) {
  if (pairs.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& p : pairs) {
    sum += (alignment * p.a.translation - p.b.translation).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(pairs.size()));
}

double aligned_ate_rmse(const Trajectory& estimate, const Trajectory& truth, double max_dt) {
  const auto pairs = associate(estimate, truth, max_dt);
  return ate_rmse(pairs, umeyama_align(pairs));
}

MapScore map_scores(const std::vector<FinalLabel>& predicted,
                    const std::vector<FinalLabel>& truth) {
  if (predicted.size() != truth.size()) {
    throw std::invalid_argument("label lists differ in length");
  }
  MapScore s;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == FinalLabel::Static) {
      (predicted[i] == FinalLabel::Static ? s.true_static : s.false_static) += 1;
    } else {
      (predicted[i] == FinalLabel::Dynamic ? s.true_dynamic : s.false_dynamic) += 1;
    }
  }
  const std::uint64_t n_static = s.true_static + s.false_static;
  const std::uint64_t n_dynamic = s.true_dynamic + s.false_dynamic;
  if (n_static > 0) s.sa = 100.0 * static_cast<double>(s.true_static) / n_static;
  if (n_dynamic > 0) s.da = 100.0 * static_cast<double>(s.true_dynamic) / n_dynamic;
  if (s.sa && s.da) {
    s.ha = (*s.sa + *s.da) > 0.0 ? 2.0 * (*s.sa) * (*s.da) / (*s.sa + *s.da) : 0.0;
  }
  return s;
}

}  // namespace stlio
