#include "stlio/geometry.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace stlio {

namespace {

// upper-triangle index of (r,c), r <= c
constexpr int kTriIndex[4][4] = {
    {0, 1, 2, 3}, {1, 4, 5, 6}, {2, 5, 7, 8}, {3, 6, 8, 9}};

}  // namespace

SymMat4 SymMat4::from_matrix(const Eigen::Matrix4d& m) {
  SymMat4 s;
  int k = 0;
  for (int r = 0; r < 4; ++r)
    for (int c = r; c < 4; ++c) s.u[k++] = 0.5 * (m(r, c) + m(c, r));
  return s;
}

Eigen::Matrix4d SymMat4::to_matrix() const {
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = u[kTriIndex[r][c]];
  return m;
}

double& SymMat4::at(int r, int c) { return u[kTriIndex[r][c]]; }
double SymMat4::at(int r, int c) const { return u[kTriIndex[r][c]]; }

std::pair<SymMat4, Vec4> spacetime_covariance(std::span<const StampedPoint> neighborhood,
                                              double time_scale) {
  const std::size_t n = neighborhood.size();
  if (n < 2) throw std::invalid_argument("spacetime_covariance: need at least 2 points");

  Vec4 mean = Vec4::Zero();
  for (const auto& p : neighborhood) {
    mean += Vec4(p.position.x(), p.position.y(), p.position.z(), p.time * time_scale);
  }
  mean /= static_cast<double>(n);

  Eigen::Matrix4d acc = Eigen::Matrix4d::Zero();
  for (const auto& p : neighborhood) {
    const Vec4 d(p.position.x() - mean.x(), p.position.y() - mean.y(),
                 p.position.z() - mean.z(), p.time * time_scale - mean.w());
    acc.noalias() += d * d.transpose();
  }
  acc /= static_cast<double>(n);
  return {SymMat4::from_matrix(acc), mean};
}

namespace {

// Lexicographically largest unit vector of a (near-)eigenspace: project the
// first coordinate axis with a nonzero projection onto the space.
Vec4 lex_canonical_vector(const Eigen::Matrix<double, 4, Eigen::Dynamic>& basis) {
  for (int axis = 0; axis < 4; ++axis) {
    Vec4 p = Vec4::Zero();
    for (int j = 0; j < basis.cols(); ++j) p += basis.col(j).dot(Vec4::Unit(axis)) * basis.col(j);
    const double pn = p.norm();
    if (pn > 1e-9) {
      p /= pn;
      if (p[axis] < 0.0) p = -p;
      return p;
    }
  }
  return basis.col(0);  // unreachable for an orthonormal basis
}

Vec4 canonical_sign(Vec4 v) {
  for (int i = 0; i < 4; ++i) {
    if (std::abs(v[i]) > 1e-15) {
      if (v[i] < 0.0) v = -v;
      return v;
    }
  }
  return v;
}

}  // namespace

std::pair<double, Vec4> smallest_eigenvector(const SymMat4& m) {
  const Eigen::Matrix4d a = m.to_matrix();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(a);
  const auto& vals = es.eigenvalues();   // ascending
  const auto& vecs = es.eigenvectors();

  const double tol = 1e-12 * std::abs(m.trace());
  int multiplicity = 1;
  while (multiplicity < 4 && vals[multiplicity] - vals[0] < tol) ++multiplicity;

  Vec4 v;
  if (multiplicity == 1) {
    v = canonical_sign(vecs.col(0));
  } else {
    v = canonical_sign(lex_canonical_vector(vecs.leftCols(multiplicity)));
  }
  return {vals[0], v};
}

std::optional<SpatioTemporalNormal> estimate_st_normal(const StampedPoint& query,
                                                       std::span<const StampedPoint> neighbors,
                                                       const StNormalParams& params) {
  if (static_cast<int>(neighbors.size()) < params.k_min) return std::nullopt;

  std::vector<StampedPoint> pts;
  pts.reserve(neighbors.size() + 1);
  pts.assign(neighbors.begin(), neighbors.end());
  pts.push_back(query);

  auto [cov, mean] = spacetime_covariance(pts, params.time_scale);
  const Eigen::Matrix4d m = cov.to_matrix();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(m);
  const auto& vals = es.eigenvalues();

  // Reject fits without a clearly planar spectrum.
  const double trace = vals.sum();
  if (vals[1] <= 1e-12 * trace) return std::nullopt;
  if (vals[0] > params.eigen_ratio_max * vals[1]) return std::nullopt;

  auto [lambda, v] = smallest_eigenvector(cov);
  (void)lambda;

  // Flip the spatial part toward the viewpoint; near-zero spatial part flips
  // to d >= 0 instead.
  const Vec3 spatial(v[0], v[1], v[2]);
  const Vec3 to_view = params.view_origin - query.position;
  const double dot = spatial.dot(to_view);
  if (std::abs(dot) > 1e-12) {
    if (dot < 0.0) v = -v;
  } else if (spatial.norm() < 1e-9) {
    if (v[3] < 0.0) v = -v;
  }
  return SpatioTemporalNormal{v[0], v[1], v[2], v[3]};
}

double predicted_temporal_component(const Vec3& spatial_normal, const Vec3& velocity) {
  return -spatial_normal.dot(velocity);
}

double temporal_angle(const SpatioTemporalNormal& n) {
  const double spatial = n.spatial().norm();
  const double dt = std::abs(n.d);
  if (spatial == 0.0 && dt == 0.0)
    throw std::domain_error("temporal_angle: zero vector");
  return std::atan2(dt, spatial);
}

StabilityLabel classify_stability(const std::optional<SpatioTemporalNormal>& n,
                                  double theta_thr) {
  if (!n.has_value()) return StabilityLabel::Unstable;
  return temporal_angle(*n) > theta_thr ? StabilityLabel::Unstable : StabilityLabel::Stable;
}

}  // namespace stlio
