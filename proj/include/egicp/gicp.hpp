#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "egicp/error.hpp"
#include "egicp/gaussian_cloud.hpp"
#include "egicp/lie.hpp"

namespace egicp {

using Matrix36d = Eigen::Matrix<double, 3, 6>;

inline constexpr double kDefaultMaxCorrespondenceDistance = 2.0;

struct Correspondence {
  std::size_t source_index = 0;
  std::size_t target_index = 0;
  bool valid = false;
};

/// Whitened residual e = L^-1 d and its Jacobian w.r.t. a right perturbation
/// of the relative pose, with L L^T = target_cov + R source_cov R^T.
struct PointLinearization {
  Eigen::Vector3d residual = Eigen::Vector3d::Zero();
  Matrix36d jacobian = Matrix36d::Zero();
  std::size_t source_index = 0;
};

/**
 * @brief Quadratic surrogate dx^T H dx + 2 b^T dx + c of a residual sum
 * around linearization_pose.
 */
struct QuadraticFactor {
  Matrix6d H = Matrix6d::Zero();
  Vector6d b = Vector6d::Zero();
  double c = 0.0;
  Pose linearization_pose;
  std::size_t point_count = 0;

  void add(const PointLinearization& pl, double weight = 1.0) {
    H.noalias() += weight * pl.jacobian.transpose() * pl.jacobian;
    b.noalias() += weight * pl.jacobian.transpose() * pl.residual;
    c += weight * pl.residual.squaredNorm();
    ++point_count;
  }

  double evaluate(const Vector6d& dx) const { return dx.dot(H * dx) + 2.0 * b.dot(dx) + c; }
};

/// Cached per-point linearizations at `pose`, one entry per valid correspondence.
struct ResidualBank {
  std::vector<PointLinearization> entries;
  std::vector<Correspondence> correspondences;
  Pose pose;
};

inline void require_non_empty(const GaussianCloud& source, const GaussianCloud& target) {
  if (source.empty() || target.empty()) {
    throw Error(ErrorCode::EmptyCloud, "source and target clouds must be non-empty");
  }
}

inline Correspondence find_correspondence(std::size_t source_index, const GaussianCloud& source,
                                          const GaussianCloud& target, const Pose& pose, double max_corr_dist) {
  const auto nn = target.nn_index().nearest(pose * source.mean(source_index));
  return {source_index, nn.index, nn.sq_dist <= max_corr_dist * max_corr_dist};
}

inline std::vector<Correspondence> find_correspondences(const GaussianCloud& source, const GaussianCloud& target,
                                                        const Pose& pose,
                                                        double max_corr_dist = kDefaultMaxCorrespondenceDistance) {
  require_non_empty(source, target);
  std::vector<Correspondence> out(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) {
    out[i] = find_correspondence(i, source, target, pose, max_corr_dist);
  }
  return out;
}

/// Cholesky factor L of the combined covariance; e = L^-1 d gives ||e||^2 = d^T M^-1 d.
inline Eigen::Matrix3d combined_covariance_factor(const Eigen::Matrix3d& target_cov, const Eigen::Matrix3d& source_cov,
                                                  const Pose& pose) {
  const Eigen::Matrix3d& r = pose.rotation;
  const Eigen::Matrix3d m = target_cov + r * source_cov * r.transpose();
  Eigen::LLT<Eigen::Matrix3d> llt(m);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::SingularInformationMatrix, "combined covariance is not positive definite");
  }
  return llt.matrixL();
}

inline PointLinearization linearize_point(const Eigen::Vector3d& target_mean, const Eigen::Matrix3d& target_cov,
                                          const Eigen::Vector3d& source_mean, const Eigen::Matrix3d& source_cov,
                                          const Pose& pose, std::size_t source_index = 0) {
  const Eigen::Matrix3d l = combined_covariance_factor(target_cov, source_cov, pose);
  const auto lower = l.triangularView<Eigen::Lower>();

  const Eigen::Vector3d d = target_mean - pose * source_mean;
  // d(T exp(x) mu) / dx = R [I, -[mu]x], hence dd/dx = [-R, R [mu]x].
  Matrix36d dd;
  dd.leftCols<3>() = -pose.rotation;
  dd.rightCols<3>() = pose.rotation * skew(source_mean);

  PointLinearization pl;
  pl.residual = lower.solve(d);
  pl.jacobian = lower.solve(dd);
  pl.source_index = source_index;
  return pl;
}

inline PointLinearization linearize_point(const GaussianCloud& source, const GaussianCloud& target,
                                          const Correspondence& corr, const Pose& pose) {
  return linearize_point(target.mean(corr.target_index), target.covariance(corr.target_index),
                         source.mean(corr.source_index), source.covariance(corr.source_index), pose,
                         corr.source_index);
}

inline double point_cost(const GaussianCloud& source, const GaussianCloud& target, const Correspondence& corr,
                         const Pose& pose) {
  const Eigen::Matrix3d l = combined_covariance_factor(target.covariance(corr.target_index),
                                                       source.covariance(corr.source_index), pose);
  const Eigen::Vector3d d = target.mean(corr.target_index) - pose * source.mean(corr.source_index);
  return l.triangularView<Eigen::Lower>().solve(d).squaredNorm();
}

/// A correspondence with its whitening factor L frozen at some pose.
struct WeightedCorrespondence {
  Correspondence corr;
  double weight = 1.0;
  Eigen::Matrix3d l = Eigen::Matrix3d::Identity();
};

inline WeightedCorrespondence freeze(const GaussianCloud& source, const GaussianCloud& target,
                                     const Correspondence& corr, const Pose& pose, double weight = 1.0) {
  return {corr, weight,
          combined_covariance_factor(target.covariance(corr.target_index), source.covariance(corr.source_index), pose)};
}

/// Weighted ||L^-1 (mu_t - T mu_s)||^2 with L held fixed, the cost the
/// Gauss-Newton model of a linearization actually approximates.
inline double frozen_cost(const GaussianCloud& source, const GaussianCloud& target,
                          const WeightedCorrespondence& wc, const Pose& pose) {
  const Eigen::Vector3d d = target.mean(wc.corr.target_index) - pose * source.mean(wc.corr.source_index);
  return wc.weight * wc.l.triangularView<Eigen::Lower>().solve(d).squaredNorm();
}

struct FullLinearization {
  QuadraticFactor factor;
  ResidualBank bank;
};

/// Linearizes every source point at `pose`. Points without a correspondence
/// within max_corr_dist are skipped.
inline FullLinearization linearize_full(const GaussianCloud& source, const GaussianCloud& target, const Pose& pose,
                                        double max_corr_dist = kDefaultMaxCorrespondenceDistance) {
  FullLinearization out;
  out.bank.pose = pose;
  out.bank.correspondences = find_correspondences(source, target, pose, max_corr_dist);
  out.factor.linearization_pose = pose;
  out.bank.entries.reserve(source.size());
  for (const auto& corr : out.bank.correspondences) {
    if (!corr.valid) {
      continue;
    }
    out.bank.entries.push_back(linearize_point(source, target, corr, pose));
    out.factor.add(out.bank.entries.back());
  }
  if (out.factor.point_count == 0) {
    throw Error(ErrorCode::NoValidCorrespondences, "no source point has a target within max_corr_dist");
  }
  return out;
}

inline double evaluate_cost(const GaussianCloud& source, const GaussianCloud& target, const Pose& pose,
                            double max_corr_dist = kDefaultMaxCorrespondenceDistance) {
  require_non_empty(source, target);
  double cost = 0.0;
  std::size_t valid = 0;
  for (std::size_t i = 0; i < source.size(); ++i) {
    const auto corr = find_correspondence(i, source, target, pose, max_corr_dist);
    if (!corr.valid) {
      continue;
    }
    cost += point_cost(source, target, corr, pose);
    ++valid;
  }
  if (valid == 0) {
    throw Error(ErrorCode::NoValidCorrespondences, "no source point has a target within max_corr_dist");
  }
  return cost;
}

}  // namespace egicp
