#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Geometry>

#include "egicp/error.hpp"
#include "egicp/gicp.hpp"
#include "egicp/lie.hpp"

namespace egicp {

/**
 * @brief KL(N(0, H_ref^-1) || N(0, H_test^-1)) for 6x6 information matrices.
 *
 * = 1/2 (tr(H_test H_ref^-1) - 6 + ln det H_ref - ln det H_test), evaluated
 * with Cholesky factors of both matrices. Clamped at 0.
 */
inline double kld_gaussian(const Matrix6d& h_ref, const Matrix6d& h_test) {
  const Eigen::LLT<Matrix6d> ref(h_ref);
  const Eigen::LLT<Matrix6d> test(h_test);
  if (ref.info() != Eigen::Success || test.info() != Eigen::Success) {
    throw Error(ErrorCode::SingularMatrix, "information matrix is not positive definite");
  }
  // tr(L^-1 H_test L^-T) with H_ref = L L^T.
  const Matrix6d half = ref.matrixL().solve(h_test);
  const Matrix6d whitened = ref.matrixL().solve(half.transpose());
  const double logdet_ref = 2.0 * ref.matrixLLT().diagonal().array().log().sum();
  const double logdet_test = 2.0 * test.matrixLLT().diagonal().array().log().sum();
  const double kld = 0.5 * (whitened.trace() - 6.0 + logdet_ref - logdet_test);
  return std::max(0.0, kld);
}

struct MeanError {
  double trans = 0.0;  // meters
  double rot = 0.0;    // degrees
};

/// Compares mu = H^-1 b of two factors: translation block norm and rotation
/// block norm (converted to degrees) of the difference.
inline MeanError mean_vector_error(const QuadraticFactor& ref, const QuadraticFactor& test) {
  const Eigen::LLT<Matrix6d> ref_llt(ref.H);
  const Eigen::LLT<Matrix6d> test_llt(test.H);
  if (ref_llt.info() != Eigen::Success || test_llt.info() != Eigen::Success) {
    throw Error(ErrorCode::SingularMatrix, "information matrix is not positive definite");
  }
  const Vector6d diff = ref_llt.solve(ref.b) - test_llt.solve(test.b);
  return {diff.head<3>().norm(), rad2deg(diff.tail<3>().norm())};
}

/**
 * @brief Moves a frozen quadratic factor to a new expansion point.
 *
 * With delta = log(q.pose^-1 pose), q(delta + x) gives the surrogate around
 * `pose`: H unchanged, b + H delta, and c + 2 b.delta + delta^T H delta.
 */
inline QuadraticFactor shift_quadratic(const QuadraticFactor& q, const Pose& pose) {
  const Vector6d delta = log(q.linearization_pose.inverse() * pose).vector();
  QuadraticFactor out = q;
  out.b = q.b + q.H * delta;
  out.c = q.evaluate(delta);
  out.linearization_pose = pose;
  return out;
}

/// Root-mean-square position error after rigid (no scale) alignment of the
/// estimated positions onto the ground-truth positions.
inline double ate(const std::vector<Pose>& estimate, const std::vector<Pose>& truth) {
  if (estimate.size() != truth.size() || estimate.empty()) {
    throw Error(ErrorCode::LengthMismatch, "trajectories must be non-empty and equally long");
  }
  const auto n = static_cast<Eigen::Index>(estimate.size());
  Eigen::Matrix3Xd src(3, n);
  Eigen::Matrix3Xd dst(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    src.col(i) = estimate[static_cast<std::size_t>(i)].translation;
    dst.col(i) = truth[static_cast<std::size_t>(i)].translation;
  }
  const Eigen::Matrix4d align = Eigen::umeyama(src, dst, false);
  const Eigen::Matrix3Xd aligned = (align.topLeftCorner<3, 3>() * src).colwise() + align.topRightCorner<3, 1>();
  return std::sqrt((aligned - dst).colwise().squaredNorm().mean());
}

}  // namespace egicp
