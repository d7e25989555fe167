#pragma once

#include <memory>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "egicp/error.hpp"
#include "egicp/kdtree.hpp"

namespace egicp {

struct CovarianceConfig {
  std::size_t k_neighbors = 10;
  // Eigenvalues are replaced by (epsilon, 1, 1) times the largest one.
  double epsilon = 1e-3;
};

/**
 * @brief Point cloud where each point is a Gaussian (mean, covariance).
 *
 * Immutable after construction. Owns a k-d tree over the means which is
 * shared between copies.
 */
class GaussianCloud {
 public:
  GaussianCloud() = default;

  GaussianCloud(std::vector<Eigen::Vector3d> means, std::vector<Eigen::Matrix3d> covariances)
      : covariances_(std::move(covariances)) {
    if (means.size() != covariances_.size()) {
      throw Error(ErrorCode::LengthMismatch, "means and covariances differ in length");
    }
    tree_ = std::make_shared<const KdTree>(std::move(means));
  }

  GaussianCloud(std::shared_ptr<const KdTree> tree, std::vector<Eigen::Matrix3d> covariances)
      : covariances_(std::move(covariances)), tree_(std::move(tree)) {
    if (!tree_ || tree_->size() != covariances_.size()) {
      throw Error(ErrorCode::LengthMismatch, "means and covariances differ in length");
    }
  }

  std::size_t size() const { return covariances_.size(); }
  bool empty() const { return covariances_.empty(); }

  const std::vector<Eigen::Vector3d>& means() const { return tree_ ? tree_->points() : empty_points(); }
  const std::vector<Eigen::Matrix3d>& covariances() const { return covariances_; }
  const Eigen::Vector3d& mean(std::size_t i) const { return tree_->points()[i]; }
  const Eigen::Matrix3d& covariance(std::size_t i) const { return covariances_[i]; }
  const KdTree& nn_index() const { return *tree_; }

 private:
  static const std::vector<Eigen::Vector3d>& empty_points() {
    static const std::vector<Eigen::Vector3d> none;
    return none;
  }

  std::vector<Eigen::Matrix3d> covariances_;
  std::shared_ptr<const KdTree> tree_;
};

/// Replaces the spectrum of a scatter matrix by (epsilon, 1, 1) x its largest eigenvalue.
/// A zero scatter falls back to unit scale.
inline Eigen::Matrix3d regularize_covariance(const Eigen::Matrix3d& scatter, double epsilon) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(scatter);
  const double largest = eig.eigenvalues()(2);
  const double scale = largest > 1e-12 ? largest : 1.0;
  const Eigen::Vector3d values(epsilon * scale, scale, scale);
  const Eigen::Matrix3d& vecs = eig.eigenvectors();
  Eigen::Matrix3d cov = vecs * values.asDiagonal() * vecs.transpose();
  return 0.5 * (cov + cov.transpose());
}

inline GaussianCloud estimate_covariances(const std::vector<Eigen::Vector3d>& points,
                                          const CovarianceConfig& config = {}) {
  const std::size_t k = config.k_neighbors;
  if (k < 4) {
    throw Error(ErrorCode::InvalidArgument, "k_neighbors must be at least 4");
  }
  if (points.size() < k) {
    throw Error(ErrorCode::TooFewPoints,
                std::to_string(points.size()) + " points, need at least " + std::to_string(k));
  }

  auto tree = std::make_shared<const KdTree>(points);
  std::vector<Eigen::Matrix3d> covs(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto neighbors = tree->knn(points[i], k);
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& n : neighbors) {
      mean += points[n.index];
    }
    mean /= static_cast<double>(neighbors.size());
    Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
    for (const auto& n : neighbors) {
      const Eigen::Vector3d d = points[n.index] - mean;
      scatter += d * d.transpose();
    }
    scatter /= static_cast<double>(neighbors.size());
    covs[i] = regularize_covariance(scatter, config.epsilon);
  }
  return GaussianCloud(std::move(tree), std::move(covs));
}

}  // namespace egicp
