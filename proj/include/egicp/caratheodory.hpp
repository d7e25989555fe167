#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>
#include <Eigen/QR>

#include "egicp/error.hpp"

namespace egicp {

/// Selected input indices (ascending) and their new positive weights.
struct CaratheodoryResult {
  std::vector<std::size_t> indices;
  std::vector<double> weights;
};

namespace detail {

inline void check_caratheodory_input(const Eigen::MatrixXd& points, const Eigen::VectorXd& weights) {
  if (points.cols() == 0 || points.rows() == 0) {
    throw Error(ErrorCode::InvalidArgument, "caratheodory needs n >= 1 points of dimension d >= 1");
  }
  if (weights.size() != points.cols()) {
    throw Error(ErrorCode::LengthMismatch, "one weight per point required");
  }
  if (!(weights.array() > 0.0).all()) {
    throw Error(ErrorCode::InvalidArgument, "weights must be positive");
  }
}

// Elimination over a working set. `active` holds column ids into `points`,
// `w` holds their weights (same order). On return active.size() <= d + 1.
inline void caratheodory_eliminate(const Eigen::MatrixXd& points, std::vector<std::size_t>& active,
                                   std::vector<double>& w) {
  const auto d = points.rows();
  const auto m = static_cast<std::size_t>(d + 2);
  Eigen::MatrixXd diff_t(d + 1, d);
  Eigen::VectorXd alpha(d + 2);

  while (active.size() > static_cast<std::size_t>(d + 1)) {
    // Any d + 2 points are affinely dependent; take the first d + 2 of the set.
    for (std::size_t i = 1; i < m; ++i) {
      diff_t.row(static_cast<Eigen::Index>(i - 1)) = (points.col(active[i]) - points.col(active[0])).transpose();
    }
    // The last column of Q is orthogonal to range(diff_t), i.e. in null(diff_t^T).
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(diff_t);
    const Eigen::VectorXd null = qr.householderQ() * Eigen::VectorXd::Unit(d + 1, d);
    alpha.tail(d + 1) = null;
    alpha(0) = -null.sum();

    if (alpha.maxCoeff() <= 0.0) {
      alpha = -alpha;
    }

    double lambda = std::numeric_limits<double>::infinity();
    std::size_t argmin = m;
    for (std::size_t i = 0; i < m; ++i) {
      if (alpha(static_cast<Eigen::Index>(i)) > 0.0) {
        const double ratio = w[i] / alpha(static_cast<Eigen::Index>(i));
        if (ratio < lambda) {
          lambda = ratio;
          argmin = i;
        }
      }
    }
    if (argmin == m || !std::isfinite(lambda)) {
      throw Error(ErrorCode::NumericalDegeneracy, "null-space search failed to reduce the point set");
    }

    for (std::size_t i = 0; i < m; ++i) {
      w[i] -= lambda * alpha(static_cast<Eigen::Index>(i));
    }
    w[argmin] = 0.0;

    std::size_t out = 0;
    for (std::size_t i = 0; i < active.size(); ++i) {
      if (w[i] > 0.0) {
        active[out] = active[i];
        w[out] = w[i];
        ++out;
      }
    }
    active.resize(out);
    w.resize(out);
  }
}

// Keeps eliminating while the remaining points are affinely dependent, so
// degenerate inputs (e.g. repeated vectors) shrink below d + 1.
inline void eliminate_dependent(const Eigen::MatrixXd& points, std::vector<std::size_t>& active,
                                std::vector<double>& w) {
  const auto d = points.rows();
  while (active.size() > 1) {
    const auto k = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd diff(d, k - 1);
    for (Eigen::Index i = 1; i < k; ++i) {
      diff.col(i - 1) = points.col(active[static_cast<std::size_t>(i)]) - points.col(active[0]);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(diff);
    if (lu.rank() == k - 1) {
      return;
    }
    Eigen::VectorXd alpha(k);
    const Eigen::VectorXd null = lu.kernel().col(0);
    if ((diff * null).norm() > 1e-12 * std::max(1.0, diff.norm()) * null.norm()) {
      return;
    }
    alpha.tail(k - 1) = null;
    alpha(0) = -null.sum();
    if (alpha.maxCoeff() <= 0.0) {
      alpha = -alpha;
    }
    double lambda = std::numeric_limits<double>::infinity();
    std::size_t argmin = active.size();
    for (std::size_t i = 0; i < active.size(); ++i) {
      const double a = alpha(static_cast<Eigen::Index>(i));
      if (a > 0.0 && w[i] / a < lambda) {
        lambda = w[i] / a;
        argmin = i;
      }
    }
    if (argmin == active.size()) {
      return;
    }
    for (std::size_t i = 0; i < active.size(); ++i) {
      w[i] -= lambda * alpha(static_cast<Eigen::Index>(i));
    }
    w[argmin] = 0.0;
    std::size_t out = 0;
    for (std::size_t i = 0; i < active.size(); ++i) {
      if (w[i] > 0.0) {
        active[out] = active[i];
        w[out] = w[i];
        ++out;
      }
    }
    active.resize(out);
    w.resize(out);
  }
}

inline CaratheodoryResult sorted_result(std::vector<std::size_t> idx, std::vector<double> w, double scale) {
  std::vector<std::size_t> perm(idx.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) { return idx[a] < idx[b]; });
  CaratheodoryResult r;
  r.indices.reserve(idx.size());
  r.weights.reserve(idx.size());
  for (auto p : perm) {
    r.indices.push_back(idx[p]);
    r.weights.push_back(w[p] * scale);
  }
  return r;
}

inline CaratheodoryResult unchanged(const Eigen::VectorXd& weights) {
  CaratheodoryResult r;
  r.indices.resize(static_cast<std::size_t>(weights.size()));
  std::iota(r.indices.begin(), r.indices.end(), std::size_t{0});
  r.weights.assign(weights.data(), weights.data() + weights.size());
  return r;
}

}  // namespace detail

/**
 * @brief Textbook Caratheodory reduction.
 *
 * Columns of `points` are n vectors in R^d. Returns at most d + 1 of them with
 * positive weights such that both the weighted sum of vectors and the sum of
 * weights are preserved. Inputs with n <= d + 1 are returned unchanged.
 * Cost O((n - d) d^3).
 */
inline CaratheodoryResult caratheodory_basic(const Eigen::MatrixXd& points, const Eigen::VectorXd& weights) {
  detail::check_caratheodory_input(points, weights);
  const auto n = static_cast<std::size_t>(points.cols());
  if (n <= static_cast<std::size_t>(points.rows() + 1)) {
    return detail::unchanged(weights);
  }
  const double total = weights.sum();

  std::vector<std::size_t> active(n);
  std::iota(active.begin(), active.end(), std::size_t{0});
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = weights(static_cast<Eigen::Index>(i)) / total;
  }
  detail::caratheodory_eliminate(points, active, w);
  detail::eliminate_dependent(points, active, w);
  return detail::sorted_result(std::move(active), std::move(w), total);
}

/**
 * @brief Recursive Caratheodory reduction with near-linear cost in n.
 *
 * Splits the working set into 2(d+1) contiguous clusters, reduces the
 * weighted cluster means with the basic elimination, keeps the points of the
 * surviving clusters with rescaled weights and repeats. Same contract as
 * caratheodory_basic.
 */
inline CaratheodoryResult caratheodory(const Eigen::MatrixXd& points, const Eigen::VectorXd& weights) {
  detail::check_caratheodory_input(points, weights);
  const auto d = points.rows();
  const auto n = static_cast<std::size_t>(points.cols());
  const auto cluster_count = static_cast<std::size_t>(2 * (d + 1));
  if (n <= static_cast<std::size_t>(d + 1)) {
    return detail::unchanged(weights);
  }
  const double total = weights.sum();

  std::vector<std::size_t> active(n);
  std::iota(active.begin(), active.end(), std::size_t{0});
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = weights(static_cast<Eigen::Index>(i)) / total;
  }

  Eigen::MatrixXd means(d, static_cast<Eigen::Index>(cluster_count));
  while (active.size() > cluster_count) {
    const std::size_t m = active.size();
    std::vector<std::size_t> bounds(cluster_count + 1);
    for (std::size_t c = 0; c <= cluster_count; ++c) {
      bounds[c] = c * m / cluster_count;
    }

    std::vector<double> cluster_weight(cluster_count, 0.0);
    means.setZero();
    for (std::size_t c = 0; c < cluster_count; ++c) {
      for (std::size_t i = bounds[c]; i < bounds[c + 1]; ++i) {
        cluster_weight[c] += w[i];
        means.col(static_cast<Eigen::Index>(c)) += w[i] * points.col(active[i]);
      }
      means.col(static_cast<Eigen::Index>(c)) /= cluster_weight[c];
    }

    std::vector<std::size_t> clusters(cluster_count);
    std::iota(clusters.begin(), clusters.end(), std::size_t{0});
    std::vector<double> new_weight = cluster_weight;
    detail::caratheodory_eliminate(means, clusters, new_weight);

    std::vector<std::size_t> next_active;
    std::vector<double> next_w;
    next_active.reserve(m / 2 + cluster_count);
    next_w.reserve(m / 2 + cluster_count);
    for (std::size_t k = 0; k < clusters.size(); ++k) {
      const std::size_t c = clusters[k];
      const double ratio = new_weight[k] / cluster_weight[c];
      for (std::size_t i = bounds[c]; i < bounds[c + 1]; ++i) {
        next_active.push_back(active[i]);
        next_w.push_back(w[i] * ratio);
      }
    }
    active = std::move(next_active);
    w = std::move(next_w);
  }

  detail::caratheodory_eliminate(points, active, w);
  detail::eliminate_dependent(points, active, w);
  return detail::sorted_result(std::move(active), std::move(w), total);
}

}  // namespace egicp
