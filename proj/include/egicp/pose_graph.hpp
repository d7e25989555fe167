#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "egicp/coreset.hpp"
#include "egicp/error.hpp"
#include "egicp/gaussian_cloud.hpp"
#include "egicp/gicp.hpp"
#include "egicp/lie.hpp"

namespace egicp {

using Matrix612d = Eigen::Matrix<double, 6, 12>;
using Matrix12d = Eigen::Matrix<double, 12, 12>;
using Vector12d = Eigen::Matrix<double, 12, 1>;

/// d(T_i^-1 T_j) w.r.t. right perturbations of (T_i, T_j), evaluated at the
/// current poses: dx_ij = -Ad(T_ij^-1) dx_i + dx_j.
inline Matrix612d relative_pose_jacobian(const Pose& pose_i, const Pose& pose_j) {
  const Pose rel = pose_i.inverse() * pose_j;
  Matrix612d g;
  g.leftCols<6>() = -rel.inverse().adjoint();
  g.rightCols<6>() = Matrix6d::Identity();
  return g;
}

/// Quadratic over the stacked perturbation (dx_i, dx_j).
struct LiftedFactor {
  Matrix12d H = Matrix12d::Zero();
  Vector12d b = Vector12d::Zero();
  double c = 0.0;
};

inline LiftedFactor lift_relative_factor(const QuadraticFactor& q, const Pose& pose_i, const Pose& pose_j) {
  const Matrix612d g = relative_pose_jacobian(pose_i, pose_j);
  LiftedFactor lifted;
  lifted.H = g.transpose() * q.H * g;
  lifted.b = g.transpose() * q.b;
  lifted.c = q.c;
  return lifted;
}

/// GICP factor between target cloud (pose i) and source cloud (pose j),
/// residuals f(P_i, P_j, T_i^-1 T_j).
struct GicpFactor {
  std::size_t target = 0;
  std::size_t source = 0;
  std::shared_ptr<const GaussianCloud> target_cloud;
  std::shared_ptr<const GaussianCloud> source_cloud;
  DeferredState state;
  bool active = true;
};

class PoseGraph {
 public:
  std::size_t add_pose(const Pose& pose, bool fixed = false) {
    poses_.push_back(pose);
    fixed_.push_back(fixed);
    return poses_.size() - 1;
  }

  std::size_t add_factor(std::size_t target, std::size_t source, std::shared_ptr<const GaussianCloud> target_cloud,
                         std::shared_ptr<const GaussianCloud> source_cloud) {
    if (target >= poses_.size() || source >= poses_.size() || target == source) {
      throw Error(ErrorCode::InvalidArgument, "factor references a missing pose or a self-loop");
    }
    if (!target_cloud || !source_cloud || target_cloud->empty() || source_cloud->empty()) {
      throw Error(ErrorCode::EmptyCloud, "factor clouds must be non-empty");
    }
    GicpFactor f;
    f.target = target;
    f.source = source;
    f.target_cloud = std::move(target_cloud);
    f.source_cloud = std::move(source_cloud);
    factors_.push_back(std::move(f));
    return factors_.size() - 1;
  }

  /// Anchors a pose; anchored poses are never modified by the optimizer.
  void set_fixed(std::size_t i, bool fixed = true) { fixed_.at(i) = fixed; }
  bool is_fixed(std::size_t i) const { return fixed_.at(i); }

  std::size_t size() const { return poses_.size(); }
  const std::vector<Pose>& poses() const { return poses_; }
  const Pose& pose(std::size_t i) const { return poses_.at(i); }
  void set_pose(std::size_t i, const Pose& p) { poses_.at(i) = p; }

  std::vector<GicpFactor>& factors() { return factors_; }
  const std::vector<GicpFactor>& factors() const { return factors_; }

  bool gauge_fixed() const {
    for (bool f : fixed_) {
      if (f) {
        return true;
      }
    }
    return false;
  }

 private:
  std::vector<Pose> poses_;
  std::vector<bool> fixed_;
  std::vector<GicpFactor> factors_;
};

struct OptimizerConfig {
  int max_iterations = 50;
  double lambda_init = 1e-6;
  double max_lambda = 1e10;
  double relative_decrease_tol = 1e-9;
  double step_tol = 1e-10;
  // Evaluate the cost with every residual at the final poses (not counted).
  bool evaluate_final_cost = true;
  DeferredConfig linearization;
};

enum class Termination { MaxIterations, RelativeDecrease, SmallStep, ZeroCost, NoImprovement };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::MaxIterations: return "max_iterations";
    case Termination::RelativeDecrease: return "relative_decrease";
    case Termination::SmallStep: return "small_step";
    case Termination::ZeroCost: return "zero_cost";
    case Termination::NoImprovement: return "no_improvement";
  }
  return "unknown";
}

struct OptimizationReport {
  int iterations = 0;
  std::vector<double> costs;           // at each linearization, fresh correspondences
  std::vector<double> accepted_costs;  // after each accepted step, same residual set as costs[k]
  double final_cost = 0.0;       // last accepted cost in the active representation
  double final_full_cost = std::numeric_limits<double>::quiet_NaN();
  double initial_gradient_norm = 0.0;
  double last_gradient_norm = 0.0;
  EvaluationCounter evaluations;
  std::size_t residual_evaluations_after_first_iteration = 0;
  std::vector<std::string> warnings;
  std::size_t dropped_factors = 0;
  Termination termination = Termination::MaxIterations;
};

namespace detail {

inline EvaluationCounter sum_counters(const PoseGraph& graph) {
  EvaluationCounter total;
  for (const auto& f : graph.factors()) {
    total += f.state.counter;
  }
  return total;
}

inline EvaluationCounter difference(const EvaluationCounter& a, const EvaluationCounter& b) {
  EvaluationCounter d;
  d.full_linearizations = a.full_linearizations - b.full_linearizations;
  d.coreset_linearizations = a.coreset_linearizations - b.coreset_linearizations;
  d.coreset_extractions = a.coreset_extractions - b.coreset_extractions;
  d.full_cost_evaluations = a.full_cost_evaluations - b.full_cost_evaluations;
  d.coreset_cost_evaluations = a.coreset_cost_evaluations - b.coreset_cost_evaluations;
  d.residual_evaluations = a.residual_evaluations - b.residual_evaluations;
  return d;
}

}  // namespace detail

/// Full-residual cost of all active factors at the graph's current poses.
inline double total_full_cost(const PoseGraph& graph, double max_corr_dist = kDefaultMaxCorrespondenceDistance) {
  double cost = 0.0;
  for (const auto& f : graph.factors()) {
    if (!f.active) {
      continue;
    }
    const Pose rel = graph.pose(f.target).inverse() * graph.pose(f.source);
    cost += evaluate_cost(*f.source_cloud, *f.target_cloud, rel, max_corr_dist);
  }
  return cost;
}

/**
 * @brief Levenberg-Marquardt over the non-fixed poses of the graph.
 *
 * Each factor is linearized through its deferred state at the current
 * relative pose and lifted onto the two absolute poses. Damping is
 * lambda * diag(H); a step is accepted only if it lowers the cost measured
 * with the same residual set that produced the linearization.
 */
inline OptimizationReport optimize(PoseGraph& graph, const OptimizerConfig& config = {}) {
  if (!graph.gauge_fixed()) {
    throw Error(ErrorCode::InvalidArgument, "pose graph needs at least one fixed pose");
  }

  // Variable layout over free poses.
  std::vector<int> slot(graph.size(), -1);
  int free_count = 0;
  for (std::size_t i = 0; i < graph.size(); ++i) {
    if (!graph.is_fixed(i)) {
      slot[i] = free_count++;
    }
  }

  OptimizationReport report;
  const auto counters_at_start = detail::sum_counters(graph);
  const auto dim = static_cast<Eigen::Index>(6 * free_count);
  double lambda = config.lambda_init;

  const auto trial_cost = [&](const std::vector<Pose>& poses) {
    double cost = 0.0;
    for (auto& f : graph.factors()) {
      if (!f.active) {
        continue;
      }
      const Pose rel = poses[f.target].inverse() * poses[f.source];
      cost += deferred_evaluate(f.state, *f.source_cloud, *f.target_cloud, rel);
    }
    return cost;
  };

  std::optional<std::size_t> evaluations_before_second;
  for (int iter = 0; iter < config.max_iterations; ++iter) {
    if (iter == 1) {
      evaluations_before_second = detail::sum_counters(graph).residual_evaluations;
    }
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(dim);
    double cost = 0.0;

    for (auto& f : graph.factors()) {
      if (!f.active) {
        continue;
      }
      const Pose& ti = graph.pose(f.target);
      const Pose& tj = graph.pose(f.source);
      QuadraticFactor q;
      try {
        q = deferred_linearize(f.state, *f.source_cloud, *f.target_cloud, ti.inverse() * tj, config.linearization);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NoValidCorrespondences) {
          throw;
        }
        f.active = false;
        report.dropped_factors++;
        report.warnings.push_back("factor (" + std::to_string(f.target) + ", " + std::to_string(f.source) +
                                  ") dropped: no valid correspondences");
        continue;
      }
      const auto lifted = lift_relative_factor(q, ti, tj);
      cost += lifted.c;
      const int si = slot[f.target];
      const int sj = slot[f.source];
      const int blocks[2] = {si, sj};
      for (int r = 0; r < 2; ++r) {
        if (blocks[r] < 0) {
          continue;
        }
        b.segment<6>(6 * blocks[r]) += lifted.b.segment<6>(6 * r);
        for (int c = 0; c < 2; ++c) {
          if (blocks[c] < 0) {
            continue;
          }
          h.block<6, 6>(6 * blocks[r], 6 * blocks[c]) += lifted.H.block<6, 6>(6 * r, 6 * c);
        }
      }
    }

    report.costs.push_back(cost);
    report.iterations = iter + 1;
    report.final_cost = cost;
    report.last_gradient_norm = b.norm();
    if (iter == 0) {
      report.initial_gradient_norm = b.norm();
    }
    if (cost <= 0.0 || dim == 0) {
      report.termination = Termination::ZeroCost;
      break;
    }

    bool accepted = false;
    bool small_step = false;
    bool converged = false;
    while (!accepted) {
      Eigen::MatrixXd damped = h;
      damped.diagonal() += lambda * h.diagonal();
      Eigen::LLT<Eigen::MatrixXd> llt(damped);
      if (llt.info() != Eigen::Success) {
        lambda *= 10.0;
        if (lambda > config.max_lambda) {
          throw Error(ErrorCode::SingularSystem, "normal equations are rank deficient after damping");
        }
        continue;
      }
      const Eigen::VectorXd delta = llt.solve(-b);
      if (!delta.allFinite()) {
        throw Error(ErrorCode::SingularSystem, "non-finite update");
      }
      if (delta.norm() < config.step_tol) {
        small_step = true;
        break;
      }

      std::vector<Pose> candidate = graph.poses();
      for (std::size_t i = 0; i < graph.size(); ++i) {
        if (slot[i] >= 0) {
          candidate[i] = boxplus(candidate[i], Twist(Vector6d(delta.segment<6>(6 * slot[i]))));
          candidate[i].rotation = orthonormalize(candidate[i].rotation);
        }
      }
      const double new_cost = trial_cost(candidate);
      if (new_cost < cost) {
        accepted = true;
        for (std::size_t i = 0; i < graph.size(); ++i) {
          if (slot[i] >= 0) {
            graph.set_pose(i, candidate[i]);
          }
        }
        report.final_cost = new_cost;
        report.accepted_costs.push_back(new_cost);
        lambda = std::max(lambda / 10.0, 1e-12);
        converged = (cost - new_cost) / cost < config.relative_decrease_tol;
      } else {
        lambda *= 10.0;
        if (lambda > config.max_lambda) {
          break;
        }
      }
    }

    if (small_step) {
      report.termination = Termination::SmallStep;
      break;
    }
    if (!accepted) {
      report.termination = Termination::NoImprovement;
      break;
    }
    if (converged) {
      report.termination = Termination::RelativeDecrease;
      break;
    }
  }

  const auto counters_end = detail::sum_counters(graph);
  report.evaluations = detail::difference(counters_end, counters_at_start);
  if (evaluations_before_second) {
    report.residual_evaluations_after_first_iteration = counters_end.residual_evaluations - *evaluations_before_second;
  }

  if (config.evaluate_final_cost) {
    report.final_full_cost = total_full_cost(graph, config.linearization.max_corr_dist);
  }
  return report;
}

}  // namespace egicp
