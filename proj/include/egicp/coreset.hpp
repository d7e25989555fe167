#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "egicp/caratheodory.hpp"
#include "egicp/error.hpp"
#include "egicp/gicp.hpp"
#include "egicp/lie.hpp"

namespace egicp {

/// (21 upper-triangle entries of J^T J, 6 of J^T e, 1 of e^T e).
using MomentVector = Eigen::Matrix<double, 28, 1>;

inline constexpr int kMomentDim = 28;
inline constexpr std::size_t kCaratheodoryGroupSize = kMomentDim + 1;

inline MomentVector pack_moments(const Matrix6d& h, const Vector6d& b, double c) {
  MomentVector v;
  int k = 0;
  for (int i = 0; i < 6; ++i) {
    for (int j = i; j < 6; ++j) {
      v(k++) = h(i, j);
    }
  }
  v.segment<6>(21) = b;
  v(27) = c;
  return v;
}

inline MomentVector moment_vector(const PointLinearization& pl) {
  const Matrix6d h = pl.jacobian.transpose() * pl.jacobian;
  const Vector6d b = pl.jacobian.transpose() * pl.residual;
  return pack_moments(h, b, pl.residual.squaredNorm());
}

struct Moments {
  Matrix6d H = Matrix6d::Zero();
  Vector6d b = Vector6d::Zero();
  double c = 0.0;
};

inline Moments unpack_moments(const MomentVector& v) {
  Moments m;
  int k = 0;
  for (int i = 0; i < 6; ++i) {
    for (int j = i; j < 6; ++j) {
      m.H(i, j) = v(k);
      m.H(j, i) = v(k);
      ++k;
    }
  }
  m.b = v.segment<6>(21);
  m.c = v(27);
  return m;
}

/// Weighted subset of source points reproducing (H, b, c) at sampling_pose.
struct Coreset {
  std::vector<std::size_t> indices;  // source point indices
  std::vector<double> weights;
  Pose sampling_pose;

  std::size_t size() const { return indices.size(); }
};

/**
 * @brief Extracts an exact coreset from a residual bank.
 *
 * Bank entries are split into ceil(target_size / 29) contiguous groups and
 * each group is reduced to at most 29 weighted entries by Caratheodory over
 * the 28-dim moment vectors. Moment coordinates are rescaled per group before
 * the reduction; the weighted-sum identity is invariant under that scaling.
 */
inline Coreset extract_coreset(const ResidualBank& bank, std::size_t target_size) {
  if (target_size < kCaratheodoryGroupSize) {
    throw Error(ErrorCode::InvalidArgument, "coreset target size must be at least 29");
  }
  if (bank.entries.empty()) {
    throw Error(ErrorCode::EmptyCloud, "residual bank is empty");
  }

  const std::size_t n = bank.entries.size();
  const std::size_t groups = std::min(n, (target_size + kCaratheodoryGroupSize - 1) / kCaratheodoryGroupSize);

  Coreset cs;
  cs.sampling_pose = bank.pose;
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t begin = g * n / groups;
    const std::size_t end = (g + 1) * n / groups;
    const auto count = static_cast<Eigen::Index>(end - begin);

    Eigen::MatrixXd moments(kMomentDim, count);
    for (Eigen::Index i = 0; i < count; ++i) {
      moments.col(i) = moment_vector(bank.entries[begin + static_cast<std::size_t>(i)]);
    }
    Eigen::VectorXd scale = moments.cwiseAbs().rowwise().maxCoeff();
    for (Eigen::Index r = 0; r < scale.size(); ++r) {
      if (!(scale(r) > 0.0)) {
        scale(r) = 1.0;
      }
    }
    moments = scale.cwiseInverse().asDiagonal() * moments;

    const auto reduced = caratheodory(moments, Eigen::VectorXd::Ones(count));
    for (std::size_t k = 0; k < reduced.indices.size(); ++k) {
      cs.indices.push_back(bank.entries[begin + reduced.indices[k]].source_index);
      cs.weights.push_back(reduced.weights[k]);
    }
  }
  return cs;
}

/// Re-evaluates the coreset points at `pose` with fresh nearest-neighbor
/// correspondences and accumulates the weighted quadratic factor.
inline QuadraticFactor relinearize_coreset(const Coreset& cs, const GaussianCloud& source, const GaussianCloud& target,
                                           const Pose& pose,
                                           double max_corr_dist = kDefaultMaxCorrespondenceDistance,
                                           std::vector<WeightedCorrespondence>* used = nullptr) {
  require_non_empty(source, target);
  QuadraticFactor factor;
  factor.linearization_pose = pose;
  for (std::size_t k = 0; k < cs.indices.size(); ++k) {
    if (cs.indices[k] >= source.size()) {
      throw Error(ErrorCode::InvalidArgument, "coreset index out of range for source cloud");
    }
    const auto corr = find_correspondence(cs.indices[k], source, target, pose, max_corr_dist);
    if (!corr.valid) {
      continue;
    }
    factor.add(linearize_point(source, target, corr, pose), cs.weights[k]);
    if (used) {
      used->push_back(freeze(source, target, corr, pose, cs.weights[k]));
    }
  }
  if (factor.point_count == 0) {
    throw Error(ErrorCode::NoValidCorrespondences, "no coreset point has a target within max_corr_dist");
  }
  return factor;
}

inline double evaluate_coreset_cost(const Coreset& cs, const GaussianCloud& source, const GaussianCloud& target,
                                    const Pose& pose, double max_corr_dist = kDefaultMaxCorrespondenceDistance) {
  require_non_empty(source, target);
  double cost = 0.0;
  std::size_t valid = 0;
  for (std::size_t k = 0; k < cs.indices.size(); ++k) {
    const auto corr = find_correspondence(cs.indices[k], source, target, pose, max_corr_dist);
    if (!corr.valid) {
      continue;
    }
    cost += cs.weights[k] * point_cost(source, target, corr, pose);
    ++valid;
  }
  if (valid == 0) {
    throw Error(ErrorCode::NoValidCorrespondences, "no coreset point has a target within max_corr_dist");
  }
  return cost;
}

// ---------------------------------------------------------------------------
// Deferred sampling

struct DisplacementThreshold {
  double trans = 0.0;  // meters
  double rot = 0.0;    // degrees

  bool contains(const Displacement& d) const { return d.trans < trans && d.rot < rot; }
};

struct DeferredConfig {
  bool enable_coreset = true;
  std::size_t coreset_size = 128;
  double max_corr_dist = kDefaultMaxCorrespondenceDistance;
  // Coreset extraction happens only once the estimate moves less than this
  // between linearizations.
  DisplacementThreshold defer{0.25, 0.25};
  // The coreset is discarded once the estimate leaves this neighborhood of
  // the sampling pose.
  DisplacementThreshold resample{1.0, 1.0};
};

struct EvaluationCounter {
  std::size_t full_linearizations = 0;
  std::size_t coreset_linearizations = 0;
  std::size_t coreset_extractions = 0;
  std::size_t full_cost_evaluations = 0;
  std::size_t coreset_cost_evaluations = 0;
  // Number of per-point residual evaluations across all of the above.
  std::size_t residual_evaluations = 0;

  EvaluationCounter& operator+=(const EvaluationCounter& o) {
    full_linearizations += o.full_linearizations;
    coreset_linearizations += o.coreset_linearizations;
    coreset_extractions += o.coreset_extractions;
    full_cost_evaluations += o.full_cost_evaluations;
    coreset_cost_evaluations += o.coreset_cost_evaluations;
    residual_evaluations += o.residual_evaluations;
    return *this;
  }
};

enum class DeferredPhase { Empty, FullCached, CoresetActive };

inline const char* to_string(DeferredPhase p) {
  switch (p) {
    case DeferredPhase::Empty: return "Empty";
    case DeferredPhase::FullCached: return "FullCached";
    case DeferredPhase::CoresetActive: return "CoresetActive";
  }
  return "Unknown";
}

/// Per-factor linearization cache. Not safe to share between threads.
struct DeferredState {
  DeferredPhase phase = DeferredPhase::Empty;
  std::optional<ResidualBank> bank;
  std::optional<Coreset> coreset;
  EvaluationCounter counter;
  // Whether the most recent linearization used the coreset.
  bool last_used_coreset = false;
  // Correspondences and weights behind the most recent linearization.
  std::vector<WeightedCorrespondence> active;
};

namespace detail {

inline QuadraticFactor full_relinearize(DeferredState& state, const GaussianCloud& source, const GaussianCloud& target,
                                        const Pose& pose, const DeferredConfig& config) {
  auto full = linearize_full(source, target, pose, config.max_corr_dist);
  state.counter.full_linearizations++;
  state.counter.residual_evaluations += source.size();
  state.bank = std::move(full.bank);
  state.active.clear();
  for (const auto& corr : state.bank->correspondences) {
    if (corr.valid) {
      state.active.push_back(freeze(source, target, corr, pose));
    }
  }
  state.coreset.reset();
  state.phase = DeferredPhase::FullCached;
  state.last_used_coreset = false;
  return full.factor;
}

inline QuadraticFactor coreset_relinearize(DeferredState& state, const GaussianCloud& source,
                                           const GaussianCloud& target, const Pose& pose,
                                           const DeferredConfig& config) {
  state.active.clear();
  auto factor = relinearize_coreset(*state.coreset, source, target, pose, config.max_corr_dist, &state.active);
  state.counter.coreset_linearizations++;
  state.counter.residual_evaluations += state.coreset->size();
  state.phase = DeferredPhase::CoresetActive;
  state.last_used_coreset = true;
  return factor;
}

}  // namespace detail

/**
 * @brief Linearizes a GICP factor at `pose`, extracting and reusing a coreset
 * once successive linearization points settle.
 *
 * Empty -> full linearization, bank cached.
 * FullCached -> if the pose moved less than `defer` from the bank pose, a
 * coreset is extracted from the bank and re-linearized at `pose`; otherwise a
 * full re-linearization refreshes the bank.
 * CoresetActive -> the coreset is reused while the pose stays within
 * `resample` of the sampling pose; otherwise full re-linearization.
 */
inline QuadraticFactor deferred_linearize(DeferredState& state, const GaussianCloud& source,
                                          const GaussianCloud& target, const Pose& pose,
                                          const DeferredConfig& config = {}) {
  if (!config.enable_coreset) {
    return detail::full_relinearize(state, source, target, pose, config);
  }

  switch (state.phase) {
    case DeferredPhase::Empty:
      return detail::full_relinearize(state, source, target, pose, config);

    case DeferredPhase::FullCached:
      if (config.defer.contains(displacement(state.bank->pose, pose))) {
        state.coreset = extract_coreset(*state.bank, config.coreset_size);
        state.counter.coreset_extractions++;
        return detail::coreset_relinearize(state, source, target, pose, config);
      }
      return detail::full_relinearize(state, source, target, pose, config);

    case DeferredPhase::CoresetActive:
      if (config.resample.contains(displacement(state.coreset->sampling_pose, pose))) {
        return detail::coreset_relinearize(state, source, target, pose, config);
      }
      return detail::full_relinearize(state, source, target, pose, config);
  }
  return detail::full_relinearize(state, source, target, pose, config);
}

/// Cost at `pose` over the residual set of the latest linearization, with its
/// correspondences and whitening held fixed. Used to accept or reject LM steps.
inline double deferred_evaluate(DeferredState& state, const GaussianCloud& source, const GaussianCloud& target,
                                const Pose& pose) {
  if (state.active.empty()) {
    throw Error(ErrorCode::InvalidArgument, "deferred_evaluate needs a prior linearization");
  }
  if (state.last_used_coreset) {
    state.counter.coreset_cost_evaluations++;
  } else {
    state.counter.full_cost_evaluations++;
  }
  state.counter.residual_evaluations += state.active.size();
  double cost = 0.0;
  for (const auto& wc : state.active) {
    cost += frozen_cost(source, target, wc, pose);
  }
  return cost;
}

}  // namespace egicp
