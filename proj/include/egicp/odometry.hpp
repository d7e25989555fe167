#pragma once

#include <algorithm>
#include <deque>
#include <map>
#include <memory>
#include <utility>
#include <vector>

#include "egicp/gaussian_cloud.hpp"
#include "egicp/lie.hpp"
#include "egicp/occupancy_grid.hpp"
#include "egicp/pose_graph.hpp"

namespace egicp {

struct OdometryConfig {
  std::size_t preceding_frames = 3;  // N_pre
  std::size_t window_size = 10;      // frames, oldest is anchored
  // A frame becomes a keyframe when its best overlap with existing keyframes is below this.
  double keyframe_overlap_threshold = 0.6;
  // Minimum overlap for creating a factor to a preceding frame or keyframe.
  double factor_overlap_floor = 0.1;
  std::size_t max_keyframes = 20;
  double grid_resolution = 0.5;
  std::size_t overlap_stride = 1;
  OptimizerConfig optimizer;
};

/// Frame with its cloud and occupancy grid, all in the sensor frame.
struct OdometryFrame {
  std::size_t id = 0;
  Pose pose;
  std::shared_ptr<const GaussianCloud> cloud;
  std::shared_ptr<const OccupancyGrid> grid;
  bool degenerate = false;
};

struct OdometryFactor {
  std::size_t target_id = 0;
  std::size_t source_id = 0;
  DeferredState state;
};

struct OdometryState {
  OdometryConfig config;
  std::deque<OdometryFrame> window;
  std::vector<OdometryFrame> keyframes;
  std::vector<OdometryFactor> factors;
  // Latest estimate of every frame pose seen so far, indexed by frame id.
  std::vector<Pose> trajectory;
  std::vector<std::size_t> degenerate_frames;
  bool last_frame_degenerate = false;
  OptimizationReport last_report;

  explicit OdometryState(OdometryConfig cfg = {}) : config(std::move(cfg)) {}
};

namespace detail {

inline const OdometryFrame* find_frame(const OdometryState& state, std::size_t id) {
  for (const auto& f : state.window) {
    if (f.id == id) {
      return &f;
    }
  }
  for (const auto& f : state.keyframes) {
    if (f.id == id) {
      return &f;
    }
  }
  return nullptr;
}

inline void set_pose(OdometryState& state, std::size_t id, const Pose& pose) {
  for (auto& f : state.window) {
    if (f.id == id) {
      f.pose = pose;
    }
  }
  for (auto& f : state.keyframes) {
    if (f.id == id) {
      f.pose = pose;
    }
  }
  state.trajectory.at(id) = pose;
}

inline double frame_overlap(const OdometryFrame& target, const OdometryFrame& source, const Pose& source_pose,
                            std::size_t stride) {
  return overlap(*target.grid, source.cloud->means(), target.pose.inverse() * source_pose, stride);
}

inline void drop_stale_factors(OdometryState& state) {
  std::erase_if(state.factors, [&](const OdometryFactor& f) {
    return find_frame(state, f.target_id) == nullptr || find_frame(state, f.source_id) == nullptr;
  });
}

inline void update_keyframes(OdometryState& state, const OdometryFrame& frame) {
  const auto& cfg = state.config;
  double best = 0.0;
  for (const auto& k : state.keyframes) {
    best = std::max(best, frame_overlap(k, frame, frame.pose, cfg.overlap_stride));
  }
  if (!state.keyframes.empty() && best >= cfg.keyframe_overlap_threshold) {
    return;
  }
  state.keyframes.push_back(frame);
  if (state.keyframes.size() <= cfg.max_keyframes) {
    return;
  }
  // Evict the keyframe (other than the newest) with the largest summed overlap.
  std::size_t victim = 0;
  double worst = -1.0;
  for (std::size_t a = 0; a + 1 < state.keyframes.size(); ++a) {
    double score = 0.0;
    for (std::size_t b = 0; b < state.keyframes.size(); ++b) {
      if (a != b) {
        score += frame_overlap(state.keyframes[b], state.keyframes[a], state.keyframes[a].pose, cfg.overlap_stride);
      }
    }
    if (score > worst) {
      worst = score;
      victim = a;
    }
  }
  state.keyframes.erase(state.keyframes.begin() + static_cast<std::ptrdiff_t>(victim));
}

}  // namespace detail

/**
 * @brief Adds one frame to the sliding-window odometry.
 *
 * The new pose is predicted with a constant-velocity model, GICP factors are
 * created to the preceding frames and keyframes that overlap the prediction,
 * and the window is optimized with the oldest window frame and all
 * out-of-window keyframes held fixed. A frame without any overlapping partner
 * keeps its predicted pose and is flagged as degenerate.
 */
inline void odometry_step(OdometryState& state, std::shared_ptr<const GaussianCloud> cloud) {
  if (!cloud || cloud->empty()) {
    throw Error(ErrorCode::EmptyCloud, "odometry frame is empty");
  }
  const auto& cfg = state.config;

  OdometryFrame frame;
  frame.id = state.trajectory.size();
  frame.cloud = std::move(cloud);
  frame.grid = std::make_shared<const OccupancyGrid>(OccupancyGrid::build(frame.cloud->means(), cfg.grid_resolution));

  const std::size_t n = state.trajectory.size();
  if (n == 0) {
    frame.pose = Pose::identity();
  } else if (n == 1) {
    frame.pose = state.trajectory[0];
  } else {
    const Pose& last = state.trajectory[n - 1];
    const Pose& prev = state.trajectory[n - 2];
    frame.pose = last * (prev.inverse() * last);
  }
  state.trajectory.push_back(frame.pose);

  // Candidate partners: N_pre preceding window frames, then keyframes.
  std::vector<const OdometryFrame*> partners;
  const std::size_t pre = std::min(cfg.preceding_frames, state.window.size());
  for (std::size_t k = 0; k < pre; ++k) {
    partners.push_back(&state.window[state.window.size() - 1 - k]);
  }
  for (const auto& key : state.keyframes) {
    if (std::none_of(partners.begin(), partners.end(), [&](const auto* p) { return p->id == key.id; })) {
      partners.push_back(&key);
    }
  }

  std::vector<std::size_t> new_targets;
  for (const auto* p : partners) {
    if (detail::frame_overlap(*p, frame, frame.pose, cfg.overlap_stride) >= cfg.factor_overlap_floor) {
      new_targets.push_back(p->id);
    }
  }

  state.last_frame_degenerate = false;
  if (n > 0 && new_targets.empty()) {
    frame.degenerate = true;
    state.last_frame_degenerate = true;
    state.degenerate_frames.push_back(frame.id);
  }
  for (auto id : new_targets) {
    state.factors.push_back({id, frame.id, DeferredState{}});
  }
  state.window.push_back(frame);

  if (n > 0 && !new_targets.empty()) {
    // Graph over window frames and keyframes; node order = insertion order.
    PoseGraph graph;
    std::map<std::size_t, std::size_t> node_of;
    std::vector<const OdometryFrame*> nodes;
    for (const auto& f : state.window) {
      node_of[f.id] = graph.add_pose(f.pose);
      nodes.push_back(&f);
    }
    for (const auto& k : state.keyframes) {
      if (!node_of.contains(k.id)) {
        node_of[k.id] = graph.add_pose(k.pose, true);
        nodes.push_back(&k);
      }
    }
    graph.set_fixed(node_of.at(state.window.front().id));

    std::vector<int> degree(graph.size(), 0);
    for (auto& f : state.factors) {
      const auto ti = node_of.at(f.target_id);
      const auto si = node_of.at(f.source_id);
      graph.add_factor(ti, si, nodes[ti]->cloud, nodes[si]->cloud);
      graph.factors().back().state = std::move(f.state);
      degree[ti]++;
      degree[si]++;
    }
    for (std::size_t i = 0; i < graph.size(); ++i) {
      if (degree[i] == 0) {
        graph.set_fixed(i);
      }
    }

    state.last_report = optimize(graph, cfg.optimizer);

    std::vector<OdometryFactor> kept;
    for (std::size_t k = 0; k < state.factors.size(); ++k) {
      if (graph.factors()[k].active) {
        state.factors[k].state = std::move(graph.factors()[k].state);
        kept.push_back(std::move(state.factors[k]));
      }
    }
    state.factors = std::move(kept);
    for (const auto& [id, node] : node_of) {
      detail::set_pose(state, id, graph.pose(node));
    }
  }

  while (state.window.size() > cfg.window_size) {
    state.window.pop_front();
  }
  detail::drop_stale_factors(state);

  if (!state.window.back().degenerate) {
    detail::update_keyframes(state, state.window.back());
  }
}

}  // namespace egicp
