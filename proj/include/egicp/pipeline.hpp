#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Core>

#include "egicp/error.hpp"
#include "egicp/gaussian_cloud.hpp"
#include "egicp/global_mapping.hpp"
#include "egicp/io.hpp"
#include "egicp/lie.hpp"
#include "egicp/odometry.hpp"
#include "egicp/pose_graph.hpp"

namespace egicp {

struct PipelineConfig {
  CovarianceConfig covariance;
  OdometryConfig odometry;
  std::size_t submap_interval = 10;  // frames per submap
  double submap_voxel_size = 0.2;    // 0 disables downsampling
  double submap_overlap_threshold = kDefaultSubmapOverlapThreshold;
  OptimizerConfig global_optimizer;
  double frame_interval = 0.1;  // seconds between scans, for output timestamps
};

namespace detail {

struct ConfigBinding {
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw Error(ErrorCode::InvalidArgument, "config key '" + key + "': cannot parse '" + text + "'");
  }
  return value;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw Error(ErrorCode::InvalidArgument, "config key '" + key + "': expected true or false");
}

template <typename T>
ConfigBinding bind(const std::string& key, T& field) {
  ConfigBinding b;
  if constexpr (std::is_same_v<T, bool>) {
    b.set = [key, &field](const std::string& v) { field = parse_bool(key, v); };
    b.get = [&field] { return std::string(field ? "true" : "false"); };
  } else {
    b.set = [key, &field](const std::string& v) { field = parse_number<T>(key, v); };
    b.get = [&field] {
      std::ostringstream out;
      out << std::setprecision(std::numeric_limits<double>::max_digits10) << field;
      return out.str();
    };
  }
  return b;
}

inline std::map<std::string, ConfigBinding> config_bindings(PipelineConfig& c) {
  auto& odo = c.odometry;
  auto& lin = odo.optimizer.linearization;
  std::map<std::string, ConfigBinding> m;
  m["covariance.k_neighbors"] = bind("covariance.k_neighbors", c.covariance.k_neighbors);
  m["covariance.epsilon"] = bind("covariance.epsilon", c.covariance.epsilon);
  m["odometry.preceding_frames"] = bind("odometry.preceding_frames", odo.preceding_frames);
  m["odometry.window_size"] = bind("odometry.window_size", odo.window_size);
  m["odometry.keyframe_overlap_threshold"] =
      bind("odometry.keyframe_overlap_threshold", odo.keyframe_overlap_threshold);
  m["odometry.factor_overlap_floor"] = bind("odometry.factor_overlap_floor", odo.factor_overlap_floor);
  m["odometry.max_keyframes"] = bind("odometry.max_keyframes", odo.max_keyframes);
  m["grid.resolution"] = bind("grid.resolution", odo.grid_resolution);
  m["grid.overlap_stride"] = bind("grid.overlap_stride", odo.overlap_stride);
  m["coreset.enable"] = bind("coreset.enable", lin.enable_coreset);
  m["coreset.size"] = bind("coreset.size", lin.coreset_size);
  m["coreset.defer_trans"] = bind("coreset.defer_trans", lin.defer.trans);
  m["coreset.defer_rot"] = bind("coreset.defer_rot", lin.defer.rot);
  m["coreset.resample_trans"] = bind("coreset.resample_trans", lin.resample.trans);
  m["coreset.resample_rot"] = bind("coreset.resample_rot", lin.resample.rot);
  m["gicp.max_corr_dist"] = bind("gicp.max_corr_dist", lin.max_corr_dist);
  m["optimizer.max_iterations"] = bind("optimizer.max_iterations", odo.optimizer.max_iterations);
  m["optimizer.lambda_init"] = bind("optimizer.lambda_init", odo.optimizer.lambda_init);
  m["optimizer.relative_decrease_tol"] = bind("optimizer.relative_decrease_tol", odo.optimizer.relative_decrease_tol);
  m["optimizer.step_tol"] = bind("optimizer.step_tol", odo.optimizer.step_tol);
  m["submap.interval"] = bind("submap.interval", c.submap_interval);
  m["submap.voxel_size"] = bind("submap.voxel_size", c.submap_voxel_size);
  m["submap.overlap_threshold"] = bind("submap.overlap_threshold", c.submap_overlap_threshold);
  m["global.max_iterations"] = bind("global.max_iterations", c.global_optimizer.max_iterations);
  m["frame_interval"] = bind("frame_interval", c.frame_interval);
  return m;
}

}  // namespace detail

/// Every configurable key with its current value.
inline ConfigMap to_config_map(PipelineConfig config) {
  ConfigMap out;
  for (const auto& [key, binding] : detail::config_bindings(config)) {
    out[key] = binding.get();
  }
  return out;
}

/// Overrides fields from `values`; unknown keys are rejected. The global
/// optimizer inherits the odometry optimizer settings except its iteration cap.
inline PipelineConfig apply_config(PipelineConfig config, const ConfigMap& values) {
  auto bindings = detail::config_bindings(config);
  for (const auto& [key, value] : values) {
    const auto it = bindings.find(key);
    if (it == bindings.end()) {
      throw Error(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
    }
    it->second.set(value);
  }
  const int global_iters = config.global_optimizer.max_iterations;
  config.global_optimizer = config.odometry.optimizer;
  config.global_optimizer.max_iterations = global_iters;
  if (config.submap_interval == 0) {
    throw Error(ErrorCode::InvalidArgument, "submap.interval must be at least 1");
  }
  if (config.submap_voxel_size < 0.0 || !(config.odometry.grid_resolution > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "voxel sizes must be positive");
  }
  return config;
}

/// Centroid of the points in every occupied voxel, ordered by voxel coordinate.
inline std::vector<Eigen::Vector3d> voxel_downsample(const std::vector<Eigen::Vector3d>& points, double voxel) {
  if (!(voxel > 0.0)) {
    return points;
  }
  std::map<std::array<std::int64_t, 3>, std::pair<Eigen::Vector3d, int>> cells;
  for (const auto& p : points) {
    const std::array<std::int64_t, 3> key{static_cast<std::int64_t>(std::floor(p.x() / voxel)),
                                          static_cast<std::int64_t>(std::floor(p.y() / voxel)),
                                          static_cast<std::int64_t>(std::floor(p.z() / voxel))};
    auto& [sum, count] = cells.try_emplace(key, Eigen::Vector3d::Zero(), 0).first->second;
    sum += p;
    ++count;
  }
  std::vector<Eigen::Vector3d> out;
  out.reserve(cells.size());
  for (const auto& [key, cell] : cells) {
    out.push_back(cell.first / cell.second);
  }
  return out;
}

struct PipelineResult {
  std::vector<Pose> odometry;  // per frame
  std::vector<Pose> global;    // per frame, after submap optimization
  std::vector<std::size_t> degenerate_frames;
  std::size_t submap_count = 0;
  std::size_t global_factor_count = 0;
  OptimizationReport global_report;
};

inline std::vector<TrajectoryRecord> to_records(const std::vector<Pose>& poses, double frame_interval) {
  std::vector<TrajectoryRecord> out;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    out.push_back({static_cast<double>(i) * frame_interval, poses[i]});
  }
  return out;
}

/**
 * @brief Odometry over all scans, then a dense submap graph.
 *
 * Every submap_interval consecutive frames are merged into one submap posed
 * at its first frame. After the global optimization each frame keeps its
 * odometry pose relative to its submap origin.
 */
inline PipelineResult run_pipeline(const std::vector<std::vector<Eigen::Vector3d>>& scans,
                                   const PipelineConfig& config = {}) {
  if (scans.empty()) {
    throw Error(ErrorCode::EmptyCloud, "pipeline needs at least one scan");
  }
  OdometryState odom(config.odometry);
  for (const auto& scan : scans) {
    odometry_step(odom, std::make_shared<const GaussianCloud>(estimate_covariances(scan, config.covariance)));
  }

  PipelineResult result;
  result.odometry = odom.trajectory;
  result.degenerate_frames = odom.degenerate_frames;
  result.global = odom.trajectory;

  const std::size_t n = scans.size();
  std::vector<Submap> submaps;
  for (std::size_t first = 0; first < n; first += config.submap_interval) {
    const std::size_t last = std::min(n, first + config.submap_interval);
    const Pose origin_inv = odom.trajectory[first].inverse();
    std::vector<Eigen::Vector3d> merged;
    for (std::size_t k = first; k < last; ++k) {
      const Pose rel = origin_inv * odom.trajectory[k];
      for (const auto& p : scans[k]) {
        merged.push_back(rel * p);
      }
    }
    merged = voxel_downsample(merged, config.submap_voxel_size);
    auto cloud = std::make_shared<const GaussianCloud>(estimate_covariances(merged, config.covariance));
    submaps.push_back(Submap::create(std::move(cloud), odom.trajectory[first], config.odometry.grid_resolution));
  }
  result.submap_count = submaps.size();
  if (submaps.size() < 2) {
    return result;
  }

  PoseGraph graph = build_global_graph(submaps, config.submap_overlap_threshold, config.odometry.overlap_stride);
  result.global_factor_count = graph.factors().size();
  if (graph.factors().empty()) {
    return result;
  }
  result.global_report = optimize(graph, config.global_optimizer);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t s = k / config.submap_interval;
    const std::size_t first = s * config.submap_interval;
    result.global[k] = graph.pose(s) * (odom.trajectory[first].inverse() * odom.trajectory[k]);
  }
  return result;
}

}  // namespace egicp
