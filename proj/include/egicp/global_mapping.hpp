#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "egicp/gaussian_cloud.hpp"
#include "egicp/lie.hpp"
#include "egicp/occupancy_grid.hpp"
#include "egicp/pose_graph.hpp"

namespace egicp {

inline constexpr double kDefaultSubmapOverlapThreshold = 0.15;

/// Accumulated cloud expressed in its own frame, posed in the world by `pose`.
struct Submap {
  std::shared_ptr<const GaussianCloud> cloud;
  std::shared_ptr<const OccupancyGrid> grid;
  Pose pose;

  static Submap create(std::shared_ptr<const GaussianCloud> cloud, const Pose& pose, double grid_resolution = 0.5) {
    Submap s;
    s.grid = std::make_shared<const OccupancyGrid>(OccupancyGrid::build(cloud->means(), grid_resolution));
    s.cloud = std::move(cloud);
    s.pose = pose;
    return s;
  }
};

/// Overlap of submap j with submap i at their current relative pose.
inline double submap_overlap(const Submap& i, const Submap& j, std::size_t stride = 1) {
  return overlap(*i.grid, j.cloud->means(), i.pose.inverse() * j.pose, stride);
}

/**
 * @brief Dense submap graph: one GICP factor for every pair i < j whose
 * overlap is at least `overlap_threshold`. The first submap is fixed.
 */
inline PoseGraph build_global_graph(const std::vector<Submap>& submaps,
                                    double overlap_threshold = kDefaultSubmapOverlapThreshold,
                                    std::size_t overlap_stride = 1) {
  if (submaps.size() < 2) {
    throw Error(ErrorCode::InvalidArgument, "global graph needs at least two submaps");
  }
  PoseGraph graph;
  for (const auto& s : submaps) {
    graph.add_pose(s.pose);
  }
  graph.set_fixed(0);
  for (std::size_t i = 0; i < submaps.size(); ++i) {
    for (std::size_t j = i + 1; j < submaps.size(); ++j) {
      if (submap_overlap(submaps[i], submaps[j], overlap_stride) >= overlap_threshold) {
        graph.add_factor(i, j, submaps[i].cloud, submaps[j].cloud);
      }
    }
  }
  return graph;
}

}  // namespace egicp
