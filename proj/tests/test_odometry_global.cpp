#include <algorithm>
#include <memory>
#include <set>
#include <sstream>
#include <utility>

#include <gtest/gtest.h>

#include "egicp/error.hpp"
#include "egicp/global_mapping.hpp"
#include "egicp/odometry.hpp"
#include "egicp/pipeline.hpp"
#include "egicp/synth.hpp"
#include "test_support.hpp"

namespace egicp {
namespace {

using test::Rng;

std::shared_ptr<const GaussianCloud> cloud_of(const std::vector<Eigen::Vector3d>& pts) {
  return std::make_shared<const GaussianCloud>(estimate_covariances(pts));
}

// Overlap of j against i from voxel sets, no hashing involved.
double oracle_overlap(const std::vector<Eigen::Vector3d>& target, const Pose& target_pose,
                      const std::vector<Eigen::Vector3d>& source, const Pose& source_pose, double res) {
  const auto voxels = test::naive_voxel_set(target, res);
  const Pose rel = target_pose.inverse() * source_pose;
  std::size_t hits = 0;
  for (const auto& p : source) hits += voxels.count(test::naive_voxel(rel * p, res));
  return static_cast<double>(hits) / static_cast<double>(source.size());
}

TEST(Odometry, StaticSensorStaysAtOrigin) {
  Rng rng(1);
  const auto cloud = cloud_of(test::structured_points(rng, 2000, 0.01));
  OdometryState state;
  for (int k = 0; k < 8; ++k) odometry_step(state, cloud);
  ASSERT_EQ(state.trajectory.size(), 8u);
  for (const auto& p : state.trajectory) {
    EXPECT_LE(p.translation.norm(), 1e-6);
    EXPECT_LE(log(p).vector().tail<3>().norm(), 1e-6);
  }
  EXPECT_TRUE(state.degenerate_frames.empty());
}

TEST(Odometry, ConstantVelocityDriftBelowOnePercent) {
  const auto scene = synth_scene(SceneKind::Room, 0.01, 16, 3);
  OdometryState state;
  for (const auto& c : scene.clouds) odometry_step(state, cloud_of(c));
  const Pose origin_inv = scene.trajectory[0].inverse();
  for (std::size_t k = 1; k < scene.clouds.size(); ++k) {
    const Pose truth = origin_inv * scene.trajectory[k];
    const double travelled = 0.3 * static_cast<double>(k);
    EXPECT_LE((state.trajectory[k].translation - truth.translation).norm(), 0.01 * travelled) << k;
  }
  EXPECT_LE(state.window.size(), state.config.window_size);
  EXPECT_FALSE(state.keyframes.empty());
}

TEST(Odometry, TeleportedFrameIsFlagged) {
  const auto scene = synth_scene(SceneKind::Room, 0.005, 8, 4);
  OdometryState state;
  for (std::size_t k = 0; k < 5; ++k) odometry_step(state, cloud_of(scene.clouds[k]));
  ASSERT_FALSE(state.last_frame_degenerate);

  odometry_step(state, cloud_of(test::transformed(Pose::from_translation({500, 0, 0}), scene.clouds[5])));
  EXPECT_TRUE(state.last_frame_degenerate);
  ASSERT_EQ(state.degenerate_frames, std::vector<std::size_t>{5});
  // Pose equals the constant-velocity prediction.
  const Pose& a = state.trajectory[3];
  const Pose& b = state.trajectory[4];
  EXPECT_LE(displacement(state.trajectory[5], b * (a.inverse() * b)).trans, 1e-12);
  EXPECT_TRUE(std::none_of(state.keyframes.begin(), state.keyframes.end(), [](const auto& f) { return f.id == 5; }));

  odometry_step(state, cloud_of(scene.clouds[6]));
  odometry_step(state, cloud_of(scene.clouds[7]));
  EXPECT_EQ(state.trajectory.size(), 8u);
  EXPECT_FALSE(state.last_frame_degenerate);
  for (const auto& f : state.factors) {
    EXPECT_TRUE(detail::find_frame(state, f.target_id) != nullptr);
    EXPECT_TRUE(detail::find_frame(state, f.source_id) != nullptr);
  }
}

TEST(Odometry, WindowAndKeyframeBounds) {
  OdometryConfig cfg;
  cfg.window_size = 4;
  cfg.max_keyframes = 3;
  cfg.optimizer.max_iterations = 5;
  const auto scene = synth_scene(SceneKind::Corridor, 0.0, 24, 5);
  OdometryState state(cfg);
  for (const auto& c : scene.clouds) {
    odometry_step(state, cloud_of(c));
    EXPECT_LE(state.window.size(), 4u);
    EXPECT_LE(state.keyframes.size(), 3u);
  }
  EXPECT_THROW(odometry_step(state, nullptr), Error);
}

TEST(GlobalGraph, DisjointSubmapsHaveNoFactors) {
  Rng rng(6);
  const auto cloud = cloud_of(test::structured_points(rng, 1000));
  const std::vector<Submap> submaps = {Submap::create(cloud, Pose::identity()),
                                       Submap::create(cloud, Pose::from_translation({200, 0, 0}))};
  const auto graph = build_global_graph(submaps);
  EXPECT_TRUE(graph.factors().empty());
  EXPECT_TRUE(graph.is_fixed(0));
  EXPECT_FALSE(graph.is_fixed(1));
}

TEST(GlobalGraph, SameAreaIsComplete) {
  Rng rng(7);
  std::vector<Submap> submaps;
  const auto pts = test::structured_points(rng, 3000);
  for (int k = 0; k < 6; ++k) {
    const Pose pose = test::random_pose(rng, 3.0, 1.0);
    submaps.push_back(Submap::create(cloud_of(test::transformed(pose.inverse(), pts)), pose));
  }
  const auto graph = build_global_graph(submaps);
  EXPECT_EQ(graph.factors().size(), 15u);
}

TEST(GlobalGraph, LoopEdgesMatchOverlapOracle) {
  const auto scene = synth_scene(SceneKind::Loop, 0.0, 12, 8);
  std::vector<Submap> submaps;
  for (std::size_t k = 0; k < 12; ++k) submaps.push_back(Submap::create(cloud_of(scene.clouds[k]), scene.trajectory[k]));
  const auto graph = build_global_graph(submaps, 0.15);

  std::set<std::pair<std::size_t, std::size_t>> got, want;
  for (const auto& f : graph.factors()) got.insert({f.target, f.source});
  for (std::size_t i = 0; i < 12; ++i) {
    for (std::size_t j = i + 1; j < 12; ++j) {
      if (oracle_overlap(scene.clouds[i], scene.trajectory[i], scene.clouds[j], scene.trajectory[j], 0.5) >= 0.15) {
        want.insert({i, j});
      }
    }
  }
  EXPECT_EQ(got, want);
  EXPECT_TRUE(want.contains({0, 11}));
  for (std::size_t i = 0; i + 1 < 12; ++i) EXPECT_TRUE(want.contains({i, i + 1})) << i;
}

TEST(GlobalGraph, NeedsTwoSubmaps) {
  Rng rng(9);
  EXPECT_THROW(build_global_graph({Submap::create(cloud_of(test::structured_points(rng, 100)), Pose::identity())}),
               Error);
}

TEST(PipelineConfig, RoundTripAndUnknownKey) {
  PipelineConfig cfg;
  cfg.odometry.window_size = 7;
  cfg.odometry.optimizer.linearization.coreset_size = 64;
  const auto map = to_config_map(cfg);
  const auto again = to_config_map(apply_config(PipelineConfig{}, map));
  EXPECT_EQ(map, again);
  EXPECT_EQ(again.at("odometry.window_size"), "7");

  try {
    (void)apply_config(PipelineConfig{}, {{"no.such.key", "1"}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
  }
  EXPECT_THROW((void)apply_config(PipelineConfig{}, {{"grid.resolution", "abc"}}), Error);
  EXPECT_THROW((void)apply_config(PipelineConfig{}, {{"submap.interval", "0"}}), Error);
}

TEST(Pipeline, SmallRoomRun) {
  const auto scene = synth_scene(SceneKind::Room, 0.005, 12, 10);
  PipelineConfig cfg;
  cfg.submap_interval = 4;
  const auto result = run_pipeline(scene.clouds, cfg);
  ASSERT_EQ(result.odometry.size(), 12u);
  ASSERT_EQ(result.global.size(), 12u);
  EXPECT_EQ(result.submap_count, 3u);
  EXPECT_GE(result.global_factor_count, 2u);
  std::vector<Pose> truth;
  for (const auto& p : scene.trajectory) truth.push_back(scene.trajectory[0].inverse() * p);
  EXPECT_LE(ate(result.global, truth), 0.05);
}

TEST(VoxelDownsample, CentroidPerVoxel) {
  const std::vector<Eigen::Vector3d> pts = {{0.1, 0.1, 0.1}, {0.3, 0.3, 0.3}, {1.5, 0, 0}};
  const auto out = voxel_downsample(pts, 1.0);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_LE((out[0] - Eigen::Vector3d(0.2, 0.2, 0.2)).norm(), 1e-15);
  EXPECT_EQ(out[1], Eigen::Vector3d(1.5, 0, 0));
}

}  // namespace
}  // namespace egicp
