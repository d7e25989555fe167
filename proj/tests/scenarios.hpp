#pragma once

// Small registration problems shared by the unit tests and the acceptance run.

#include <memory>
#include <vector>

#include "egicp/gaussian_cloud.hpp"
#include "egicp/lie.hpp"
#include "egicp/pose_graph.hpp"
#include "egicp/synth.hpp"
#include "test_support.hpp"

namespace egicp::test {

struct CloudPair {
  std::shared_ptr<const GaussianCloud> target;
  std::shared_ptr<const GaussianCloud> source;
  Pose truth;  // source frame -> target frame
};

/// Source is exactly the target points seen from `truth`.
inline CloudPair identical_pair(Rng& rng, std::size_t n, const Pose& truth) {
  const auto pts = structured_points(rng, n);
  CloudPair p;
  p.target = std::make_shared<const GaussianCloud>(estimate_covariances(pts));
  p.source = std::make_shared<const GaussianCloud>(estimate_covariances(transformed(truth.inverse(), pts)));
  p.truth = truth;
  return p;
}

/// Two independently sampled, noisy scans of the synthetic room.
inline CloudPair noisy_scan_pair(std::uint64_t seed, double noise, std::size_t first = 0) {
  SceneOptions opt;
  opt.resample_per_frame = true;
  const auto scene = synth_scene(SceneKind::Room, noise, first + 2, seed, opt);
  CloudPair p;
  p.target = std::make_shared<const GaussianCloud>(estimate_covariances(scene.clouds[first]));
  p.source = std::make_shared<const GaussianCloud>(estimate_covariances(scene.clouds[first + 1]));
  p.truth = scene.trajectory[first].inverse() * scene.trajectory[first + 1];
  return p;
}

/// Fixed identity target, free source started at `init`.
inline PoseGraph pair_graph(const CloudPair& p, const Pose& init) {
  PoseGraph g;
  g.add_pose(Pose::identity(), true);
  g.add_pose(init);
  g.add_factor(0, 1, p.target, p.source);
  return g;
}

/// Perturbation of exactly `trans` meters and `rot_deg` degrees along random directions.
inline Pose perturbed(Rng& rng, const Pose& pose, double trans, double rot_deg) {
  return pose * Pose(Eigen::AngleAxisd(deg2rad(rot_deg), random_axis(rng)).toRotationMatrix(), trans * random_axis(rng));
}

}  // namespace egicp::test
