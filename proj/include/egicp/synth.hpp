#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "egicp/error.hpp"
#include "egicp/lie.hpp"

namespace egicp {

enum class SceneKind { Room, Corridor, Loop };

inline SceneKind parse_scene_kind(const std::string& s) {
  if (s == "room") return SceneKind::Room;
  if (s == "corridor") return SceneKind::Corridor;
  if (s == "loop") return SceneKind::Loop;
  throw Error(ErrorCode::InvalidArgument, "unknown scene kind '" + s + "'");
}

inline const char* to_string(SceneKind k) {
  switch (k) {
    case SceneKind::Room: return "room";
    case SceneKind::Corridor: return "corridor";
    case SceneKind::Loop: return "loop";
  }
  return "unknown";
}

struct SceneOptions {
  double points_per_m2 = 6.0;
  double sensor_range = 12.0;
  // Body-frame motion per frame for room and corridor scenes.
  double step_forward = 0.3;
  double step_yaw_deg = 1.0;
  // Loop scenes spread the frames evenly around a circle of this radius.
  double loop_radius = 20.0;
  double sensor_height = 1.2;
  // Draw independent surface samples for every frame instead of sharing one
  // sampled world.
  bool resample_per_frame = false;
};

struct SynthScene {
  std::vector<std::vector<Eigen::Vector3d>> clouds;  // sensor frame
  std::vector<Pose> trajectory;                      // sensor-to-world
  // Distance between the first and the last pose that still counts as a closed loop.
  double loop_closure_distance = 0.0;
};

namespace detail {

// Parallelogram origin + a u + b v, a, b in [0, 1].
struct Patch {
  Eigen::Vector3d origin;
  Eigen::Vector3d u;
  Eigen::Vector3d v;
  double area() const { return u.cross(v).norm(); }
};

inline void add_box(std::vector<Patch>& patches, const Eigen::Vector3d& lo, const Eigen::Vector3d& size) {
  const Eigen::Vector3d ex(size.x(), 0, 0), ey(0, size.y(), 0), ez(0, 0, size.z());
  patches.push_back({lo, ex, ez});
  patches.push_back({lo + ey, ex, ez});
  patches.push_back({lo, ey, ez});
  patches.push_back({lo + ex, ey, ez});
  patches.push_back({lo + ez, ex, ey});
}

inline std::vector<Patch> room_geometry(std::mt19937_64& rng) {
  std::vector<Patch> p;
  const double lx = 16.0, ly = 12.0, lz = 4.0;
  const Eigen::Vector3d o(-8.0, -6.0, 0.0);
  p.push_back({o, {lx, 0, 0}, {0, ly, 0}});                   // floor
  p.push_back({o + Eigen::Vector3d(0, 0, lz), {lx, 0, 0}, {0, ly, 0}});  // ceiling
  p.push_back({o, {lx, 0, 0}, {0, 0, lz}});
  p.push_back({o + Eigen::Vector3d(0, ly, 0), {lx, 0, 0}, {0, 0, lz}});
  p.push_back({o, {0, ly, 0}, {0, 0, lz}});
  p.push_back({o + Eigen::Vector3d(lx, 0, 0), {0, ly, 0}, {0, 0, lz}});
  std::uniform_real_distribution<double> ux(-7.0, 5.5), uy(-5.5, 4.0), us(0.5, 1.5), uh(0.5, 2.5);
  for (int i = 0; i < 7; ++i) {
    add_box(p, {ux(rng), uy(rng), 0.0}, {us(rng), us(rng), uh(rng)});
  }
  return p;
}

inline std::vector<Patch> corridor_geometry(std::mt19937_64& rng) {
  std::vector<Patch> p;
  const double lx = 80.0, w = 4.0, lz = 3.0;
  const Eigen::Vector3d o(-10.0, -w / 2, 0.0);
  p.push_back({o, {lx, 0, 0}, {0, w, 0}});
  p.push_back({o + Eigen::Vector3d(0, 0, lz), {lx, 0, 0}, {0, w, 0}});
  p.push_back({o, {lx, 0, 0}, {0, 0, lz}});
  p.push_back({o + Eigen::Vector3d(0, w, 0), {lx, 0, 0}, {0, 0, lz}});
  std::uniform_real_distribution<double> jitter(-0.8, 0.8), us(0.3, 0.8), uh(0.6, 2.5);
  for (double x = -8.0; x < lx - 12.0; x += 3.0) {
    const double sx = us(rng), sy = us(rng);
    add_box(p, {x + jitter(rng), -w / 2, 0.0}, {sx, sy, uh(rng)});
    const double tx = us(rng), ty = us(rng);
    add_box(p, {x + 1.5 + jitter(rng), w / 2 - ty, 0.0}, {tx, ty, uh(rng)});
  }
  return p;
}

inline std::vector<Patch> loop_geometry(std::mt19937_64& rng, double radius) {
  std::vector<Patch> p;
  const double half_width = 4.0, lz = 3.0;
  const int segments = 64;
  const double r_in = radius - half_width, r_out = radius + half_width;
  for (int s = 0; s < segments; ++s) {
    const double a0 = 2.0 * std::numbers::pi * s / segments;
    const double a1 = 2.0 * std::numbers::pi * (s + 1) / segments;
    const Eigen::Vector3d d0(std::cos(a0), std::sin(a0), 0.0), d1(std::cos(a1), std::sin(a1), 0.0);
    // Ground sector approximated by a parallelogram spanning the mid-radius chord.
    p.push_back({r_in * d0, (r_out - r_in) * d0, radius * (d1 - d0)});
    p.push_back({r_in * d0, r_in * (d1 - d0), {0, 0, lz}});
    p.push_back({r_out * d0, r_out * (d1 - d0), {0, 0, lz}});
  }
  std::uniform_real_distribution<double> ua(0.0, 2.0 * std::numbers::pi), ur(r_in + 0.3, r_out - 1.5),
      us(0.4, 1.2), uh(0.8, 2.8);
  for (int i = 0; i < 90; ++i) {
    const double a = ua(rng), r = ur(rng);
    add_box(p, {r * std::cos(a), r * std::sin(a), 0.0}, {us(rng), us(rng), uh(rng)});
  }
  return p;
}

inline std::vector<Eigen::Vector3d> sample_patches(const std::vector<Patch>& patches, double density,
                                                   std::mt19937_64& rng) {
  std::vector<Eigen::Vector3d> points;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (const auto& patch : patches) {
    const double expected = patch.area() * density;
    auto count = static_cast<std::size_t>(expected);
    if (u01(rng) < expected - static_cast<double>(count)) {
      ++count;
    }
    for (std::size_t i = 0; i < count; ++i) {
      points.push_back(patch.origin + u01(rng) * patch.u + u01(rng) * patch.v);
    }
  }
  return points;
}

inline Pose planar_pose(const Eigen::Vector3d& position, double yaw) {
  return Pose(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix(), position);
}

}  // namespace detail

/**
 * @brief Deterministic synthetic scans of a structured scene.
 *
 * Scans contain the world surface samples within sensor_range of the sensor,
 * expressed in the sensor frame, with isotropic Gaussian noise added.
 */
inline SynthScene synth_scene(SceneKind kind, double noise_sigma, std::size_t frame_count, std::uint64_t seed,
                              const SceneOptions& options = {}) {
  if (frame_count == 0) {
    throw Error(ErrorCode::InvalidArgument, "frame_count must be at least 1");
  }
  std::mt19937_64 geometry_rng(seed);
  std::vector<detail::Patch> patches;
  switch (kind) {
    case SceneKind::Room: patches = detail::room_geometry(geometry_rng); break;
    case SceneKind::Corridor: patches = detail::corridor_geometry(geometry_rng); break;
    case SceneKind::Loop: patches = detail::loop_geometry(geometry_rng, options.loop_radius); break;
  }

  SynthScene scene;
  if (kind == SceneKind::Loop) {
    for (std::size_t k = 0; k < frame_count; ++k) {
      const double a = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(frame_count);
      const Eigen::Vector3d pos(options.loop_radius * std::cos(a), options.loop_radius * std::sin(a),
                                options.sensor_height);
      scene.trajectory.push_back(detail::planar_pose(pos, a + std::numbers::pi / 2));
    }
    scene.loop_closure_distance =
        2.0 * options.loop_radius * std::sin(std::numbers::pi / static_cast<double>(frame_count)) + 1e-9;
  } else {
    const Eigen::Vector3d start = kind == SceneKind::Room ? Eigen::Vector3d(-4.0, -2.0, options.sensor_height)
                                                          : Eigen::Vector3d(-6.0, 0.0, options.sensor_height);
    const Pose step = detail::planar_pose({options.step_forward, 0.0, 0.0}, deg2rad(options.step_yaw_deg));
    Pose pose = detail::planar_pose(start, 0.0);
    for (std::size_t k = 0; k < frame_count; ++k) {
      scene.trajectory.push_back(pose);
      pose = pose * step;
    }
    scene.loop_closure_distance = 0.0;
  }

  std::mt19937_64 sample_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const auto shared_world = detail::sample_patches(patches, options.points_per_m2, sample_rng);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t k = 0; k < frame_count; ++k) {
    std::mt19937_64 frame_rng(seed + 7919 * (k + 1));
    std::vector<Eigen::Vector3d> resampled;
    if (options.resample_per_frame) {
      resampled = detail::sample_patches(patches, options.points_per_m2, frame_rng);
    }
    const auto& world = options.resample_per_frame ? resampled : shared_world;

    const Pose& pose = scene.trajectory[k];
    const Pose inv = pose.inverse();
    std::vector<Eigen::Vector3d> cloud;
    for (const auto& p : world) {
      if ((p - pose.translation).norm() > options.sensor_range) {
        continue;
      }
      Eigen::Vector3d q = inv * p;
      if (noise_sigma > 0.0) {
        q += noise_sigma * Eigen::Vector3d(noise(frame_rng), noise(frame_rng), noise(frame_rng));
      }
      cloud.push_back(q);
    }
    scene.clouds.push_back(std::move(cloud));
  }
  return scene;
}

}  // namespace egicp
