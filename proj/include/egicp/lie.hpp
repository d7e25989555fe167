#pragma once

#include <cmath>
#include <numbers>
#include <utility>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "egicp/error.hpp"

namespace egicp {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

inline Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(),  //
      v.z(), 0.0, -v.x(),   //
      -v.y(), v.x(), 0.0;
  return m;
}

inline double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }
inline double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

/**
 * @brief Tangent vector of SE(3), ordered (rho, theta).
 *
 * rho is the translational part in meters and theta the rotation vector in
 * radians. Pose perturbations are right-multiplicative: T [+] dx = T * exp(dx).
 */
struct Twist {
  Eigen::Vector3d rho = Eigen::Vector3d::Zero();
  Eigen::Vector3d theta = Eigen::Vector3d::Zero();

  Twist() = default;
  Twist(const Eigen::Vector3d& rho_, const Eigen::Vector3d& theta_) : rho(rho_), theta(theta_) {}
  explicit Twist(const Vector6d& v) : rho(v.head<3>()), theta(v.tail<3>()) {}

  static Twist zero() { return Twist(); }

  Vector6d vector() const {
    Vector6d v;
    v << rho, theta;
    return v;
  }
};

/// Rigid transform x -> R x + t.
struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Pose() = default;
  Pose(const Eigen::Matrix3d& r, const Eigen::Vector3d& t) : rotation(r), translation(t) {}

  static Pose identity() { return Pose(); }

  static Pose from_translation(const Eigen::Vector3d& t) { return Pose(Eigen::Matrix3d::Identity(), t); }

  static Pose from_quaternion(const Eigen::Quaterniond& q, const Eigen::Vector3d& t) {
    return Pose(q.normalized().toRotationMatrix(), t);
  }

  Eigen::Quaterniond quaternion() const { return Eigen::Quaterniond(rotation).normalized(); }

  Pose inverse() const {
    const Eigen::Matrix3d rt = rotation.transpose();
    return Pose(rt, -rt * translation);
  }

  Pose operator*(const Pose& other) const {
    return Pose(rotation * other.rotation, rotation * other.translation + translation);
  }

  Eigen::Vector3d operator*(const Eigen::Vector3d& p) const { return rotation * p + translation; }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
  }

  /// Adjoint for (rho, theta) twists: T exp(x) T^-1 = exp(Ad_T x).
  Matrix6d adjoint() const {
    Matrix6d ad = Matrix6d::Zero();
    ad.topLeftCorner<3, 3>() = rotation;
    ad.topRightCorner<3, 3>() = skew(translation) * rotation;
    ad.bottomRightCorner<3, 3>() = rotation;
    return ad;
  }
};

namespace detail {

// Below this rotation angle the Rodrigues coefficients switch to their series.
inline constexpr double kSmallAngle = 1e-8;
inline constexpr double kLogBoundaryMargin = 1e-6;

inline Eigen::Matrix3d so3_exp(const Eigen::Vector3d& omega) {
  const double angle = omega.norm();
  const Eigen::Matrix3d k = skew(omega);
  if (angle < kSmallAngle) {
    return Eigen::Matrix3d::Identity() + k + 0.5 * k * k;
  }
  const double a = std::sin(angle) / angle;
  const double h = std::sin(0.5 * angle) / angle;
  const double b = 2.0 * h * h;  // (1 - cos) / angle^2 without cancellation
  return Eigen::Matrix3d::Identity() + a * k + b * k * k;
}

// Rotation angle in [0, pi] computed from both the symmetric and skew parts.
inline double rotation_angle(const Eigen::Matrix3d& r) {
  const Eigen::Vector3d axis(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  const double s = 0.5 * axis.norm();
  const double c = 0.5 * (r.trace() - 1.0);
  return std::atan2(s, c);
}

}  // namespace detail

inline Pose exp(const Twist& xi) {
  const double angle = xi.theta.norm();
  const Eigen::Matrix3d k = skew(xi.theta);
  Eigen::Matrix3d v;
  if (angle < detail::kSmallAngle) {
    v = Eigen::Matrix3d::Identity() + 0.5 * k;
  } else {
    const double a2 = angle * angle;
    const double h = std::sin(0.5 * angle) / angle;
    v = Eigen::Matrix3d::Identity() + 2.0 * h * h * k +
        (angle - std::sin(angle)) / (a2 * angle) * k * k;
  }
  return Pose(detail::so3_exp(xi.theta), v * xi.rho);
}

/// Inverse of exp. Throws AngleAtBoundary for rotations within 1e-6 rad of pi.
inline Twist log(const Pose& p) {
  const Eigen::Matrix3d& r = p.rotation;
  const double angle = detail::rotation_angle(r);
  if (angle >= std::numbers::pi - detail::kLogBoundaryMargin) {
    throw Error(ErrorCode::AngleAtBoundary, "rotation angle " + std::to_string(angle) + " rad is at the log boundary");
  }

  const Eigen::Vector3d vee(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  Eigen::Vector3d omega;
  Eigen::Matrix3d v_inv;
  if (angle < detail::kSmallAngle) {
    omega = 0.5 * vee;
    const Eigen::Matrix3d k = skew(omega);
    v_inv = Eigen::Matrix3d::Identity() - 0.5 * k + k * k / 12.0;
  } else {
    omega = angle / (2.0 * std::sin(angle)) * vee;
    const Eigen::Matrix3d k = skew(omega);
    // (1 - (angle/2) cot(angle/2)) / angle^2, by series where that cancels.
    const double a2 = angle * angle;
    const double coeff = angle < 1e-3 ? 1.0 / 12.0 + a2 / 720.0 + a2 * a2 / 30240.0
                                      : (1.0 - 0.5 * angle / std::tan(0.5 * angle)) / a2;
    v_inv = Eigen::Matrix3d::Identity() - 0.5 * k + coeff * k * k;
  }
  return Twist(v_inv * p.translation, omega);
}

inline Pose boxplus(const Pose& p, const Twist& dx) { return p * exp(dx); }

struct Displacement {
  double trans = 0.0;  // meters
  double rot = 0.0;    // degrees
};

/// Translation norm and rotation angle of a^-1 b. Symmetric in (a, b).
inline Displacement displacement(const Pose& a, const Pose& b) {
  const Pose rel = a.inverse() * b;
  return {rel.translation.norm(), rad2deg(detail::rotation_angle(rel.rotation))};
}

/// Projects a near-rotation matrix back onto SO(3).
inline Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& r) {
  return Eigen::Quaterniond(r).normalized().toRotationMatrix();
}

}  // namespace egicp
