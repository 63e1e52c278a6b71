#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace fploc {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Base for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(int line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class OutOfBounds : public Error {
 public:
  using Error::Error;
};

class DegenerateFit : public Error {
 public:
  using Error::Error;
};

class TrackingLost : public Error {
 public:
  using Error::Error;
};

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  a = std::remainder(a, kTwoPi);  // [-pi, pi]
  if (a <= -kPi) a += kTwoPi;
  return a;
}

/// Wraps an angle into [0, 2pi).
inline double wrap_positive(double a) {
  a = std::fmod(a, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  if (a >= kTwoPi) a = 0.0;
  return a;
}

inline Eigen::Matrix2d rot2(double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  return r;
}

/// Planar pose [t_x, t_y, yaw] of the gravity-aligned sensor frame in the plan frame.
struct PlanarPose {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;

  Vec2 translation() const { return {x, y}; }
  Vec2 apply(const Vec2& p) const { return rot2(yaw) * p + translation(); }
  PlanarPose compose(const PlanarPose& o) const {
    const Vec2 t = apply(o.translation());
    return {t.x(), t.y(), wrap_angle(yaw + o.yaw)};
  }
  PlanarPose inverse() const {
    const Vec2 t = -(rot2(-yaw) * translation());
    return {t.x(), t.y(), wrap_angle(-yaw)};
  }
};

/// Full 6-DoF pose. Rotation is R = Rz(yaw) * Ry(pitch) * Rx(roll).
struct Pose6 {
  double x = 0.0, y = 0.0, z = 0.0;
  double roll = 0.0, pitch = 0.0, yaw = 0.0;

  Vec3 translation() const { return {x, y, z}; }

  Eigen::Matrix3d rotation() const {
    return (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
            Eigen::AngleAxisd(roll, Vec3::UnitX()))
        .toRotationMatrix();
  }

  Eigen::Isometry3d isometry() const {
    Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
    t.linear() = rotation();
    t.translation() = translation();
    return t;
  }

  Eigen::Quaterniond quaternion() const { return Eigen::Quaterniond(rotation()).normalized(); }

  PlanarPose planar() const { return {x, y, yaw}; }

  static Pose6 from_rotation(const Vec3& t, const Eigen::Matrix3d& r) {
    Pose6 p;
    p.x = t.x();
    p.y = t.y();
    p.z = t.z();
    p.yaw = std::atan2(r(1, 0), r(0, 0));
    p.pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
    p.roll = std::atan2(r(2, 1), r(2, 2));
    return p;
  }
};

struct TimedPose {
  double timestamp = 0.0;
  Pose6 pose;
};

/// Roll/pitch-only rotation Ry(pitch) * Rx(roll): maps sensor-frame vectors into the
/// gravity-aligned (yaw-only) frame.
inline Eigen::Matrix3d leveling_rotation(double roll, double pitch) {
  return (Eigen::AngleAxisd(pitch, Vec3::UnitY()) * Eigen::AngleAxisd(roll, Vec3::UnitX()))
      .toRotationMatrix();
}

}  // namespace fploc
