#pragma once

// Rigid-body algebra used throughout the library.
//
// Convention: a Twist (angular, linear) is the velocity of a body expressed at
// a named frame, where `linear` is the velocity of the material point that
// coincides with that frame's origin and both vectors use the frame's axes.
// A Wrench (torque, force) is expressed the same way: `torque` is the moment
// about the frame origin. Given `rel` = pose of the source frame in the
// destination frame (rotation R, translation p):
//
//   twist:  w' = R w,        v' = R v + p x (R w)
//   wrench: f' = R f,        t' = R t + p x (R f)
//
// so the power <wrench, twist> is invariant. Vectors stacked as 6-vectors put
// the angular/torque part first.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace okp {

using FrameId = std::string;

inline const FrameId kWorldFrame = "world";

class FrameMismatch : public std::invalid_argument {
 public:
  FrameMismatch(const FrameId& expected, const FrameId& actual)
      : std::invalid_argument("frame mismatch: expected '" + expected + "', got '" + actual + "'") {}
};

/// Frame id for quantities taken at a keypoint origin but using world axes.
inline FrameId at_keypoint(const std::string& label) { return label + "@world"; }

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Vector6 = Eigen::Matrix<Scalar, 6, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Matrix4 = Eigen::Matrix<Scalar, 4, 4>;

/// Unit quaternion rotation, stored canonically with w >= 0.
template <typename Scalar>
class Rotation {
 public:
  using Quaternion = Eigen::Quaternion<Scalar>;

  Rotation() : q_(Quaternion::Identity()) {}

  explicit Rotation(const Quaternion& q) : q_(q) {
    const Scalar n = q_.norm();
    if (!(n > Scalar(0)) || !std::isfinite(n)) {
      throw std::invalid_argument("Rotation: quaternion must be finite and non-zero");
    }
    q_.coeffs() /= n;
    if (q_.w() < Scalar(0)) q_.coeffs() = -q_.coeffs();
  }

  Rotation(Scalar w, Scalar x, Scalar y, Scalar z) : Rotation(Quaternion(w, x, y, z)) {}

  static Rotation identity() { return Rotation(); }

  static Rotation from_axis_angle(const Vector3<Scalar>& axis, Scalar angle) {
    return Rotation(Quaternion(Eigen::AngleAxis<Scalar>(angle, axis.normalized())));
  }

  /// Exponential map: rotation by |v| about v / |v|.
  static Rotation from_rotation_vector(const Vector3<Scalar>& v) {
    const Scalar theta = v.norm();
    if (theta < Scalar(1e-12)) {
      // second order series keeps exp() accurate for tiny increments
      return Rotation(Quaternion(Scalar(1) - theta * theta / Scalar(8), v.x() / Scalar(2), v.y() / Scalar(2),
                                 v.z() / Scalar(2)));
    }
    return from_axis_angle(v / theta, theta);
  }

  static Rotation from_matrix(const Matrix3<Scalar>& m) { return Rotation(Quaternion(m)); }

  static Rotation about_x(Scalar a) { return from_axis_angle(Vector3<Scalar>::UnitX(), a); }
  static Rotation about_y(Scalar a) { return from_axis_angle(Vector3<Scalar>::UnitY(), a); }
  static Rotation about_z(Scalar a) { return from_axis_angle(Vector3<Scalar>::UnitZ(), a); }

  /// Fixed-axis roll/pitch/yaw: R = Rz(yaw) Ry(pitch) Rx(roll).
  static Rotation from_rpy(Scalar roll, Scalar pitch, Scalar yaw) {
    return about_z(yaw) * about_y(pitch) * about_x(roll);
  }

  const Quaternion& quaternion() const { return q_; }
  Scalar w() const { return q_.w(); }
  Scalar x() const { return q_.x(); }
  Scalar y() const { return q_.y(); }
  Scalar z() const { return q_.z(); }

  Matrix3<Scalar> matrix() const { return q_.toRotationMatrix(); }

  Rotation inverse() const { return Rotation(q_.conjugate()); }

  Rotation operator*(const Rotation& other) const { return Rotation(q_ * other.q_); }

  Vector3<Scalar> operator*(const Vector3<Scalar>& v) const { return q_ * v; }

  /// Logarithm map; the returned rotation vector has norm in [0, pi].
  Vector3<Scalar> log() const {
    const Vector3<Scalar> im = q_.vec();
    const Scalar s = im.norm();
    if (s < Scalar(1e-12)) return Scalar(2) * im / q_.w();
    return Scalar(2) * std::atan2(s, q_.w()) * im / s;
  }

  Scalar angle() const { return Scalar(2) * std::atan2(q_.vec().norm(), q_.w()); }

  Vector3<Scalar> axis(int i) const { return matrix().col(i); }

  template <typename Other>
  Rotation<Other> cast() const {
    return Rotation<Other>(q_.template cast<Other>());
  }

 private:
  Quaternion q_;
};

/// Rigid transform x -> R x + t.
template <typename Scalar>
class Pose {
 public:
  Pose() : translation_(Vector3<Scalar>::Zero()) {}
  Pose(const Rotation<Scalar>& r, const Vector3<Scalar>& t) : rotation_(r), translation_(t) {}
  explicit Pose(const Rotation<Scalar>& r) : rotation_(r), translation_(Vector3<Scalar>::Zero()) {}

  static Pose identity() { return Pose(); }
  static Pose translation(Scalar x, Scalar y, Scalar z) { return Pose(Rotation<Scalar>(), Vector3<Scalar>(x, y, z)); }
  static Pose translation(const Vector3<Scalar>& t) { return Pose(Rotation<Scalar>(), t); }

  static Pose from_matrix(const Matrix4<Scalar>& m) {
    return Pose(Rotation<Scalar>::from_matrix(m.template topLeftCorner<3, 3>()), m.template topRightCorner<3, 1>());
  }

  const Rotation<Scalar>& rotation() const { return rotation_; }
  const Vector3<Scalar>& translation() const { return translation_; }

  Matrix4<Scalar> matrix() const {
    Matrix4<Scalar> m = Matrix4<Scalar>::Identity();
    m.template topLeftCorner<3, 3>() = rotation_.matrix();
    m.template topRightCorner<3, 1>() = translation_;
    return m;
  }

  Pose inverse() const {
    const Rotation<Scalar> rinv = rotation_.inverse();
    return Pose(rinv, -(rinv * translation_));
  }

  /// Composition: (a * b) x = a (b x).
  Pose operator*(const Pose& b) const {
    return Pose(rotation_ * b.rotation_, rotation_ * b.translation_ + translation_);
  }

  Vector3<Scalar> operator*(const Vector3<Scalar>& point) const { return rotation_ * point + translation_; }

  template <typename Other>
  Pose<Other> cast() const {
    return Pose<Other>(rotation_.template cast<Other>(), translation_.template cast<Other>());
  }

 private:
  Rotation<Scalar> rotation_;
  Vector3<Scalar> translation_;
};

template <typename Scalar>
Pose<Scalar> compose(const Pose<Scalar>& a, const Pose<Scalar>& b) {
  return a * b;
}

template <typename Scalar>
Pose<Scalar> inverse(const Pose<Scalar>& p) {
  return p.inverse();
}

template <typename Scalar>
struct Twist {
  Vector3<Scalar> angular = Vector3<Scalar>::Zero();
  Vector3<Scalar> linear = Vector3<Scalar>::Zero();
  FrameId expressed_in = kWorldFrame;

  static Twist zero(FrameId frame) { return Twist{Vector3<Scalar>::Zero(), Vector3<Scalar>::Zero(), std::move(frame)}; }

  static Twist from_vector(const Vector6<Scalar>& v, FrameId frame) {
    return Twist{v.template head<3>(), v.template tail<3>(), std::move(frame)};
  }

  Vector6<Scalar> vector() const {
    Vector6<Scalar> v;
    v << angular, linear;
    return v;
  }

  bool finite() const { return angular.allFinite() && linear.allFinite(); }

  Twist operator+(const Twist& o) const {
    if (o.expressed_in != expressed_in) throw FrameMismatch(expressed_in, o.expressed_in);
    return Twist{angular + o.angular, linear + o.linear, expressed_in};
  }

  Twist operator*(Scalar s) const { return Twist{angular * s, linear * s, expressed_in}; }
};

template <typename Scalar>
struct Wrench {
  Vector3<Scalar> torque = Vector3<Scalar>::Zero();
  Vector3<Scalar> force = Vector3<Scalar>::Zero();
  FrameId expressed_at = kWorldFrame;

  static Wrench zero(FrameId frame) { return Wrench{Vector3<Scalar>::Zero(), Vector3<Scalar>::Zero(), std::move(frame)}; }

  static Wrench from_vector(const Vector6<Scalar>& v, FrameId frame) {
    return Wrench{v.template head<3>(), v.template tail<3>(), std::move(frame)};
  }

  Vector6<Scalar> vector() const {
    Vector6<Scalar> v;
    v << torque, force;
    return v;
  }

  bool finite() const { return torque.allFinite() && force.allFinite(); }

  Wrench operator+(const Wrench& o) const {
    if (o.expressed_at != expressed_at) throw FrameMismatch(expressed_at, o.expressed_at);
    return Wrench{torque + o.torque, force + o.force, expressed_at};
  }
};

template <typename Scalar>
Twist<Scalar> transform_twist(const Pose<Scalar>& rel, const Twist<Scalar>& t, FrameId destination) {
  const Vector3<Scalar> w = rel.rotation() * t.angular;
  return Twist<Scalar>{w, rel.rotation() * t.linear + rel.translation().cross(w), std::move(destination)};
}

/// Keeps the source frame name; use when only the numbers matter.
template <typename Scalar>
Twist<Scalar> transform_twist(const Pose<Scalar>& rel, const Twist<Scalar>& t) {
  return transform_twist(rel, t, t.expressed_in);
}

template <typename Scalar>
Wrench<Scalar> transform_wrench(const Pose<Scalar>& rel, const Wrench<Scalar>& w, FrameId destination) {
  const Vector3<Scalar> f = rel.rotation() * w.force;
  return Wrench<Scalar>{rel.rotation() * w.torque + rel.translation().cross(f), f, std::move(destination)};
}

template <typename Scalar>
Wrench<Scalar> transform_wrench(const Pose<Scalar>& rel, const Wrench<Scalar>& w) {
  return transform_wrench(rel, w, w.expressed_at);
}

/// Rotate the axes of a point-attached quantity without moving the point.
template <typename Scalar>
Twist<Scalar> rotate(const Rotation<Scalar>& r, const Twist<Scalar>& t) {
  return Twist<Scalar>{r * t.angular, r * t.linear, t.expressed_in};
}

template <typename Scalar>
Wrench<Scalar> rotate(const Rotation<Scalar>& r, const Wrench<Scalar>& w) {
  return Wrench<Scalar>{r * w.torque, r * w.force, w.expressed_at};
}

/// Instantaneous power; both quantities must be expressed at the same frame.
template <typename Scalar>
Scalar power(const Wrench<Scalar>& w, const Twist<Scalar>& t) {
  if (w.expressed_at != t.expressed_in) throw FrameMismatch(w.expressed_at, t.expressed_in);
  return w.torque.dot(t.angular) + w.force.dot(t.linear);
}

template <typename Scalar>
struct OrientedKeypoint {
  std::string label;
  Pose<Scalar> frame;
  FrameId parent = kWorldFrame;

  const Vector3<Scalar>& position() const { return frame.translation(); }
  Vector3<Scalar> axis(int i) const { return frame.rotation().axis(i); }
};

/// T such that T * current.frame == target.frame.
template <typename Scalar>
Pose<Scalar> pose_between(const OrientedKeypoint<Scalar>& current, const OrientedKeypoint<Scalar>& target) {
  if (current.parent != target.parent) throw FrameMismatch(current.parent, target.parent);
  return target.frame * current.frame.inverse();
}

/// Moves a frame by a twist taken at its origin in world axes, held for dt:
/// the origin translates by v dt and the axes rotate by exp(w dt).
template <typename Scalar>
Pose<Scalar> displace(const Pose<Scalar>& p, const Twist<Scalar>& t, Scalar dt) {
  return Pose<Scalar>(Rotation<Scalar>::from_rotation_vector(t.angular * dt) * p.rotation(),
                      p.translation() + t.linear * dt);
}

/// Constant-velocity interpolation in the decoupled (slerp, lerp) sense.
template <typename Scalar>
Pose<Scalar> interpolate(const Pose<Scalar>& a, const Pose<Scalar>& b, Scalar s) {
  const Rotation<Scalar> delta = b.rotation() * a.rotation().inverse();
  return Pose<Scalar>(Rotation<Scalar>::from_rotation_vector(delta.log() * s) * a.rotation(),
                      a.translation() + s * (b.translation() - a.translation()));
}

/// Rotation vector e with exp(e) * from == to.
template <typename Scalar>
Vector3<Scalar> rotation_error(const Rotation<Scalar>& from, const Rotation<Scalar>& to) {
  return (to * from.inverse()).log();
}

template <typename Scalar>
Matrix3<Scalar> skew(const Vector3<Scalar>& v) {
  Matrix3<Scalar> m;
  m << Scalar(0), -v.z(), v.y(), v.z(), Scalar(0), -v.x(), -v.y(), v.x(), Scalar(0);
  return m;
}

using Rotationd = Rotation<double>;
using Posed = Pose<double>;
using Twistd = Twist<double>;
using Wrenchd = Wrench<double>;
using OrientedKeypointd = OrientedKeypoint<double>;
using Vector3d = Eigen::Vector3d;
using Vector6d = Eigen::Matrix<double, 6, 1>;

}  // namespace okp
