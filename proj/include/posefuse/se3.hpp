#pragma once

// Rigid-body arithmetic on SO(3) and SE(3).
//
// Conventions used throughout the library:
//   * Quaternions are stored and serialized in (w, x, y, z) order.
//   * A Pose maps object-local coordinates into camera coordinates:
//     x_cam = R * x_obj + t.
//   * compose(a, b) == a * b maps x -> a(b(x)).
//   * Twists are ordered (rho, phi): translational part first, then the
//     rotation vector. exp_se3 builds t = J_l(phi) * rho.
//   * Perturbations are applied on the right: T (+) xi = T * exp(xi).

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace posefuse {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Threshold below which exp/log coefficients switch to Taylor series.
inline constexpr double kSmallAngle = 1e-8;

Mat3 skew(const Vec3& v);

/// Unit quaternion rotation. Renormalized on every construction.
class Rotation {
 public:
  Rotation() : q_(1.0, 0.0, 0.0, 0.0) {}
  explicit Rotation(const Eigen::Quaterniond& q);
  /// Projects an (approximately) orthonormal matrix onto a quaternion using
  /// the largest-diagonal branch, stable at every angle including pi.
  explicit Rotation(const Mat3& m);

  static Rotation from_wxyz(double w, double x, double y, double z);
  static Rotation identity() { return {}; }
  /// Rotation vector (axis * angle) to rotation.
  static Rotation exp(const Vec3& phi);

  /// Rotation vector with angle in [0, pi]. The hemisphere is chosen so
  /// that w >= 0; at exactly pi the axis keeps the sign of the stored
  /// vector part.
  Vec3 log() const;

  Mat3 matrix() const { return q_.toRotationMatrix(); }
  const Eigen::Quaterniond& quaternion() const { return q_; }
  double w() const { return q_.w(); }
  double x() const { return q_.x(); }
  double y() const { return q_.y(); }
  double z() const { return q_.z(); }

  Rotation inverse() const { return Rotation(q_.conjugate()); }
  Rotation operator*(const Rotation& o) const { return Rotation(q_ * o.q_); }
  Vec3 operator*(const Vec3& v) const { return q_ * v; }

  /// Same rotation, flipped if needed so that dot(q, ref) >= 0.
  Rotation aligned_to(const Rotation& ref) const;
  double dot(const Rotation& o) const { return q_.coeffs().dot(o.q_.coeffs()); }

 private:
  Eigen::Quaterniond q_;
};

struct Twist {
  Vec3 rho = Vec3::Zero();
  Vec3 phi = Vec3::Zero();

  Vec6 vector() const;
  static Twist from_vector(const Vec6& v);
};

class Pose {
 public:
  Pose() : translation_(Vec3::Zero()) {}
  Pose(const Rotation& r, const Vec3& t) : rotation_(r), translation_(t) {}

  static Pose identity() { return {}; }
  static Pose from_matrix(const Mat4& m);

  const Rotation& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }
  Rotation& rotation() { return rotation_; }
  Vec3& translation() { return translation_; }

  Mat4 matrix() const;
  Pose inverse() const;
  Pose operator*(const Pose& o) const;
  Vec3 operator*(const Vec3& p) const { return rotation_ * p + translation_; }

 private:
  Rotation rotation_;
  Vec3 translation_;
};

// SO(3) helpers
Rotation exp_so3(const Vec3& phi);
Vec3 log_so3(const Rotation& r);
Mat3 so3_left_jacobian(const Vec3& phi);
Mat3 so3_left_jacobian_inverse(const Vec3& phi);
inline Mat3 so3_right_jacobian(const Vec3& phi) { return so3_left_jacobian(-phi); }
inline Mat3 so3_right_jacobian_inverse(const Vec3& phi) {
  return so3_left_jacobian_inverse(-phi);
}

// SE(3) maps. exp_se3 throws InvalidArgument on non-finite input.
Pose exp_se3(const Twist& xi);
Twist log_se3(const Pose& p);

Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& a);

/// Geodesic angle in [0, pi] between two rotations; q and -q are equal.
double rotation_angle_between(const Rotation& a, const Rotation& b);

/// 6x6 adjoint in (rho, phi) ordering: T exp(xi) T^-1 = exp(Ad_T xi).
Mat6 adjoint(const Pose& t);
/// Left Jacobian of SE(3) in (rho, phi) ordering and its inverse.
Mat6 se3_left_jacobian(const Twist& xi);
Mat6 se3_left_jacobian_inverse(const Twist& xi);
inline Mat6 se3_right_jacobian_inverse(const Twist& xi) {
  return se3_left_jacobian_inverse(Twist{-xi.rho, -xi.phi});
}

/// Translation distance and rotation angle between two poses.
double translation_distance(const Pose& a, const Pose& b);

}  // namespace posefuse
