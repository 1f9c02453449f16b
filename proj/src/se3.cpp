#include "posefuse/se3.hpp"

#include <cmath>

#include "posefuse/error.hpp"

namespace posefuse {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid argument";
    case ErrorKind::kInvalidInput: return "invalid input";
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kInsufficientData: return "insufficient data";
    case ErrorKind::kInsufficientCorrespondences: return "insufficient correspondences";
    case ErrorKind::kRegistrationFailure: return "registration failure";
    case ErrorKind::kUnanchoredGraph: return "unanchored graph";
    case ErrorKind::kGap: return "gap";
    case ErrorKind::kNumericalFailure: return "numerical failure";
    case ErrorKind::kOptimizationFailure: return "optimization failure";
    case ErrorKind::kInvalidSpec: return "invalid spec";
    case ErrorKind::kInvalidModel: return "invalid model";
    case ErrorKind::kIo: return "io error";
  }
  return "error";
}

Mat3 skew(const Vec3& v) {
  Mat3 s;
  // clang-format off
  s <<    0.0, -v.z(),  v.y(),
        v.z(),    0.0, -v.x(),
       -v.y(),  v.x(),    0.0;
  // clang-format on
  return s;
}

Rotation::Rotation(const Eigen::Quaterniond& q) : q_(q) {
  const double n = q_.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw Error(ErrorKind::kInvalidArgument, "quaternion has zero or non-finite norm");
  }
  // Already-unit input is kept bit-for-bit so file round trips are exact.
  if (std::abs(n - 1.0) > 1e-15) q_.coeffs() /= n;
}

Rotation::Rotation(const Mat3& m) : Rotation(Eigen::Quaterniond(m)) {}

Rotation Rotation::from_wxyz(double w, double x, double y, double z) {
  return Rotation(Eigen::Quaterniond(w, x, y, z));
}

Rotation Rotation::exp(const Vec3& phi) { return exp_so3(phi); }

Vec3 Rotation::log() const { return log_so3(*this); }

Rotation Rotation::aligned_to(const Rotation& ref) const {
  if (dot(ref) >= 0.0) return *this;
  return Rotation(Eigen::Quaterniond(-q_.w(), -q_.x(), -q_.y(), -q_.z()));
}

Vec6 Twist::vector() const {
  Vec6 v;
  v << rho, phi;
  return v;
}

Twist Twist::from_vector(const Vec6& v) { return Twist{v.head<3>(), v.tail<3>()}; }

Pose Pose::from_matrix(const Mat4& m) {
  return Pose(Rotation(Mat3(m.topLeftCorner<3, 3>())), m.topRightCorner<3, 1>());
}

Mat4 Pose::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation_.matrix();
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

Pose Pose::inverse() const {
  const Rotation rinv = rotation_.inverse();
  return Pose(rinv, -(rinv * translation_));
}

Pose Pose::operator*(const Pose& o) const {
  return Pose(rotation_ * o.rotation_, rotation_ * o.translation_ + translation_);
}

Rotation exp_so3(const Vec3& phi) {
  const double theta = phi.norm();
  double w, s;
  if (theta < kSmallAngle) {
    w = 1.0 - theta * theta / 8.0;
    s = 0.5 - theta * theta / 48.0;
  } else {
    w = std::cos(0.5 * theta);
    s = std::sin(0.5 * theta) / theta;
  }
  return Rotation(Eigen::Quaterniond(w, s * phi.x(), s * phi.y(), s * phi.z()));
}

Vec3 log_so3(const Rotation& r) {
  Eigen::Quaterniond q = r.quaternion();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const Vec3 v = q.vec();
  const double n = v.norm();
  if (n < kSmallAngle) {
    // 2 atan(n / w) / n expanded around n = 0.
    const double w = q.w();
    return (2.0 / w) * (1.0 - n * n / (3.0 * w * w)) * v;
  }
  return (2.0 * std::atan2(n, q.w()) / n) * v;
}

Mat3 so3_left_jacobian(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 k = skew(phi);
  if (theta < kSmallAngle) {
    return Mat3::Identity() + 0.5 * k + (1.0 / 6.0) * k * k;
  }
  const double t2 = theta * theta;
  const double half_sin = std::sin(0.5 * theta);
  // (1 - cos) / theta^2 via the half angle; (theta - sin) / theta^3 by series
  // where the difference cancels.
  const double a = 2.0 * half_sin * half_sin / t2;
  const double b = theta < 1e-2 ? 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0
                                : (theta - std::sin(theta)) / (t2 * theta);
  return Mat3::Identity() + a * k + b * k * k;
}

Mat3 so3_left_jacobian_inverse(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 k = skew(phi);
  if (theta < kSmallAngle) {
    return Mat3::Identity() - 0.5 * k + (1.0 / 12.0) * k * k;
  }
  // 1 / theta^2 - (1 + cos) / (2 theta sin), by series where it cancels.
  const double t2 = theta * theta;
  const double c = theta < 1e-2 ? 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
                                : 1.0 / t2 - 1.0 / (2.0 * theta * std::tan(0.5 * theta));
  return Mat3::Identity() - 0.5 * k + c * k * k;
}

namespace {

bool all_finite(const Twist& xi) { return xi.rho.allFinite() && xi.phi.allFinite(); }

// Off-diagonal block Q(rho, phi) of the SE(3) left Jacobian.
Mat3 se3_q_block(const Vec3& rho, const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 rx = skew(rho);
  const Mat3 px = skew(phi);
  double c1, c2, c3;
  // The closed-form coefficients cancel catastrophically for small angles;
  // the series is accurate to ~1e-12 below 0.05 rad.
  if (theta < 0.05) {
    const double t2 = theta * theta;
    const double t4 = t2 * t2;
    c1 = 1.0 / 6.0 - t2 / 120.0 + t4 / 5040.0;
    c2 = 1.0 / 24.0 - t2 / 720.0 + t4 / 40320.0;
    c3 = 1.0 / 120.0 - t2 / 2520.0 + t4 / 120960.0;
  } else {
    const double s = std::sin(theta);
    const double c = std::cos(theta);
    const double t2 = theta * theta;
    const double t3 = t2 * theta;
    c1 = (theta - s) / t3;
    c2 = (t2 + 2.0 * c - 2.0) / (2.0 * t2 * t2);
    c3 = (2.0 * theta - 3.0 * s + theta * c) / (2.0 * t2 * t3);
  }
  const Mat3 pr = px * rx;
  const Mat3 rp = rx * px;
  const Mat3 prp = pr * px;
  return 0.5 * rx + c1 * (pr + rp + prp) + c2 * (px * pr + rp * px - 3.0 * prp) +
         c3 * (prp * px + px * prp);
}

}  // namespace

Pose exp_se3(const Twist& xi) {
  if (!all_finite(xi)) throw Error(ErrorKind::kInvalidArgument, "exp_se3: non-finite twist");
  return Pose(exp_so3(xi.phi), so3_left_jacobian(xi.phi) * xi.rho);
}

Twist log_se3(const Pose& p) {
  const Vec3 phi = log_so3(p.rotation());
  return Twist{so3_left_jacobian_inverse(phi) * p.translation(), phi};
}

Pose compose(const Pose& a, const Pose& b) { return a * b; }

Pose inverse(const Pose& a) { return a.inverse(); }

double rotation_angle_between(const Rotation& a, const Rotation& b) {
  // Equivalent to 2 acos(|w|) of the relative quaternion, without the loss
  // of precision acos suffers near zero.
  const Eigen::Quaterniond rel = a.quaternion().conjugate() * b.quaternion();
  return 2.0 * std::atan2(rel.vec().norm(), std::abs(rel.w()));
}

Mat6 adjoint(const Pose& t) {
  const Mat3 r = t.rotation().matrix();
  Mat6 ad = Mat6::Zero();
  ad.topLeftCorner<3, 3>() = r;
  ad.topRightCorner<3, 3>() = skew(t.translation()) * r;
  ad.bottomRightCorner<3, 3>() = r;
  return ad;
}

Mat6 se3_left_jacobian(const Twist& xi) {
  const Mat3 j = so3_left_jacobian(xi.phi);
  Mat6 out = Mat6::Zero();
  out.topLeftCorner<3, 3>() = j;
  out.bottomRightCorner<3, 3>() = j;
  out.topRightCorner<3, 3>() = se3_q_block(xi.rho, xi.phi);
  return out;
}

Mat6 se3_left_jacobian_inverse(const Twist& xi) {
  const Mat3 jinv = so3_left_jacobian_inverse(xi.phi);
  Mat6 out = Mat6::Zero();
  out.topLeftCorner<3, 3>() = jinv;
  out.bottomRightCorner<3, 3>() = jinv;
  out.topRightCorner<3, 3>() = -jinv * se3_q_block(xi.rho, xi.phi) * jinv;
  return out;
}

double translation_distance(const Pose& a, const Pose& b) {
  return (a.translation() - b.translation()).norm();
}

}  // namespace posefuse
