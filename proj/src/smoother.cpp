#include "posefuse/smoother.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>

#include "posefuse/error.hpp"

namespace posefuse {

namespace {

using Mat6x12 = Eigen::Matrix<double, 6, 12>;
using Mat12x6 = Eigen::Matrix<double, 12, 6>;

constexpr double kPsdTolerance = 1e-9;

void symmetrize(Mat12& m) { m = 0.5 * (m + m.transpose()).eval(); }

void check_psd(const Mat12& cov, int frame, const char* stage) {
  const double min_eig = Eigen::SelfAdjointEigenSolver<Mat12>(cov, Eigen::EigenvaluesOnly)
                             .eigenvalues()
                             .minCoeff();
  if (!std::isfinite(min_eig) || min_eig < -kPsdTolerance) {
    std::ostringstream os;
    os << "covariance not PSD after " << stage << " at frame " << frame
       << " (min eigenvalue " << min_eig << ")";
    throw Error(ErrorKind::kNumericalFailure, os.str());
  }
}

Mat12 process_noise(const NoiseConfig& n) {
  const double dt = n.dt;
  const double dt2 = dt * dt;
  const double dt3 = dt2 * dt;
  Mat12 q = Mat12::Zero();
  const Mat3 i3 = Mat3::Identity();
  const double qa = n.q_accel * n.q_accel;
  const double qw = n.q_alpha * n.q_alpha;
  q.block<3, 3>(0, 0) = qa * dt3 / 3.0 * i3;
  q.block<3, 3>(0, 6) = qa * dt2 / 2.0 * i3;
  q.block<3, 3>(6, 0) = qa * dt2 / 2.0 * i3;
  q.block<3, 3>(6, 6) = qa * dt * i3;
  q.block<3, 3>(3, 3) = qw * dt3 / 3.0 * i3;
  q.block<3, 3>(3, 9) = qw * dt2 / 2.0 * i3;
  q.block<3, 3>(9, 3) = qw * dt2 / 2.0 * i3;
  q.block<3, 3>(9, 9) = qw * dt * i3;
  return q;
}

FilterState initial_state(const Pose& z, const NoiseConfig& n) {
  FilterState x;
  x.p = z.translation();
  x.q = z.rotation();
  // Wide prior on pose so the first update is dominated by the measurement.
  Vec12 var;
  const double st = 1e2 * n.sigma_meas_trans;
  const double sr = 1e2 * n.sigma_meas_rot;
  var << Vec3::Constant(st * st), Vec3::Constant(sr * sr),
      Vec3::Constant(n.init_sigma_vel * n.init_sigma_vel),
      Vec3::Constant(n.init_sigma_angvel * n.init_sigma_angvel);
  x.cov = var.asDiagonal();
  return x;
}

}  // namespace

void NoiseConfig::validate() const {
  const double fields[] = {sigma_meas_trans, sigma_meas_rot, q_accel, q_alpha,
                           dt, init_sigma_vel, init_sigma_angvel};
  for (double f : fields) {
    if (!(f > 0.0) || !std::isfinite(f)) {
      throw Error(ErrorKind::kInvalidArgument, "noise parameters must be strictly positive");
    }
  }
}

Vec12 state_difference(const FilterState& a, const FilterState& b) {
  Vec12 d;
  d << a.p - b.p, log_so3(b.q.inverse() * a.q), a.v - b.v, a.w - b.w;
  return d;
}

FilterState state_retract(const FilterState& x, const Vec12& delta) {
  FilterState out = x;
  out.p += delta.segment<3>(0);
  out.q = (x.q * exp_so3(delta.segment<3>(3))).aligned_to(x.q);
  out.v += delta.segment<3>(6);
  out.w += delta.segment<3>(9);
  return out;
}

FilterState ekf_predict(const FilterState& x, const NoiseConfig& noise, Mat12* transition) {
  const double dt = noise.dt;
  const Vec3 step = x.w * dt;
  FilterState out;
  out.p = x.p + x.v * dt;
  out.q = (x.q * exp_so3(step)).aligned_to(x.q);
  out.v = x.v;
  out.w = x.w;

  Mat12 f = Mat12::Identity();
  f.block<3, 3>(0, 6) = dt * Mat3::Identity();
  f.block<3, 3>(3, 3) = exp_so3(step).matrix().transpose();
  f.block<3, 3>(3, 9) = so3_right_jacobian(step) * dt;

  out.cov = f * x.cov * f.transpose() + process_noise(noise);
  symmetrize(out.cov);
  if (transition) *transition = f;
  return out;
}

FilterState ekf_update(const FilterState& x, const Pose& z, const NoiseConfig& noise) {
  Mat6x12 h = Mat6x12::Zero();
  h.leftCols<6>().setIdentity();

  Vec6 innovation;
  innovation << z.translation() - x.p, log_so3(x.q.inverse() * z.rotation());

  Vec6 r_diag;
  r_diag << Vec3::Constant(noise.sigma_meas_trans * noise.sigma_meas_trans),
      Vec3::Constant(noise.sigma_meas_rot * noise.sigma_meas_rot);
  const Mat6 r = r_diag.asDiagonal();

  const Mat6 s = h * x.cov * h.transpose() + r;
  const Mat12x6 pht = x.cov * h.transpose();
  const Mat12x6 k = s.ldlt().solve(pht.transpose()).transpose();

  FilterState out = state_retract(x, k * innovation);
  const Mat12 ikh = Mat12::Identity() - k * h;
  out.cov = ikh * x.cov * ikh.transpose() + k * r * k.transpose();
  symmetrize(out.cov);
  return out;
}

std::vector<ForwardStep> ekf_forward(std::span<const TimedPose> measurements,
                                     const NoiseConfig& noise) {
  noise.validate();
  if (measurements.size() < 2) {
    throw Error(ErrorKind::kInsufficientData, "smoother needs at least 2 measurements");
  }
  for (size_t i = 1; i < measurements.size(); ++i) {
    if (measurements[i].frame <= measurements[i - 1].frame) {
      throw Error(ErrorKind::kInvalidInput,
                  "measurement frames must be strictly increasing (frame " +
                      std::to_string(measurements[i].frame) + ")");
    }
  }

  const int first = measurements.front().frame;
  const int last = measurements.back().frame;
  std::vector<ForwardStep> steps;
  steps.reserve(static_cast<size_t>(last - first + 1));

  size_t next = 0;
  for (int frame = first; frame <= last; ++frame) {
    ForwardStep step;
    step.frame = frame;
    if (steps.empty()) {
      step.predicted = initial_state(measurements[0].pose, noise);
    } else {
      step.predicted = ekf_predict(steps.back().updated, noise, &step.transition);
      check_psd(step.predicted.cov, frame, "prediction");
    }
    if (next < measurements.size() && measurements[next].frame == frame) {
      step.has_measurement = true;
      step.updated = ekf_update(step.predicted, measurements[next].pose, noise);
      check_psd(step.updated.cov, frame, "update");
      ++next;
    } else {
      step.updated = step.predicted;
    }
    steps.push_back(std::move(step));
  }
  return steps;
}

SmoothedTrajectory rts_backward(std::span<const ForwardStep> forward) {
  SmoothedTrajectory out;
  const size_t n = forward.size();
  if (n == 0) return out;
  out.frames.resize(n);
  out.gap_mask.resize(n);
  for (size_t i = 0; i < n; ++i) {
    out.frames[i].frame = forward[i].frame;
    out.gap_mask[i] = !forward[i].has_measurement;
  }
  out.frames[n - 1].state = forward[n - 1].updated;

  for (size_t k = n - 1; k-- > 0;) {
    const FilterState& filt = forward[k].updated;
    const ForwardStep& next = forward[k + 1];
    Mat12 pred_cov = next.predicted.cov;

    Eigen::LDLT<Mat12> ldlt(pred_cov);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-15) {
      out.warnings.push_back("singular predicted covariance at frame " +
                             std::to_string(next.frame) + ", regularized with 1e-12*I");
      pred_cov += 1e-12 * Mat12::Identity();
      ldlt.compute(pred_cov);
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-15) {
        throw Error(ErrorKind::kNumericalFailure,
                    "predicted covariance singular at frame " + std::to_string(next.frame));
      }
    }

    // G = P_k F^T P_{k+1|k}^{-1}; the covariances are symmetric.
    const Mat12 gain = ldlt.solve(next.transition * filt.cov).transpose();
    const FilterState& smoothed_next = out.frames[k + 1].state;
    const Vec12 diff = state_difference(smoothed_next, next.predicted);

    FilterState s = state_retract(filt, gain * diff);
    s.cov = filt.cov + gain * (smoothed_next.cov - next.predicted.cov) * gain.transpose();
    symmetrize(s.cov);
    check_psd(s.cov, forward[k].frame, "smoothing");
    s.q = s.q.aligned_to(smoothed_next.q);
    out.frames[k].state = s;
  }
  return out;
}

SmoothedTrajectory smooth(std::span<const TimedPose> measurements, const NoiseConfig& noise) {
  const auto forward = ekf_forward(measurements, noise);
  return rts_backward(forward);
}

std::vector<TimedPose> SmoothedTrajectory::poses() const {
  std::vector<TimedPose> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back({f.frame, f.pose()});
  return out;
}

std::vector<TimedPose> filtered_poses(std::span<const ForwardStep> forward) {
  std::vector<TimedPose> out;
  out.reserve(forward.size());
  for (const auto& s : forward) out.push_back({s.frame, s.updated.pose()});
  return out;
}

double nees(const FilterState& estimate, const FilterState& truth) {
  const Vec12 e = state_difference(truth, estimate);
  return e.dot(estimate.cov.ldlt().solve(e));
}

}  // namespace posefuse
