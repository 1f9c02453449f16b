#pragma once

// Global error-state EKF followed by a Rauch-Tung-Striebel backward pass
// over a sequence of absolute object-pose measurements.
//
// State: position p, orientation q, linear velocity v, angular velocity w
// (body frame), propagated under a constant-velocity model. The 12-dim
// error state is ordered [dp, dtheta, dv, dw]; dtheta perturbs q on the
// right, q_true = q * exp(dtheta).

#include <span>
#include <string>
#include <vector>

#include "posefuse/se3.hpp"

namespace posefuse {

using Mat12 = Eigen::Matrix<double, 12, 12>;
using Vec12 = Eigen::Matrix<double, 12, 1>;

struct TimedPose {
  int frame = 0;
  Pose pose;
};

struct NoiseConfig {
  double sigma_meas_trans = 0.005;              // m
  double sigma_meas_rot = 0.017453292519943295;  // rad (1 deg)
  double q_accel = 0.5;                          // m/s^2 / sqrt(Hz)
  double q_alpha = 0.5;                          // rad/s^2 / sqrt(Hz)
  double dt = 1.0 / 15.0;                        // s per frame
  // Prior on the velocities at the first frame.
  double init_sigma_vel = 0.5;     // m/s
  double init_sigma_angvel = 1.0;  // rad/s

  /// Throws InvalidArgument unless every field is strictly positive.
  void validate() const;
};

struct FilterState {
  Vec3 p = Vec3::Zero();
  Rotation q;
  Vec3 v = Vec3::Zero();
  Vec3 w = Vec3::Zero();
  Mat12 cov = Mat12::Identity();

  Pose pose() const { return Pose(q, p); }
};

/// Error-state difference a (-) b, ordered [dp, dtheta, dv, dw].
Vec12 state_difference(const FilterState& a, const FilterState& b);
/// Retraction x (+) delta (covariance untouched).
FilterState state_retract(const FilterState& x, const Vec12& delta);

/// Constant-velocity propagation by one frame. Writes the error-state
/// transition matrix into `transition` when non-null.
FilterState ekf_predict(const FilterState& x, const NoiseConfig& noise, Mat12* transition = nullptr);
/// Pose-measurement update (H selects the [dp, dtheta] block).
FilterState ekf_update(const FilterState& x, const Pose& z, const NoiseConfig& noise);

struct ForwardStep {
  int frame = 0;
  bool has_measurement = false;
  FilterState predicted;
  FilterState updated;
  /// Transition from the previous step; identity on the first step.
  Mat12 transition = Mat12::Identity();
};

/// Forward pass over every frame from the first to the last measurement;
/// frames without a measurement are predict-only.
/// Throws InsufficientData (< 2 measurements), InvalidInput (non-increasing
/// frames) or NumericalFailure (covariance left the PSD cone).
std::vector<ForwardStep> ekf_forward(std::span<const TimedPose> measurements,
                                     const NoiseConfig& noise);

struct SmoothedFrame {
  int frame = 0;
  FilterState state;
  Pose pose() const { return state.pose(); }
};

struct SmoothedTrajectory {
  std::vector<SmoothedFrame> frames;
  std::vector<bool> gap_mask;         // true where the frame had no measurement
  std::vector<std::string> warnings;  // e.g. covariance regularization

  std::vector<TimedPose> poses() const;
};

SmoothedTrajectory rts_backward(std::span<const ForwardStep> forward);

SmoothedTrajectory smooth(std::span<const TimedPose> measurements, const NoiseConfig& noise);

/// Filtered (forward-only) poses, for comparison against the smoother.
std::vector<TimedPose> filtered_poses(std::span<const ForwardStep> forward);

/// Normalized estimation error squared of `estimate` against a true state.
double nees(const FilterState& estimate, const FilterState& truth);

}  // namespace posefuse
