#pragma once

// Pose graphs with known optima, shared by the unit tests and the
// acceptance runner.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "oracles.hpp"
#include "posefuse/pose_graph.hpp"

namespace posefuse::fixture {

inline constexpr double kDeg = std::numbers::pi / 180.0;

inline std::vector<TimedPose> smooth_truth(int n) {
  std::vector<TimedPose> out;
  for (int k = 0; k < n; ++k) {
    const double t = k / 15.0;
    out.push_back({k, Pose(exp_so3(Vec3(0.3, -0.2, 0.1) + Vec3(0.1, 0.4, -0.2) * t),
                           Vec3(0.05 * std::sin(t), -0.03 * t, 0.7 + 0.02 * std::cos(2 * t)))});
  }
  return out;
}

inline Mat6 random_spd(std::mt19937_64& rng, double scale) {
  Mat6 a;
  std::normal_distribution<double> n;
  for (int i = 0; i < 36; ++i) a(i) = n(rng);
  return scale * (a * a.transpose() + 6.0 * Mat6::Identity());
}

inline Pose perturb(const Pose& p, std::mt19937_64& rng, double rot, double trans) {
  return p * exp_se3(Twist{oracle::random_vec(rng, trans), oracle::random_axis_angle(rng, rot)});
}

/// Graph whose edges agree exactly with `truth`: absolute edges on every
/// frame and relative edges at strides 1 and 3 with random SPD information.
inline PoseGraph consistent_graph(const std::vector<TimedPose>& truth, std::mt19937_64& rng) {
  PoseGraph g;
  for (const auto& p : truth) {
    g.frames.push_back(p.frame);
    g.initial.push_back(perturb(p.pose, rng, 5 * kDeg, 0.02));
    g.absolute.push_back({p.frame, p.pose, 1e3 * Mat6::Identity(), ReliabilityTier::kDefault});
  }
  for (size_t i = 0; i < truth.size(); ++i) {
    for (size_t s : {1u, 3u}) {
      if (i + s >= truth.size()) continue;
      g.relative.push_back({truth[i].frame, truth[i + s].frame,
                            truth[i].pose.inverse() * truth[i + s].pose, random_spd(rng, 10.0)});
    }
  }
  return g;
}

inline PoseGraph noisy_graph(const std::vector<TimedPose>& truth, std::mt19937_64& rng) {
  PoseGraph g = consistent_graph(truth, rng);
  for (auto& a : g.absolute) a.measurement = perturb(a.measurement, rng, 1 * kDeg, 0.005);
  for (auto& r : g.relative) r.measurement = perturb(r.measurement, rng, 0.2 * kDeg, 0.001);
  return g;
}

inline double max_pose_gap(std::span<const Pose> a, std::span<const Pose> b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, log_se3(a[i].inverse() * b[i]).vector().cwiseAbs().maxCoeff());
  }
  return m;
}

}  // namespace posefuse::fixture
