#pragma once

// Relative object poses from 2D point tracks and depth.
//
// A RelativePoseEstimate for the pair (i, j) holds the camera-frame motion
// M with x_j = M * x_i for object points seen in both frames. For object
// poses T_i, T_j this is M = T_j * T_i^-1. Its information matrix is
// expressed for a left perturbation of M, matching the registration
// residual Jacobian [I | -[M x_i]_x].

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "posefuse/exec.hpp"
#include "posefuse/image.hpp"
#include "posefuse/se3.hpp"
#include "posefuse/smoother.hpp"

namespace posefuse {

struct TrackObservation {
  int frame = 0;
  double u = 0.0;
  double v = 0.0;
  bool visible = false;
};

/// One track per query point, observations sorted by frame.
struct TrackTable {
  std::vector<std::vector<TrackObservation>> tracks;

  const TrackObservation* find(size_t query, int frame) const;
};

struct CorrespondenceSet {
  int frame_i = 0;
  int frame_j = 0;
  std::vector<Vec3> points_i;
  std::vector<Vec3> points_j;
  std::vector<double> weights;

  size_t size() const { return points_i.size(); }
};

struct RansacConfig {
  int iters = 500;
  double inlier_threshold_m = 0.010;
  std::uint64_t seed = 0;
};

struct RelativePoseEstimate {
  int frame_i = 0;
  int frame_j = 0;
  Pose pose;
  std::vector<int> inliers;
  Mat6 information = Mat6::Zero();
};

inline constexpr double kMinDepth = 0.1;
inline constexpr double kMaxDepth = 5.0;

/// Back-projects tracks visible in both frames into 3D pairs. Depth is read
/// at the nearest pixel; pairs outside the masks or outside (0.1 m, 5 m)
/// are dropped. Masks are optional.
/// Throws InsufficientCorrespondences when fewer than 3 pairs survive.
CorrespondenceSet backproject(const TrackTable& tracks, const DepthImage& depth_i,
                              const DepthImage& depth_j, const Mask* mask_i, const Mask* mask_j,
                              const CameraIntrinsics& k, int frame_i, int frame_j);

/// Closed-form weighted rigid fit (no scale) minimizing sum w |T src - dst|^2.
Pose fit_rigid(std::span<const Vec3> src, std::span<const Vec3> dst,
               std::span<const double> weights = {});

/// RANSAC over minimal 3-point samples, refit on all inliers.
/// Throws RegistrationFailure when no model reaches 3 inliers.
RelativePoseEstimate register_correspondences(const CorrespondenceSet& corr,
                                              const RansacConfig& ransac);

/// Gauss-Newton information J^T J / sigma^2 at the registration optimum,
/// stacked over the inliers; symmetrized and floored to PSD.
Mat6 information_matrix(const RelativePoseEstimate& est, const CorrespondenceSet& corr,
                        double sigma_point_m);

/// Frame pairs (i, i + s) for every stride s over the given frames.
std::vector<std::pair<int, int>> make_pairs(std::span<const int> frames,
                                            std::span<const int> strides);

struct RelposeConfig {
  RansacConfig ransac;
  double sigma_point_m = 0.005;
  std::vector<int> strides{1, 5};
};

/// Registers a batch of correspondence sets. Each pair gets its own RANSAC
/// stream derived from the base seed and the pair index, so serial and
/// parallel execution give identical results in input order. Pairs that
/// fail registration are returned as nullopt.
std::vector<std::optional<RelativePoseEstimate>> register_all(
    std::span<const CorrespondenceSet> sets, const RelposeConfig& cfg, Exec exec);

/// Chains consecutive relatives from an anchor pose: T_j = M_ij * T_i.
/// Throws Gap when a consecutive pair is missing.
std::vector<TimedPose> chain_relative(const Pose& anchor, int anchor_frame,
                                      std::span<const RelativePoseEstimate> estimates);

}  // namespace posefuse
