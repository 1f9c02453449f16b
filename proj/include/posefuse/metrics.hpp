#pragma once

// Trajectory and object-pose evaluation metrics. Lengths are reported in
// millimeters and angles in degrees unless a name says otherwise.

#include <optional>
#include <span>
#include <vector>

#include "posefuse/exec.hpp"
#include "posefuse/se3.hpp"
#include "posefuse/smoother.hpp"

namespace posefuse {

struct Stats {
  double mean = 0.0;
  double median = 0.0;
  double max = 0.0;
  std::vector<double> values;

  static Stats of(std::vector<double> values);
};

struct TrajectoryPair {
  std::vector<TimedPose> estimate;
  std::vector<TimedPose> reference;

  /// Throws InvalidInput unless both have equal length >= 2 and identical
  /// frame indices.
  void validate() const;
  /// Intersection of two trajectories on their common frames.
  static TrajectoryPair matched(std::span<const TimedPose> estimate,
                                std::span<const TimedPose> reference);
};

/// Per-frame translation error in mm. With `align`, the estimate is first
/// rigidly aligned to the reference positions (camera-trajectory use).
Stats ate(const TrajectoryPair& pair, bool align = false);

struct RpeResult {
  Stats rot_deg;
  Stats trans_mm;
};

/// Throws InvalidInput when delta < 1 or delta >= length.
RpeResult rpe(const TrajectoryPair& pair, int delta = 1);

struct ModelPoints {
  std::vector<Vec3> points;  // object-local, meters
  double diameter = 0.0;     // meters
};

/// Nearest-neighbor index over a fixed point set: brute force up to
/// `brute_force_limit` points, a uniform grid above.
class NearestNeighbor {
 public:
  explicit NearestNeighbor(std::span<const Vec3> points, size_t brute_force_limit = 2000);
  double distance(const Vec3& q) const;
  bool uses_grid() const { return use_grid_; }

 private:
  std::vector<Vec3> points_;
  bool use_grid_ = false;
  Vec3 origin_ = Vec3::Zero();
  double cell_ = 1.0;
  Eigen::Vector3i dims_ = Eigen::Vector3i::Zero();
  std::vector<int> cell_start_;  // CSR layout over cells
  std::vector<int> cell_points_;
};

struct AddResult {
  std::vector<double> add_m;   // per frame, meters
  std::vector<double> adds_m;  // per frame, meters
  double add_auc = 0.0;        // percent
  double adds_auc = 0.0;
  double add_01d = 0.0;        // percent of frames below 0.1 * diameter
  double adds_01d = 0.0;
};

/// Area under the recall-vs-threshold curve on (0, max_threshold], as a
/// percentage, integrated exactly for the empirical recall step function.
double recall_auc(std::span<const double> distances_m, double max_threshold_m = 0.1);

/// Throws InvalidInput on an empty model.
AddResult add_metrics(const TrajectoryPair& pair, const ModelPoints& model,
                      Exec exec = Exec::kSerial);

/// Volume of the intersection of two oriented boxes. Each box is centered on
/// its pose origin with full side lengths `extents`.
double box_intersection_volume(const Pose& a, const Vec3& extents_a, const Pose& b,
                               const Vec3& extents_b);
double box_iou(const Pose& a, const Vec3& extents_a, const Pose& b, const Vec3& extents_b);

struct IouResult {
  std::vector<double> iou;
  double recall25 = 0.0;  // percent of frames with IoU > 0.25
  double recall50 = 0.0;
  double recall75 = 0.0;
};

/// `extents` holds one entry (shared by all frames) or one per frame.
IouResult iou3d(const TrajectoryPair& pair, std::span<const Vec3> extents,
                Exec exec = Exec::kSerial);

struct PoseThreshold {
  double deg = 5.0;
  double cm = 2.0;
};

/// Percent of frames with rotation error < deg and translation error < cm.
std::vector<double> pose_recalls(const TrajectoryPair& pair,
                                 std::span<const PoseThreshold> thresholds);

struct EvaluationOptions {
  int rpe_delta = 1;
  bool align = false;
  std::vector<PoseThreshold> thresholds{{5, 2}, {5, 5}, {10, 2}, {10, 5}, {10, 10}};
  Exec exec = Exec::kSerial;
};

struct EvaluationReport {
  Stats ate_mm;
  Stats rpe_rot_deg;
  Stats rpe_trans_mm;
  std::optional<AddResult> add;
  std::optional<IouResult> iou;
  std::vector<PoseThreshold> thresholds;
  std::vector<double> pose_recalls;
};

EvaluationReport evaluate(const TrajectoryPair& pair, const ModelPoints* model,
                          std::span<const Vec3> extents, const EvaluationOptions& opts);

}  // namespace posefuse
