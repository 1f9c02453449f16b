#pragma once

// Object pose graph: one node per frame (T_i, object-local -> camera),
// absolute edges from the smoothed absolute estimates and relative edges
// from point-track registration. The cost is
//
//   F(T) = sum_abs r_a^T W_a r_a + sum_rel r_ij^T W_ij r_ij
//   r_a  = log(z_a^-1 T_i)
//   r_ij = log(z_ij^-1 T_i^-1 T_j)
//
// minimized by Levenberg-Marquardt with right-perturbation updates
// T_i <- T_i exp(delta_i).

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "posefuse/exec.hpp"
#include "posefuse/relpose.hpp"
#include "posefuse/se3.hpp"
#include "posefuse/smoother.hpp"

namespace posefuse {

enum class ReliabilityTier { kDefault, kDownweighted, kRemoved };

const char* to_string(ReliabilityTier tier);
/// Throws Parse on an unknown name.
ReliabilityTier parse_tier(const std::string& name);

struct AbsoluteEdge {
  int frame = 0;
  Pose measurement;
  Mat6 information = Mat6::Identity();
  ReliabilityTier tier = ReliabilityTier::kDefault;
};

struct RelativeEdge {
  int frame_i = 0;
  int frame_j = 0;
  Pose measurement;  // z_ij ~ T_i^-1 T_j
  Mat6 information = Mat6::Identity();
};

struct PoseGraph {
  std::vector<int> frames;  // node i <-> frames[i], strictly increasing
  std::vector<Pose> initial;
  std::vector<AbsoluteEdge> absolute;
  std::vector<RelativeEdge> relative;

  /// Node index of a frame, or -1.
  int node_index(int frame) const;
};

struct OverrideEntry {
  enum class Kind { kRange, kEdge };
  Kind kind = Kind::kRange;
  int start = 0;
  int end = 0;  // inclusive; equals start for edge entries
  ReliabilityTier tier = ReliabilityTier::kDownweighted;
  std::optional<double> weight;
};

/// Annotator decisions on absolute edges; later entries win.
struct OverrideFile {
  std::vector<OverrideEntry> entries;
};

enum class RelativeInfoMode {
  kRaw,         // registration information as computed
  kNormalized,  // rescaled so the mean diagonal equals relative_level
};

struct EdgeWeights {
  double default_weight = 1e5;
  double downweighted_weight = 5e2;
  RelativeInfoMode relative_mode = RelativeInfoMode::kNormalized;
  double relative_level = 1e2;
};

/// Builds the graph over every frame of `smoothed`. Relative estimates are
/// camera-frame motions (see relpose.hpp); they are converted to the
/// object-frame measurement z_ij = T_i^-1 M T_i using the smoothed pose at
/// frame i, with the information transported accordingly.
/// Throws InvalidInput for relatives or overrides outside the sequence and
/// UnanchoredGraph when a connected component has no usable absolute edge.
PoseGraph build_graph(const SmoothedTrajectory& smoothed,
                      std::span<const RelativePoseEstimate> relatives,
                      const OverrideFile& overrides, const EdgeWeights& weights);

/// Same, from plain absolute poses.
PoseGraph build_graph(std::span<const TimedPose> absolute,
                      std::span<const RelativePoseEstimate> relatives,
                      const OverrideFile& overrides, const EdgeWeights& weights);

/// Converts a camera-frame relative estimate into a graph edge, given the
/// pose at its first frame.
RelativeEdge to_relative_edge(const RelativePoseEstimate& est, const Pose& pose_i,
                              const EdgeWeights& weights);

Twist residual_absolute(const Pose& node, const Pose& z);
Twist residual_relative(const Pose& node_i, const Pose& node_j, const Pose& z);

/// Jacobian of residual_absolute w.r.t. a right perturbation of the node.
Mat6 jacobian_absolute(const Pose& node, const Pose& z);
/// Jacobians of residual_relative w.r.t. right perturbations of i and j.
void jacobian_relative(const Pose& node_i, const Pose& node_j, const Pose& z, Mat6* d_i,
                       Mat6* d_j);

struct RobustKernel {
  enum class Type { kNone, kHuber };
  Type type = Type::kNone;
  double delta = 3.0;  // on the whitened residual norm

  double rho(double squared) const;     // cost of one edge given r^T W r
  double weight(double squared) const;  // IRLS weight rho'(s^2)
};

struct OptimizerOptions {
  int max_iters = 100;
  double lambda_init = 1e-4;
  double lambda_min = 1e-12;
  double lambda_max = 1e10;
  double abs_tol = 1e-10;  // gradient infinity norm
  double rel_tol = 1e-9;   // relative cost decrease
  RobustKernel robust;
  Exec exec = Exec::kSerial;
};

struct IterationRecord {
  int iteration = 0;
  double cost = 0.0;  // cost after this iteration (unchanged if rejected)
  double lambda = 0.0;
  double gradient_norm = 0.0;
  bool accepted = false;
};

struct OptimizeResult {
  std::vector<Pose> poses;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  std::string termination;
  std::vector<IterationRecord> log;

  std::vector<TimedPose> timed(const PoseGraph& g) const;
};

double graph_cost(const PoseGraph& graph, std::span<const Pose> poses,
                  const RobustKernel& robust = {}, Exec exec = Exec::kSerial);

/// Throws UnanchoredGraph, or OptimizationFailure when the damped normal
/// equations cannot be solved even at maximum damping.
OptimizeResult optimize(const PoseGraph& graph, const OptimizerOptions& opts);

/// Throws UnanchoredGraph if some connected component has no absolute edge
/// with nonzero information.
void check_anchored(const PoseGraph& graph);

}  // namespace posefuse
