#pragma once

// Pipeline configuration: an INI file with the sections below. Every key is
// optional; unknown sections or keys are rejected.
//
//   [noise]      sigma_meas_trans, sigma_meas_rot_deg, q_accel, q_alpha,
//                rate_hz, init_sigma_vel, init_sigma_angvel
//   [ransac]     iters, inlier_threshold_m, seed
//   [relpose]    sigma_point_m, strides (space-separated)
//   [weights]    default, downweighted, relative_mode (raw|normalized),
//                relative_level
//   [optimizer]  max_iters, lambda_init, lambda_min, lambda_max, abs_tol,
//                rel_tol, robust (none|huber), huber_delta
//   [pipeline]   removal (after_smoothing|before_smoothing)

#include <filesystem>
#include <string>

#include "posefuse/pose_graph.hpp"
#include "posefuse/relpose.hpp"
#include "posefuse/smoother.hpp"

namespace posefuse {

/// When override removals apply relative to smoothing. `kAfterSmoothing`
/// smooths every raw measurement and drops removed edges from the graph;
/// `kBeforeSmoothing` also withholds removed frames from the smoother so it
/// bridges them by prediction.
enum class RemovalOrder { kAfterSmoothing, kBeforeSmoothing };

struct PipelineConfig {
  NoiseConfig noise;
  RelposeConfig relpose;
  EdgeWeights weights;
  OptimizerOptions optimizer;
  RemovalOrder removal = RemovalOrder::kAfterSmoothing;

  /// Throws InvalidInput on inconsistent values.
  void validate() const;
};

/// Applies the keys of an INI string on top of `base`. Throws Parse for
/// malformed text and InvalidInput for unknown keys or bad values.
PipelineConfig apply_config(const PipelineConfig& base, const std::string& text,
                            const std::string& source);
PipelineConfig load_config(const PipelineConfig& base, const std::filesystem::path& path);

}  // namespace posefuse
