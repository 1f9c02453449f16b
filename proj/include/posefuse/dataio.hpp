#pragma once

// File formats, the per-sequence directory layout, the synthetic sequence
// generator and the overlay bundle consumed by the review UI.
//
// Pose files are comma-separated, one line per frame:
//   frame,tx,ty,tz,qw,qx,qy,qz
// with meters and a w-first unit quaternion. Lines starting with '#' are
// comments. Values are written with 17 significant digits so that a
// write/read round trip is bit-exact.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "posefuse/image.hpp"
#include "posefuse/metrics.hpp"
#include "posefuse/pose_graph.hpp"
#include "posefuse/relpose.hpp"
#include "posefuse/smoother.hpp"

namespace posefuse {

namespace fs = std::filesystem;

// ---- pose trajectories -----------------------------------------------------

std::string format_pose_line(const TimedPose& p);
void write_poses(std::ostream& os, std::span<const TimedPose> poses);
void write_poses(const fs::path& path, std::span<const TimedPose> poses);

/// Quaternions off unit norm by more than 1e-6 are renormalized with a
/// warning; beyond 1e-3 the line is rejected. Throws Parse (with the line
/// number) or InvalidInput (non-increasing frames).
std::vector<TimedPose> read_poses(std::istream& is, const std::string& source,
                                  std::vector<std::string>* warnings = nullptr);
std::vector<TimedPose> read_poses(const fs::path& path,
                                  std::vector<std::string>* warnings = nullptr);

// ---- images ------------------------------------------------------------------

/// 16-bit single-channel PNG in millimeters, 0 = invalid.
DepthImage read_depth_png(const fs::path& path);
/// Depths are rounded to the nearest millimeter; values outside
/// (0, 65.535 m] are written as invalid.
void write_depth_png(const fs::path& path, const DepthImage& depth);
/// 8-bit single-channel PNG, nonzero = object.
Mask read_mask_png(const fs::path& path);
void write_mask_png(const fs::path& path, const Mask& mask);

// ---- model points ----------------------------------------------------------

/// ASCII PLY (vertex x, y, z) or a plain whitespace-separated `x y z` list.
/// Throws InvalidModel when empty or all points coincide.
ModelPoints read_model_points(const fs::path& path);
void write_model_ply(const fs::path& path, std::span<const Vec3> points);

/// Exact maximum pairwise distance. Brute force up to `brute_force_limit`
/// points; above it, pairs are pruned with the centroid-radius bound
/// |p - q| <= r_p + r_q, which keeps the result exact.
double model_diameter(std::span<const Vec3> points, size_t brute_force_limit = 5000);
double model_diameter_brute_force(std::span<const Vec3> points);

// ---- tracks, relative edges, overrides --------------------------------------

/// CSV `query,frame,u,v,visible` with a header line.
TrackTable read_tracks(const fs::path& path);
void write_tracks(const fs::path& path, const TrackTable& tracks);

/// CSV `frame_i,frame_j,tx,ty,tz,qw,qx,qy,qz,inliers,w00,...,w55`
/// (information row-major).
std::vector<RelativePoseEstimate> read_relatives(const fs::path& path);
void write_relatives(const fs::path& path, std::span<const RelativePoseEstimate> rel);

/// Override file:
///   # posefuse-overrides v1
///   range,<start>,<end>,<tier>[,<weight>]
///   edge,<frame>,<tier>[,<weight>]
OverrideFile parse_overrides(std::istream& is, const std::string& source);
OverrideFile read_overrides(const fs::path& path);
std::string format_overrides(const OverrideFile& o);
void write_overrides(const fs::path& path, const OverrideFile& o);

// ---- sequence manifest -------------------------------------------------------

struct SequenceManifest {
  fs::path dir;  // directory holding the manifest; relative paths resolve here
  std::string id;
  int frame_count = 0;
  int first_frame = 0;
  double rate_hz = 15.0;
  CameraIntrinsics intrinsics;
  Vec3 extents = Vec3::Zero();  // object box, full side lengths (m); zero if unknown
  std::string depth_pattern;    // printf-style, e.g. depth/%06d.png
  std::string mask_pattern;
  std::string frame_pattern;    // optional RGB frames for the review UI
  std::string model_file;
  std::string raw_poses_file;
  std::string gt_poses_file;
  std::string tracks_file;

  fs::path resolve(const std::string& rel) const { return dir / rel; }
  fs::path depth_path(int frame) const;
  fs::path mask_path(int frame) const;
  fs::path frame_path(int frame) const;
  std::vector<int> frames() const;
};

/// INI manifest; throws Parse/InvalidInput, including for referenced files
/// that do not exist.
SequenceManifest read_manifest(const fs::path& path);
void write_manifest(const fs::path& path, const SequenceManifest& m);

// ---- synthetic sequences -----------------------------------------------------

enum class MotionProfile { kStatic, kConstantVelocity, kSmooth };

struct Corruption {
  int frame = 0;
  double rot_deg = 20.0;
  double trans_mm = 50.0;
};

struct SynthSpec {
  std::string id = "synth";
  int frames = 500;
  double rate_hz = 15.0;
  MotionProfile motion = MotionProfile::kSmooth;
  double noise_trans_m = 0.005;
  double noise_rot_rad = 0.017453292519943295;
  double track_noise_px = 0.0;
  std::vector<Corruption> corruptions;
  std::uint64_t seed = 0;
  int width = 640;
  int height = 480;
  double focal = 615.0;
  Vec3 extents{0.12, 0.08, 0.06};
  int query_points = 400;
  int model_points = 2000;

  /// Throws InvalidSpec.
  void validate() const;
};

/// Ground-truth trajectory of a spec, without touching the filesystem.
std::vector<TimedPose> synth_ground_truth(const SynthSpec& spec);
/// GT plus measurement noise and corruptions, deterministic in the seed.
std::vector<TimedPose> synth_noisy_absolute(const SynthSpec& spec,
                                            std::span<const TimedPose> gt);
/// Analytic render of the box object: depth (with a background wall) and mask.
void render_box(const Pose& pose, const Vec3& extents, const CameraIntrinsics& k,
                DepthImage* depth, Mask* mask);
/// Points sampled uniformly on the surface of the box.
std::vector<Vec3> sample_box_surface(const Vec3& extents, int count, std::uint64_t seed);

/// Writes a full sequence directory: manifest.ini, poses_gt.csv,
/// poses_raw.csv, tracks.csv, depth/, mask/, model.ply, pipeline.ini (noise
/// settings matched to the generator) and corrupted.overrides (the corrupted
/// frames marked downweighted). Returns the manifest path.
fs::path synth_sequence(const SynthSpec& spec, const fs::path& out_dir);

// ---- overlays ----------------------------------------------------------------

struct Segment2d {
  Eigen::Vector2d a;
  Eigen::Vector2d b;
};

struct OverlayFrame {
  int frame = 0;
  std::vector<std::optional<Segment2d>> box_edges;  // 12, nullopt when behind the camera
  std::vector<std::optional<Segment2d>> axes;       // x, y, z
  double jitter_rot_deg = 0.0;
  double jitter_trans_mm = 0.0;
  double jitter() const { return jitter_rot_deg + jitter_trans_mm; }
};

struct OverlayBundle {
  std::string sequence;
  int width = 0;
  int height = 0;
  std::vector<int> frames;
  std::map<std::string, std::vector<OverlayFrame>> variants;
  std::vector<std::string> notices;
};

/// Projects the posed box (8 corners, 12 edges) and axes for each variant.
/// Variants that are empty are omitted with a notice. Variants must cover
/// the manifest frames; others are rejected with InvalidInput.
OverlayBundle export_overlays(const SequenceManifest& manifest,
                              const std::map<std::string, std::vector<TimedPose>>& trajectories,
                              const Vec3& extents, const CameraIntrinsics& k);
std::string overlay_bundle_json(const OverlayBundle& b);
void write_overlay_bundle(const fs::path& path, const OverlayBundle& b);

// ---- evaluation report ---------------------------------------------------------

std::string report_json(const EvaluationReport& r);
std::string report_table(const EvaluationReport& r);

}  // namespace posefuse
