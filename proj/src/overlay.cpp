#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "posefuse/dataio.hpp"
#include "posefuse/error.hpp"

namespace posefuse {

namespace {

using json = nlohmann::ordered_json;

constexpr double kNearPlane = 1e-3;  // m

// Clips the camera-frame segment to z >= near and projects it.
std::optional<Segment2d> project_segment(Vec3 a, Vec3 b, const CameraIntrinsics& k) {
  if (a.z() < kNearPlane && b.z() < kNearPlane) return std::nullopt;
  if (a.z() < kNearPlane) a = a + (b - a) * ((kNearPlane - a.z()) / (b.z() - a.z()));
  if (b.z() < kNearPlane) b = b + (a - b) * ((kNearPlane - b.z()) / (a.z() - b.z()));
  Segment2d s{k.project(a), k.project(b)};
  if (!s.a.allFinite() || !s.b.allFinite()) return std::nullopt;
  return s;
}

constexpr int kEdges[12][2] = {{0, 1}, {2, 3}, {4, 5}, {6, 7}, {0, 2}, {1, 3},
                               {4, 6}, {5, 7}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

OverlayFrame project_frame(int frame, const Pose& pose, const Vec3& extents,
                           const CameraIntrinsics& k) {
  const Vec3 h = 0.5 * extents;
  Vec3 corners[8];
  for (int c = 0; c < 8; ++c) {
    corners[c] = pose * Vec3((c & 1) ? h.x() : -h.x(), (c & 2) ? h.y() : -h.y(),
                             (c & 4) ? h.z() : -h.z());
  }
  OverlayFrame f;
  f.frame = frame;
  for (const auto& e : kEdges) f.box_edges.push_back(project_segment(corners[e[0]], corners[e[1]], k));
  const double len = 0.6 * extents.maxCoeff();
  const Vec3 origin = pose.translation();
  for (int a = 0; a < 3; ++a) {
    f.axes.push_back(project_segment(origin, pose * (len * Vec3::Unit(a)), k));
  }
  return f;
}

json segment_json(const std::optional<Segment2d>& s) {
  if (!s) return nullptr;
  return json::array({s->a.x(), s->a.y(), s->b.x(), s->b.y()});
}

}  // namespace

OverlayBundle export_overlays(const SequenceManifest& manifest,
                              const std::map<std::string, std::vector<TimedPose>>& trajectories,
                              const Vec3& extents, const CameraIntrinsics& k) {
  if (!(extents.minCoeff() > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "overlay export needs positive object extents");
  }
  k.validate();
  OverlayBundle b;
  b.sequence = manifest.id;
  b.width = k.width;
  b.height = k.height;
  b.frames = manifest.frames();

  for (const char* name : {"raw", "smoothed", "pgo", "gt"}) {
    if (!trajectories.count(name)) b.notices.push_back(std::string("variant '") + name + "' not provided");
  }
  for (const auto& [name, poses] : trajectories) {
    if (poses.empty()) {
      b.notices.push_back("variant '" + name + "' is empty and was omitted");
      continue;
    }
    std::map<int, const Pose*> by_frame;
    for (const auto& p : poses) by_frame[p.frame] = &p.pose;
    std::vector<OverlayFrame> frames;
    frames.reserve(b.frames.size());
    const Pose* prev = nullptr;
    for (int f : b.frames) {
      auto it = by_frame.find(f);
      if (it == by_frame.end()) {
        throw Error(ErrorKind::kInvalidInput, "variant '" + name + "' has no pose for frame " +
                                                  std::to_string(f) + " of sequence " + manifest.id);
      }
      OverlayFrame of = project_frame(f, *it->second, extents, k);
      if (prev) {
        of.jitter_rot_deg =
            rotation_angle_between(prev->rotation(), it->second->rotation()) * 180.0 / std::numbers::pi;
        of.jitter_trans_mm = translation_distance(*prev, *it->second) * 1e3;
      }
      prev = it->second;
      frames.push_back(std::move(of));
    }
    b.variants[name] = std::move(frames);
  }
  return b;
}

std::string overlay_bundle_json(const OverlayBundle& b) {
  json j;
  j["format"] = "posefuse-overlays v1";
  j["sequence"] = b.sequence;
  j["width"] = b.width;
  j["height"] = b.height;
  j["frames"] = b.frames;
  json variants = json::object();
  for (const auto& [name, frames] : b.variants) {
    json arr = json::array();
    for (const auto& f : frames) {
      json edges = json::array();
      for (const auto& e : f.box_edges) edges.push_back(segment_json(e));
      json axes = json::array();
      for (const auto& a : f.axes) axes.push_back(segment_json(a));
      arr.push_back({{"frame", f.frame},
                     {"box_edges", edges},
                     {"axes", axes},
                     {"jitter", f.jitter()},
                     {"jitter_rot_deg", f.jitter_rot_deg},
                     {"jitter_trans_mm", f.jitter_trans_mm}});
    }
    variants[name] = arr;
  }
  j["variants"] = variants;
  j["notices"] = b.notices;
  return j.dump(1) + "\n";
}

void write_overlay_bundle(const fs::path& path, const OverlayBundle& b) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  os << overlay_bundle_json(b);
}

}  // namespace posefuse
