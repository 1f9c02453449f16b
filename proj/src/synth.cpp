#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "posefuse/dataio.hpp"
#include "posefuse/error.hpp"

namespace posefuse {

namespace {

constexpr double kWallDepth = 1.2;  // background plane behind the object (m)

struct SurfaceSample {
  Vec3 point;
  Vec3 normal;
};

std::vector<SurfaceSample> sample_surface(const Vec3& extents, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-0.5, 0.5);
  const Vec3 h = 0.5 * extents;
  const double areas[3] = {extents.y() * extents.z(), extents.x() * extents.z(),
                           extents.x() * extents.y()};
  std::discrete_distribution<int> axis_pick({areas[0], areas[0], areas[1], areas[1], areas[2], areas[2]});
  std::vector<SurfaceSample> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const int face = axis_pick(rng);
    const int axis = face / 2;
    const double sign = face % 2 ? -1.0 : 1.0;
    Vec3 p(unit(rng) * extents.x(), unit(rng) * extents.y(), unit(rng) * extents.z());
    p[axis] = sign * h[axis];
    Vec3 n = Vec3::Zero();
    n[axis] = sign;
    out.push_back({p, n});
  }
  return out;
}

Pose gt_pose(const SynthSpec& spec, int frame) {
  const double t = frame / spec.rate_hz;
  const Pose base(exp_so3(Vec3(0.3, -0.4, 0.2)), Vec3(0.0, 0.0, 0.6));
  constexpr double two_pi = 2.0 * std::numbers::pi;
  switch (spec.motion) {
    case MotionProfile::kStatic:
      return base;
    case MotionProfile::kConstantVelocity: {
      const Vec3 v(0.006, -0.003, 0.002);
      const Vec3 w(0.05, 0.2, 0.03);
      return Pose(base.rotation() * exp_so3(w * t), base.translation() + v * t);
    }
    case MotionProfile::kSmooth: {
      const Vec3 offset(0.08 * std::sin(two_pi * t / 12.0), 0.05 * std::sin(two_pi * t / 9.0 + 0.5),
                        0.06 * std::sin(two_pi * t / 15.0));
      const Rotation spin = exp_so3(Vec3(0.05, 0.25, 0.03) * t);
      const Rotation wobble = exp_so3(Vec3(0.2, 0.0, 0.1) * std::sin(two_pi * t / 7.0));
      return Pose(base.rotation() * spin * wobble, base.translation() + offset);
    }
  }
  return base;
}

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-9);
  return v.normalized();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void SynthSpec::validate() const {
  const auto fail = [](const std::string& what) { throw Error(ErrorKind::kInvalidSpec, what); };
  if (frames < 2) fail("frames must be >= 2");
  if (!(rate_hz > 0.0)) fail("rate must be > 0");
  if (noise_trans_m < 0.0 || noise_rot_rad < 0.0 || track_noise_px < 0.0) {
    fail("noise levels must be >= 0");
  }
  if (width < 16 || height < 16 || !(focal > 0.0)) fail("invalid camera");
  if (!(extents.minCoeff() > 0.0)) fail("extents must be positive");
  if (query_points < 3 || model_points < 2) fail("need >= 3 query points and >= 2 model points");
  for (const auto& c : corruptions) {
    if (c.frame < 0 || c.frame >= frames) {
      fail("corruption at frame " + std::to_string(c.frame) + " outside [0, " +
           std::to_string(frames) + ")");
    }
    if (c.rot_deg < 0.0 || c.trans_mm < 0.0) fail("corruption magnitudes must be >= 0");
  }
}

std::vector<Vec3> sample_box_surface(const Vec3& extents, int count, std::uint64_t seed) {
  std::vector<Vec3> out;
  for (const auto& s : sample_surface(extents, count, seed)) out.push_back(s.point);
  return out;
}

std::vector<TimedPose> synth_ground_truth(const SynthSpec& spec) {
  spec.validate();
  std::vector<TimedPose> gt;
  gt.reserve(spec.frames);
  for (int f = 0; f < spec.frames; ++f) gt.push_back({f, gt_pose(spec, f)});
  return gt;
}

std::vector<TimedPose> synth_noisy_absolute(const SynthSpec& spec, std::span<const TimedPose> gt) {
  std::mt19937_64 rng(spec.seed ^ 0xA5A5A5A5ull);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<TimedPose> out;
  out.reserve(gt.size());
  for (const auto& g : gt) {
    const Vec3 dt(n(rng), n(rng), n(rng));
    const Vec3 dr(n(rng), n(rng), n(rng));
    Pose p(g.pose.rotation() * exp_so3(spec.noise_rot_rad * dr),
           g.pose.translation() + spec.noise_trans_m * dt);
    out.push_back({g.frame, p});
  }
  std::mt19937_64 crng(spec.seed ^ 0x5EEDC0FFEEull);
  for (const auto& c : spec.corruptions) {
    const Vec3 axis = random_unit(crng);
    const Vec3 dir = random_unit(crng);
    Pose& p = out[static_cast<size_t>(c.frame)].pose;
    p = Pose(p.rotation() * exp_so3(axis * (c.rot_deg * std::numbers::pi / 180.0)),
             p.translation() + dir * (c.trans_mm * 1e-3));
  }
  return out;
}

void render_box(const Pose& pose, const Vec3& extents, const CameraIntrinsics& k,
                DepthImage* depth, Mask* mask) {
  *depth = DepthImage(k.width, k.height);
  *mask = Mask(k.width, k.height);
  std::fill(depth->meters.begin(), depth->meters.end(), kWallDepth);

  const Mat3 rt = pose.rotation().matrix().transpose();
  const Vec3 origin = -(rt * pose.translation());
  const Vec3 h = 0.5 * extents;

  // Pixel window covering the projected box, when fully in front.
  int x0 = 0, y0 = 0, x1 = k.width - 1, y1 = k.height - 1;
  bool in_front = true;
  double umin = 1e30, umax = -1e30, vmin = 1e30, vmax = -1e30;
  for (int c = 0; c < 8; ++c) {
    const Vec3 local((c & 1) ? h.x() : -h.x(), (c & 2) ? h.y() : -h.y(), (c & 4) ? h.z() : -h.z());
    const Vec3 p = pose * local;
    if (p.z() <= 1e-3) {
      in_front = false;
      break;
    }
    const Eigen::Vector2d uv = k.project(p);
    umin = std::min(umin, uv.x());
    umax = std::max(umax, uv.x());
    vmin = std::min(vmin, uv.y());
    vmax = std::max(vmax, uv.y());
  }
  if (in_front) {
    x0 = std::max(0, static_cast<int>(std::floor(umin)) - 1);
    y0 = std::max(0, static_cast<int>(std::floor(vmin)) - 1);
    x1 = std::min(k.width - 1, static_cast<int>(std::ceil(umax)) + 1);
    y1 = std::min(k.height - 1, static_cast<int>(std::ceil(vmax)) + 1);
  }

  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      // Camera ray with unit z, so the ray parameter equals depth.
      const Vec3 ray((x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0);
      const Vec3 d = rt * ray;
      double tnear = -1e30, tfar = 1e30;
      bool hit = true;
      for (int a = 0; a < 3 && hit; ++a) {
        if (std::abs(d[a]) < 1e-15) {
          if (origin[a] < -h[a] || origin[a] > h[a]) hit = false;
          continue;
        }
        double t1 = (-h[a] - origin[a]) / d[a];
        double t2 = (h[a] - origin[a]) / d[a];
        if (t1 > t2) std::swap(t1, t2);
        tnear = std::max(tnear, t1);
        tfar = std::min(tfar, t2);
        if (tnear > tfar) hit = false;
      }
      if (hit && tnear > kMinDepth && tnear < depth->at(x, y)) {
        depth->at(x, y) = tnear;
        mask->at(x, y) = 255;
      }
    }
  }
}

fs::path synth_sequence(const SynthSpec& spec, const fs::path& out_dir) {
  spec.validate();
  fs::create_directories(out_dir / "depth");
  fs::create_directories(out_dir / "mask");

  CameraIntrinsics k;
  k.fx = k.fy = spec.focal;
  k.cx = (spec.width - 1) / 2.0;
  k.cy = (spec.height - 1) / 2.0;
  k.width = spec.width;
  k.height = spec.height;

  const auto gt = synth_ground_truth(spec);
  const auto raw = synth_noisy_absolute(spec, gt);
  write_poses(out_dir / "poses_gt.csv", gt);
  write_poses(out_dir / "poses_raw.csv", raw);
  write_model_ply(out_dir / "model.ply",
                  sample_box_surface(spec.extents, spec.model_points, spec.seed ^ 0x30DE1ull));

  const auto queries = sample_surface(spec.extents, spec.query_points, spec.seed ^ 0x7AC4ull);
  std::mt19937_64 track_rng(spec.seed ^ 0x71A2ull);
  std::normal_distribution<double> px_noise(0.0, 1.0);
  TrackTable tracks;
  tracks.tracks.resize(queries.size());

  for (const auto& g : gt) {
    DepthImage depth;
    Mask mask;
    render_box(g.pose, spec.extents, k, &depth, &mask);
    char name[32];
    std::snprintf(name, sizeof(name), "%06d.png", g.frame);
    write_depth_png(out_dir / "depth" / name, depth);
    write_mask_png(out_dir / "mask" / name, mask);

    for (size_t q = 0; q < queries.size(); ++q) {
      const Vec3 p = g.pose * queries[q].point;
      const Vec3 n = g.pose.rotation() * queries[q].normal;
      TrackObservation o;
      o.frame = g.frame;
      // Draw noise for every (query, frame) so the stream does not depend on visibility.
      const double nu = spec.track_noise_px * px_noise(track_rng);
      const double nv = spec.track_noise_px * px_noise(track_rng);
      const bool facing = p.z() > kMinDepth && n.dot(-p.normalized()) > 0.15;
      if (facing) {
        const Eigen::Vector2d uv = k.project(p);
        const double u = uv.x() + nu;
        const double v = uv.y() + nv;
        if (k.contains(u, v)) {
          o.u = u;
          o.v = v;
          o.visible = true;
        }
      }
      tracks.tracks[q].push_back(o);
    }
  }
  write_tracks(out_dir / "tracks.csv", tracks);

  OverrideFile corrupted;
  for (const auto& c : spec.corruptions) {
    corrupted.entries.push_back({OverrideEntry::Kind::kRange, c.frame, c.frame,
                                 ReliabilityTier::kDownweighted, std::nullopt});
  }
  write_overrides(out_dir / "corrupted.overrides", corrupted);

  {
    const double sigma_t = std::max(spec.noise_trans_m, 1e-6);
    std::ofstream cfg(out_dir / "pipeline.ini");
    cfg << "# noise settings matched to the generator\n[noise]\n"
        << "sigma_meas_trans=" << fmt(sigma_t) << "\n"
        << "sigma_meas_rot_deg=" << fmt(std::max(spec.noise_rot_rad * 180.0 / std::numbers::pi, 1e-6))
        << "\n"
        << "rate_hz=" << fmt(spec.rate_hz) << "\n"
        << "\n# absolute-edge information as the inverse translation variance\n[weights]\n"
        << "default=" << fmt(1.0 / (sigma_t * sigma_t)) << "\n";
  }

  SequenceManifest m;
  m.dir = out_dir;
  m.id = spec.id;
  m.frame_count = spec.frames;
  m.rate_hz = spec.rate_hz;
  m.intrinsics = k;
  m.extents = spec.extents;
  m.depth_pattern = "depth/%06d.png";
  m.mask_pattern = "mask/%06d.png";
  m.model_file = "model.ply";
  m.raw_poses_file = "poses_raw.csv";
  m.gt_poses_file = "poses_gt.csv";
  m.tracks_file = "tracks.csv";
  const fs::path manifest = out_dir / "manifest.ini";
  write_manifest(manifest, m);
  return manifest;
}

}  // namespace posefuse
