#include "posefuse/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "posefuse/error.hpp"
#include "posefuse/relpose.hpp"

namespace posefuse {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

double percent(size_t count, size_t total) {
  return total == 0 ? 0.0 : 100.0 * static_cast<double>(count) / static_cast<double>(total);
}

}  // namespace

Stats Stats::of(std::vector<double> values) {
  Stats s;
  s.values = std::move(values);
  if (s.values.empty()) return s;
  std::vector<double> sorted = s.values;
  std::sort(sorted.begin(), sorted.end());
  const size_t n = sorted.size();
  double sum = 0.0;
  for (double v : s.values) sum += v;
  s.mean = sum / static_cast<double>(n);
  s.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  s.max = sorted.back();
  return s;
}

void TrajectoryPair::validate() const {
  if (estimate.size() != reference.size()) {
    throw Error(ErrorKind::kInvalidInput, "trajectory lengths differ (" +
                                              std::to_string(estimate.size()) + " vs " +
                                              std::to_string(reference.size()) + ")");
  }
  if (estimate.size() < 2) {
    throw Error(ErrorKind::kInvalidInput, "trajectories need at least 2 frames");
  }
  for (size_t i = 0; i < estimate.size(); ++i) {
    if (estimate[i].frame != reference[i].frame) {
      throw Error(ErrorKind::kInvalidInput,
                  "frame index mismatch at position " + std::to_string(i));
    }
  }
}

TrajectoryPair TrajectoryPair::matched(std::span<const TimedPose> estimate,
                                       std::span<const TimedPose> reference) {
  TrajectoryPair p;
  size_t i = 0, j = 0;
  while (i < estimate.size() && j < reference.size()) {
    if (estimate[i].frame < reference[j].frame) {
      ++i;
    } else if (reference[j].frame < estimate[i].frame) {
      ++j;
    } else {
      p.estimate.push_back(estimate[i++]);
      p.reference.push_back(reference[j++]);
    }
  }
  return p;
}

Stats ate(const TrajectoryPair& pair, bool align) {
  pair.validate();
  const size_t n = pair.estimate.size();
  Pose alignment;
  if (align) {
    std::vector<Vec3> src, dst;
    for (size_t i = 0; i < n; ++i) {
      src.push_back(pair.estimate[i].pose.translation());
      dst.push_back(pair.reference[i].pose.translation());
    }
    alignment = fit_rigid(src, dst);
  }
  std::vector<double> err(n);
  for (size_t i = 0; i < n; ++i) {
    const Vec3 p = alignment * pair.estimate[i].pose.translation();
    err[i] = 1e3 * (p - pair.reference[i].pose.translation()).norm();
  }
  return Stats::of(std::move(err));
}

RpeResult rpe(const TrajectoryPair& pair, int delta) {
  pair.validate();
  const size_t n = pair.estimate.size();
  if (delta < 1 || static_cast<size_t>(delta) >= n) {
    throw Error(ErrorKind::kInvalidInput, "rpe delta must be in [1, length)");
  }
  std::vector<double> rot, trans;
  for (size_t i = 0; i + delta < n; ++i) {
    const Pose& r0 = pair.reference[i].pose;
    const Pose& r1 = pair.reference[i + delta].pose;
    const Pose& e0 = pair.estimate[i].pose;
    const Pose& e1 = pair.estimate[i + delta].pose;
    const Pose err = (r0.inverse() * r1).inverse() * (e0.inverse() * e1);
    rot.push_back(kRadToDeg * rotation_angle_between(Rotation(), err.rotation()));
    trans.push_back(1e3 * err.translation().norm());
  }
  return {Stats::of(std::move(rot)), Stats::of(std::move(trans))};
}

NearestNeighbor::NearestNeighbor(std::span<const Vec3> points, size_t brute_force_limit)
    : points_(points.begin(), points.end()) {
  if (points_.empty()) throw Error(ErrorKind::kInvalidInput, "empty point set");
  use_grid_ = points_.size() > brute_force_limit;
  if (!use_grid_) return;

  Vec3 lo = points_[0], hi = points_[0];
  for (const auto& p : points_) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Vec3 span = (hi - lo).cwiseMax(1e-9);
  // Roughly two points per cell for a surface-like cloud.
  const double volume = span.prod();
  cell_ = std::cbrt(2.0 * volume / static_cast<double>(points_.size()));
  cell_ = std::max(cell_, span.maxCoeff() / 256.0);
  origin_ = lo;
  for (int a = 0; a < 3; ++a) dims_[a] = static_cast<int>(std::floor(span[a] / cell_)) + 1;

  const size_t ncell = static_cast<size_t>(dims_.x()) * dims_.y() * dims_.z();
  std::vector<int> cell_of(points_.size());
  cell_start_.assign(ncell + 1, 0);
  for (size_t i = 0; i < points_.size(); ++i) {
    Eigen::Vector3i c = ((points_[i] - origin_) / cell_).array().floor().cast<int>();
    c = c.cwiseMax(0).cwiseMin(dims_ - Eigen::Vector3i::Ones());
    cell_of[i] = (c.z() * dims_.y() + c.y()) * dims_.x() + c.x();
    ++cell_start_[cell_of[i] + 1];
  }
  for (size_t c = 0; c < ncell; ++c) cell_start_[c + 1] += cell_start_[c];
  cell_points_.resize(points_.size());
  std::vector<int> fill(cell_start_.begin(), cell_start_.end() - 1);
  for (size_t i = 0; i < points_.size(); ++i) cell_points_[fill[cell_of[i]]++] = static_cast<int>(i);
}

double NearestNeighbor::distance(const Vec3& q) const {
  double best = std::numeric_limits<double>::infinity();
  if (!use_grid_) {
    for (const auto& p : points_) best = std::min(best, (p - q).squaredNorm());
    return std::sqrt(best);
  }
  const Eigen::Vector3i c = ((q - origin_) / cell_).array().floor().cast<int>();
  const Eigen::Vector3i top = dims_ - Eigen::Vector3i::Ones();
  // Past this ring every grid cell has been visited.
  const int max_ring = c.cwiseMax(top - c).maxCoeff();
  // First ring that touches the grid when q lies outside it.
  const int first_ring = (-c).cwiseMax(c - top).cwiseMax(0).maxCoeff();
  for (int r = first_ring; r <= max_ring; ++r) {
    const Eigen::Vector3i lo = (c.array() - r).max(0).matrix();
    const Eigen::Vector3i up = (c.array() + r).min(top.array()).matrix();
    if ((lo.array() <= up.array()).all()) {
      for (int z = lo.z(); z <= up.z(); ++z) {
        for (int y = lo.y(); y <= up.y(); ++y) {
          for (int x = lo.x(); x <= up.x(); ++x) {
            const int ring =
                std::max({std::abs(x - c.x()), std::abs(y - c.y()), std::abs(z - c.z())});
            if (ring != r) continue;
            const int cell = (z * dims_.y() + y) * dims_.x() + x;
            for (int k = cell_start_[cell]; k < cell_start_[cell + 1]; ++k) {
              best = std::min(best, (points_[cell_points_[k]] - q).squaredNorm());
            }
          }
        }
      }
    }
    // Cells beyond ring r are at least r cell widths away from q.
    if (std::isfinite(best) && std::sqrt(best) <= r * cell_) break;
  }
  return std::sqrt(best);
}

double recall_auc(std::span<const double> distances_m, double max_threshold_m) {
  if (distances_m.empty()) return 0.0;
  // Each distance d contributes the span (d, max] on which it is recalled.
  double area = 0.0;
  for (double d : distances_m) area += std::max(0.0, 1.0 - std::max(d, 0.0) / max_threshold_m);
  return 100.0 * area / static_cast<double>(distances_m.size());
}

AddResult add_metrics(const TrajectoryPair& pair, const ModelPoints& model, Exec exec) {
  pair.validate();
  if (model.points.empty()) throw Error(ErrorKind::kInvalidInput, "empty model point set");
  const size_t n = pair.estimate.size();
  AddResult res;
  res.add_m.resize(n);
  res.adds_m.resize(n);
  const NearestNeighbor nn(model.points);
  for_each_index(exec, static_cast<std::ptrdiff_t>(n), [&](std::ptrdiff_t i) {
    const Pose& est = pair.estimate[i].pose;
    const Pose& ref = pair.reference[i].pose;
    // ADD-S in the reference object frame: distances are invariant under T_ref.
    const Pose ref_from_est = ref.inverse() * est;
    double add = 0.0, adds = 0.0;
    for (const auto& x : model.points) {
      add += (est * x - ref * x).norm();
      adds += nn.distance(ref_from_est * x);
    }
    res.add_m[i] = add / static_cast<double>(model.points.size());
    res.adds_m[i] = adds / static_cast<double>(model.points.size());
  });
  res.add_auc = recall_auc(res.add_m);
  res.adds_auc = recall_auc(res.adds_m);
  const double limit = 0.1 * model.diameter;
  size_t add_ok = 0, adds_ok = 0;
  for (size_t i = 0; i < n; ++i) {
    add_ok += res.add_m[i] < limit;
    adds_ok += res.adds_m[i] < limit;
  }
  res.add_01d = percent(add_ok, n);
  res.adds_01d = percent(adds_ok, n);
  return res;
}

namespace {

using Polygon = std::vector<Vec3>;

struct Plane {
  Vec3 normal;  // outward
  double offset;
  double signed_distance(const Vec3& p) const { return normal.dot(p) - offset; }
};

std::array<Vec3, 8> box_corners(const Pose& pose, const Vec3& extents) {
  std::array<Vec3, 8> c;
  const Vec3 h = 0.5 * extents;
  for (int k = 0; k < 8; ++k) {
    const Vec3 local((k & 1) ? h.x() : -h.x(), (k & 2) ? h.y() : -h.y(), (k & 4) ? h.z() : -h.z());
    c[k] = pose * local;
  }
  return c;
}

std::vector<Polygon> box_faces(const Pose& pose, const Vec3& extents) {
  const auto c = box_corners(pose, extents);
  // Corner index bits: x = 1, y = 2, z = 4. Each face lists a cycle.
  static constexpr int kFaces[6][4] = {{0, 2, 6, 4}, {1, 5, 7, 3}, {0, 4, 5, 1},
                                       {2, 3, 7, 6}, {0, 1, 3, 2}, {4, 6, 7, 5}};
  std::vector<Polygon> faces;
  for (const auto& f : kFaces) faces.push_back({c[f[0]], c[f[1]], c[f[2]], c[f[3]]});
  return faces;
}

std::array<Plane, 6> box_planes(const Pose& pose, const Vec3& extents) {
  const Mat3 r = pose.rotation().matrix();
  const Vec3& t = pose.translation();
  std::array<Plane, 6> planes;
  for (int a = 0; a < 3; ++a) {
    const Vec3 n = r.col(a);
    const double h = 0.5 * extents[a];
    planes[2 * a] = {n, n.dot(t) + h};
    planes[2 * a + 1] = {-n, -n.dot(t) + h};
  }
  return planes;
}

// Orders coplanar points counter-clockwise around their centroid.
Polygon order_on_plane(Polygon pts, const Vec3& normal) {
  if (pts.size() < 3) return pts;
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());
  const Vec3 u = normal.unitOrthogonal();
  const Vec3 v = normal.cross(u);
  std::sort(pts.begin(), pts.end(), [&](const Vec3& a, const Vec3& b) {
    return std::atan2((a - centroid).dot(v), (a - centroid).dot(u)) <
           std::atan2((b - centroid).dot(v), (b - centroid).dot(u));
  });
  Polygon unique;
  for (const auto& p : pts) {
    if (unique.empty() || (p - unique.back()).norm() > 1e-12) unique.push_back(p);
  }
  if (unique.size() > 1 && (unique.front() - unique.back()).norm() <= 1e-12) unique.pop_back();
  return unique;
}

constexpr double kPlaneEps = 1e-12;

// Signed distance with vertices within kPlaneEps snapped onto the plane, so
// faces coplanar with a clipping plane are neither split nor duplicated.
double snapped_distance(const Plane& plane, const Vec3& p) {
  const double d = plane.signed_distance(p);
  return std::abs(d) <= kPlaneEps ? 0.0 : d;
}

// Sutherland-Hodgman clip of every face against one half-space, closing the
// cut with a cap polygon.
std::vector<Polygon> clip(const std::vector<Polygon>& faces, const Plane& plane) {
  double lo = 0.0, hi = 0.0;
  for (const auto& face : faces) {
    for (const auto& p : face) {
      const double d = snapped_distance(plane, p);
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
  }
  if (hi <= 0.0) return faces;  // nothing outside: no cut, no cap
  if (lo >= 0.0) return {};     // nothing strictly inside

  std::vector<Polygon> out;
  Polygon cap;
  for (const auto& face : faces) {
    Polygon kept;
    for (size_t k = 0; k < face.size(); ++k) {
      const Vec3& a = face[k];
      const Vec3& b = face[(k + 1) % face.size()];
      const double da = snapped_distance(plane, a);
      const double db = snapped_distance(plane, b);
      if (da <= 0.0) kept.push_back(a);
      if ((da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0)) {
        const Vec3 x = a + (da / (da - db)) * (b - a);
        kept.push_back(x);
        cap.push_back(x);
      } else if (da == 0.0) {
        cap.push_back(a);
      }
    }
    if (kept.size() >= 3) out.push_back(std::move(kept));
  }
  Polygon ordered = order_on_plane(std::move(cap), plane.normal);
  if (ordered.size() >= 3) out.push_back(std::move(ordered));
  return out;
}

double polyhedron_volume(const std::vector<Polygon>& faces) {
  size_t count = 0;
  Vec3 interior = Vec3::Zero();
  for (const auto& f : faces) {
    for (const auto& p : f) interior += p;
    count += f.size();
  }
  if (count == 0) return 0.0;
  interior /= static_cast<double>(count);
  double volume = 0.0;
  for (const auto& f : faces) {
    Vec3 area2 = Vec3::Zero();
    for (size_t k = 1; k + 1 < f.size(); ++k) area2 += (f[k] - f[0]).cross(f[k + 1] - f[0]);
    const double a2 = area2.norm();
    if (a2 <= 0.0) continue;
    const double height = std::abs((f[0] - interior).dot(area2 / a2));
    volume += a2 * 0.5 * height / 3.0;
  }
  return volume;
}

void check_extents(const Vec3& e) {
  if (!(e.minCoeff() > 0.0) || !e.allFinite()) {
    throw Error(ErrorKind::kInvalidInput, "box extents must be positive");
  }
}

}  // namespace

double box_intersection_volume(const Pose& a, const Vec3& extents_a, const Pose& b,
                               const Vec3& extents_b) {
  check_extents(extents_a);
  check_extents(extents_b);
  std::vector<Polygon> poly = box_faces(a, extents_a);
  for (const Plane& p : box_planes(b, extents_b)) {
    poly = clip(poly, p);
    if (poly.size() < 4) return 0.0;
  }
  return polyhedron_volume(poly);
}

double box_iou(const Pose& a, const Vec3& extents_a, const Pose& b, const Vec3& extents_b) {
  const double inter = box_intersection_volume(a, extents_a, b, extents_b);
  const double uni = extents_a.prod() + extents_b.prod() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

IouResult iou3d(const TrajectoryPair& pair, std::span<const Vec3> extents, Exec exec) {
  pair.validate();
  const size_t n = pair.estimate.size();
  if (extents.size() != 1 && extents.size() != n) {
    throw Error(ErrorKind::kInvalidInput, "need one box extent or one per frame");
  }
  for (const auto& e : extents) check_extents(e);
  IouResult res;
  res.iou.resize(n);
  for_each_index(exec, static_cast<std::ptrdiff_t>(n), [&](std::ptrdiff_t i) {
    const Vec3& e = extents.size() == 1 ? extents[0] : extents[i];
    res.iou[i] = box_iou(pair.estimate[i].pose, e, pair.reference[i].pose, e);
  });
  size_t c25 = 0, c50 = 0, c75 = 0;
  for (double v : res.iou) {
    c25 += v > 0.25;
    c50 += v > 0.50;
    c75 += v > 0.75;
  }
  res.recall25 = percent(c25, n);
  res.recall50 = percent(c50, n);
  res.recall75 = percent(c75, n);
  return res;
}

std::vector<double> pose_recalls(const TrajectoryPair& pair,
                                 std::span<const PoseThreshold> thresholds) {
  pair.validate();
  const size_t n = pair.estimate.size();
  std::vector<double> rot(n), trans(n);
  for (size_t i = 0; i < n; ++i) {
    rot[i] = kRadToDeg * rotation_angle_between(pair.estimate[i].pose.rotation(),
                                                pair.reference[i].pose.rotation());
    trans[i] = 100.0 * translation_distance(pair.estimate[i].pose, pair.reference[i].pose);
  }
  std::vector<double> out;
  for (const auto& th : thresholds) {
    size_t ok = 0;
    for (size_t i = 0; i < n; ++i) ok += rot[i] < th.deg && trans[i] < th.cm;
    out.push_back(percent(ok, n));
  }
  return out;
}

EvaluationReport evaluate(const TrajectoryPair& pair, const ModelPoints* model,
                          std::span<const Vec3> extents, const EvaluationOptions& opts) {
  EvaluationReport rep;
  rep.ate_mm = ate(pair, opts.align);
  const RpeResult r = rpe(pair, opts.rpe_delta);
  rep.rpe_rot_deg = r.rot_deg;
  rep.rpe_trans_mm = r.trans_mm;
  if (model) rep.add = add_metrics(pair, *model, opts.exec);
  if (!extents.empty()) rep.iou = iou3d(pair, extents, opts.exec);
  rep.thresholds = opts.thresholds;
  rep.pose_recalls = pose_recalls(pair, opts.thresholds);
  return rep;
}

}  // namespace posefuse
