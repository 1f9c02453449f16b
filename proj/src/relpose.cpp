#include "posefuse/relpose.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "posefuse/error.hpp"

namespace posefuse {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "focal lengths must be positive");
  }
  if (width <= 0 || height <= 0 || cx < 0.0 || cy < 0.0 || cx > width || cy > height) {
    throw Error(ErrorKind::kInvalidArgument, "principal point must lie inside the image");
  }
}

const TrackObservation* TrackTable::find(size_t query, int frame) const {
  if (query >= tracks.size()) return nullptr;
  const auto& t = tracks[query];
  auto it = std::lower_bound(t.begin(), t.end(), frame,
                             [](const TrackObservation& o, int f) { return o.frame < f; });
  if (it == t.end() || it->frame != frame) return nullptr;
  return &*it;
}

namespace {

std::optional<Vec3> lift(const TrackObservation& obs, const DepthImage& depth, const Mask* mask,
                         const CameraIntrinsics& k) {
  if (!obs.visible) return std::nullopt;
  const int x = static_cast<int>(std::lround(obs.u));
  const int y = static_cast<int>(std::lround(obs.v));
  if (x < 0 || y < 0 || x >= depth.width || y >= depth.height) return std::nullopt;
  if (mask && (x >= mask->width || y >= mask->height || !mask->at(x, y))) return std::nullopt;
  const double d = depth.at(x, y);
  if (!(d > kMinDepth && d < kMaxDepth)) return std::nullopt;
  return k.backproject(obs.u, obs.v, d);
}

size_t count_inliers(const Pose& m, const CorrespondenceSet& corr, double threshold,
                     std::vector<int>* inliers, double* residual_sum) {
  size_t count = 0;
  double sum = 0.0;
  if (inliers) inliers->clear();
  for (size_t i = 0; i < corr.size(); ++i) {
    const double r = (m * corr.points_i[i] - corr.points_j[i]).norm();
    if (r < threshold) {
      ++count;
      sum += r;
      if (inliers) inliers->push_back(static_cast<int>(i));
    }
  }
  if (residual_sum) *residual_sum = sum;
  return count;
}

Pose fit_subset(const CorrespondenceSet& corr, std::span<const int> idx) {
  std::vector<Vec3> a, b;
  std::vector<double> w;
  a.reserve(idx.size());
  b.reserve(idx.size());
  w.reserve(idx.size());
  for (int i : idx) {
    a.push_back(corr.points_i[i]);
    b.push_back(corr.points_j[i]);
    w.push_back(corr.weights.empty() ? 1.0 : corr.weights[i]);
  }
  return fit_rigid(a, b, w);
}

bool collinear(const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const double scale = std::max(ab.squaredNorm(), ac.squaredNorm());
  return scale <= 0.0 || ab.cross(ac).squaredNorm() <= 1e-12 * scale * scale;
}

}  // namespace

CorrespondenceSet backproject(const TrackTable& tracks, const DepthImage& depth_i,
                              const DepthImage& depth_j, const Mask* mask_i, const Mask* mask_j,
                              const CameraIntrinsics& k, int frame_i, int frame_j) {
  k.validate();
  CorrespondenceSet out;
  out.frame_i = frame_i;
  out.frame_j = frame_j;
  for (size_t q = 0; q < tracks.tracks.size(); ++q) {
    const TrackObservation* oi = tracks.find(q, frame_i);
    const TrackObservation* oj = tracks.find(q, frame_j);
    if (!oi || !oj) continue;
    const auto pi = lift(*oi, depth_i, mask_i, k);
    if (!pi) continue;
    const auto pj = lift(*oj, depth_j, mask_j, k);
    if (!pj) continue;
    out.points_i.push_back(*pi);
    out.points_j.push_back(*pj);
    out.weights.push_back(1.0);
  }
  if (out.size() < 3) {
    std::ostringstream os;
    os << "frames " << frame_i << "-" << frame_j << ": only " << out.size()
       << " valid correspondences";
    throw Error(ErrorKind::kInsufficientCorrespondences, os.str());
  }
  return out;
}

Pose fit_rigid(std::span<const Vec3> src, std::span<const Vec3> dst,
               std::span<const double> weights) {
  if (src.size() != dst.size() || src.size() < 3) {
    throw Error(ErrorKind::kInvalidArgument, "fit_rigid needs >= 3 paired points");
  }
  const bool weighted = !weights.empty();
  double wsum = 0.0;
  Vec3 cs = Vec3::Zero(), cd = Vec3::Zero();
  for (size_t i = 0; i < src.size(); ++i) {
    const double w = weighted ? weights[i] : 1.0;
    cs += w * src[i];
    cd += w * dst[i];
    wsum += w;
  }
  cs /= wsum;
  cd /= wsum;

  Mat3 cross_cov = Mat3::Zero();
  for (size_t i = 0; i < src.size(); ++i) {
    const double w = weighted ? weights[i] : 1.0;
    cross_cov += w * (dst[i] - cd) * (src[i] - cs).transpose();
  }
  Eigen::JacobiSVD<Mat3> svd(cross_cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  const Mat3 r = svd.matrixU() * d * svd.matrixV().transpose();
  const Rotation rot(r);
  return Pose(rot, cd - rot * cs);
}

RelativePoseEstimate register_correspondences(const CorrespondenceSet& corr,
                                              const RansacConfig& ransac) {
  const int n = static_cast<int>(corr.size());
  if (n < 3 || corr.points_j.size() != corr.points_i.size()) {
    throw Error(ErrorKind::kInsufficientCorrespondences, "registration needs >= 3 pairs");
  }

  std::mt19937_64 rng(ransac.seed);
  std::uniform_int_distribution<int> pick(0, n - 1);

  size_t best_count = 0;
  double best_residual = 0.0;
  Pose best;
  // Degenerate samples are redrawn, bounded so an all-collinear set ends.
  const int max_draws = std::max(ransac.iters, 1) * 20;
  int draws = 0;
  for (int it = 0; it < ransac.iters && draws < max_draws; ++draws) {
    const int a = pick(rng);
    const int b = pick(rng);
    const int c = pick(rng);
    if (a == b || a == c || b == c) continue;
    if (collinear(corr.points_i[a], corr.points_i[b], corr.points_i[c]) ||
        collinear(corr.points_j[a], corr.points_j[b], corr.points_j[c])) {
      continue;
    }
    ++it;
    const int sample[3] = {a, b, c};
    const Pose model = fit_subset(corr, sample);
    double residual = 0.0;
    const size_t count = count_inliers(model, corr, ransac.inlier_threshold_m, nullptr, &residual);
    if (count > best_count || (count == best_count && count > 0 && residual < best_residual)) {
      best_count = count;
      best_residual = residual;
      best = model;
    }
  }
  if (best_count < 3) {
    std::ostringstream os;
    os << "frames " << corr.frame_i << "-" << corr.frame_j << ": no model with >= 3 inliers";
    throw Error(ErrorKind::kRegistrationFailure, os.str());
  }

  RelativePoseEstimate est;
  est.frame_i = corr.frame_i;
  est.frame_j = corr.frame_j;
  std::vector<int> inliers;
  count_inliers(best, corr, ransac.inlier_threshold_m, &inliers, nullptr);
  Pose refit = fit_subset(corr, inliers);
  // One more round: the refit model can admit or reject borderline pairs.
  std::vector<int> refined;
  if (count_inliers(refit, corr, ransac.inlier_threshold_m, &refined, nullptr) >= 3 &&
      refined != inliers) {
    inliers = std::move(refined);
    refit = fit_subset(corr, inliers);
  }
  est.pose = refit;
  est.inliers = std::move(inliers);
  return est;
}

Mat6 information_matrix(const RelativePoseEstimate& est, const CorrespondenceSet& corr,
                        double sigma_point_m) {
  if (est.inliers.size() < 3) {
    throw Error(ErrorKind::kInvalidArgument, "information matrix needs >= 3 inliers");
  }
  if (!(sigma_point_m > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "sigma_point must be positive");
  }
  Mat6 jtj = Mat6::Zero();
  for (int idx : est.inliers) {
    Eigen::Matrix<double, 3, 6> j;
    j.leftCols<3>().setIdentity();
    j.rightCols<3>() = -skew(est.pose * corr.points_i[idx]);
    jtj += j.transpose() * j;
  }
  Mat6 info = jtj / (sigma_point_m * sigma_point_m);
  info = 0.5 * (info + info.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Mat6> eig(info);
  const Vec6 floored = eig.eigenvalues().cwiseMax(0.0);
  if (floored != eig.eigenvalues()) {
    info = eig.eigenvectors() * floored.asDiagonal() * eig.eigenvectors().transpose();
    info = 0.5 * (info + info.transpose()).eval();
  }
  return info;
}

std::vector<std::pair<int, int>> make_pairs(std::span<const int> frames,
                                            std::span<const int> strides) {
  std::vector<std::pair<int, int>> out;
  for (size_t a = 0; a < frames.size(); ++a) {
    for (int s : strides) {
      if (s < 1) continue;
      const size_t b = a + static_cast<size_t>(s);
      if (b < frames.size()) out.emplace_back(frames[a], frames[b]);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::optional<RelativePoseEstimate>> register_all(
    std::span<const CorrespondenceSet> sets, const RelposeConfig& cfg, Exec exec) {
  std::vector<std::optional<RelativePoseEstimate>> out(sets.size());
  for_each_index(exec, static_cast<std::ptrdiff_t>(sets.size()), [&](std::ptrdiff_t i) {
    RansacConfig r = cfg.ransac;
    // splitmix-style stream separation per pair
    r.seed = cfg.ransac.seed + 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(i + 1);
    try {
      RelativePoseEstimate est = register_correspondences(sets[i], r);
      est.information = information_matrix(est, sets[i], cfg.sigma_point_m);
      out[i] = std::move(est);
    } catch (const Error&) {
      out[i] = std::nullopt;
    }
  });
  return out;
}

std::vector<TimedPose> chain_relative(const Pose& anchor, int anchor_frame,
                                      std::span<const RelativePoseEstimate> estimates) {
  std::map<int, const RelativePoseEstimate*> consecutive;
  int last = anchor_frame;
  for (const auto& e : estimates) {
    if (e.frame_j == e.frame_i + 1) consecutive[e.frame_i] = &e;
    last = std::max(last, e.frame_j);
  }
  std::vector<int> missing;
  for (int f = anchor_frame; f < last; ++f) {
    if (!consecutive.count(f)) missing.push_back(f);
  }
  if (!missing.empty()) {
    std::ostringstream os;
    os << "no relative pose for frame pairs starting at";
    for (int f : missing) os << ' ' << f;
    throw Error(ErrorKind::kGap, os.str());
  }
  std::vector<TimedPose> out;
  out.reserve(static_cast<size_t>(last - anchor_frame + 1));
  out.push_back({anchor_frame, anchor});
  for (int f = anchor_frame; f < last; ++f) {
    out.push_back({f + 1, consecutive.at(f)->pose * out.back().pose});
  }
  return out;
}

}  // namespace posefuse
