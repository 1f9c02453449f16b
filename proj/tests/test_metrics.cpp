#include <gtest/gtest.h>

#include <numbers>

#include "oracles.hpp"
#include "posefuse/error.hpp"
#include "posefuse/metrics.hpp"

using namespace posefuse;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::vector<TimedPose> random_trajectory(std::mt19937_64& rng, int n, int first = 0, int step = 1) {
  std::vector<TimedPose> out;
  for (int k = 0; k < n; ++k) out.push_back({first + k * step, oracle::random_pose(rng)});
  return out;
}

std::vector<TimedPose> perturbed(const std::vector<TimedPose>& ref, std::mt19937_64& rng,
                                 double rot, double trans) {
  std::vector<TimedPose> out = ref;
  for (auto& p : out) {
    p.pose = Pose(p.pose.rotation() * exp_so3(oracle::random_axis_angle(rng, rot)),
                  p.pose.translation() + oracle::random_vec(rng, trans));
  }
  return out;
}

std::vector<Vec3> sphere_points(std::mt19937_64& rng, int n, double radius) {
  std::normal_distribution<double> g;
  std::vector<Vec3> pts;
  for (int i = 0; i < n; ++i) pts.push_back(radius * Vec3(g(rng), g(rng), g(rng)).normalized());
  return pts;
}

}  // namespace

TEST(Metrics, IdenticalTrajectoriesArePerfect) {
  std::mt19937_64 rng(51);
  const auto ref = random_trajectory(rng, 30);
  const TrajectoryPair pair{ref, ref};
  const Stats a = ate(pair);
  EXPECT_EQ(a.mean, 0.0);
  EXPECT_EQ(a.median, 0.0);
  EXPECT_EQ(a.max, 0.0);
  const RpeResult r = rpe(pair);
  EXPECT_EQ(r.trans_mm.max, 0.0);
  EXPECT_LT(r.rot_deg.max, 1e-6);

  ModelPoints model{sphere_points(rng, 100, 0.05), 0.1};
  const AddResult add = add_metrics(pair, model);
  EXPECT_EQ(add.add_auc, 100.0);
  EXPECT_EQ(add.adds_auc, 100.0);
  EXPECT_EQ(add.add_01d, 100.0);
  EXPECT_EQ(add.adds_01d, 100.0);

  const std::vector<Vec3> ext{Vec3(0.1, 0.2, 0.3)};
  const IouResult iou = iou3d(pair, ext);
  for (double v : iou.iou) EXPECT_NEAR(v, 1.0, 1e-12);
  EXPECT_EQ(iou.recall75, 100.0);
  const std::vector<PoseThreshold> th{{0.001, 0.001}, {5, 2}};
  for (double v : pose_recalls(pair, th)) EXPECT_EQ(v, 100.0);
}

TEST(Metrics, ConstantOffsetAte) {
  std::mt19937_64 rng(52);
  const auto ref = random_trajectory(rng, 11);
  auto est = ref;
  for (auto& p : est) p.pose = Pose(p.pose.rotation(), p.pose.translation() + Vec3(0.005, 0, 0));
  const Stats a = ate({est, ref});
  EXPECT_NEAR(a.mean, 5.0, 1e-9);
  EXPECT_NEAR(a.median, 5.0, 1e-9);
  EXPECT_NEAR(a.max, 5.0, 1e-9);
}

TEST(Metrics, ConstantLeftOffsetCancelsInRpe) {
  std::mt19937_64 rng(53);
  const auto ref = random_trajectory(rng, 20);
  const Pose offset = oracle::random_pose(rng);
  auto est = ref;
  for (auto& p : est) p.pose = offset * p.pose;
  const RpeResult r = rpe({est, ref}, 3);
  EXPECT_LT(r.rot_deg.max, 1e-6);
  EXPECT_LT(r.trans_mm.max, 1e-9);
}

TEST(Metrics, OneDegreeStepRpe) {
  const std::vector<TimedPose> ref{{0, Pose()}, {1, Pose()}, {2, Pose()}};
  auto est = ref;
  est[1].pose = Pose(exp_so3(Vec3(0, 0, kDeg)), Vec3::Zero());
  est[2].pose = est[1].pose;
  const RpeResult r = rpe({est, ref});
  ASSERT_EQ(r.rot_deg.values.size(), 2u);
  EXPECT_NEAR(r.rot_deg.values[0], 1.0, 1e-9);
  EXPECT_NEAR(r.rot_deg.values[1], 0.0, 1e-9);
  EXPECT_NEAR(r.rot_deg.mean, 0.5, 1e-9);
}

TEST(Metrics, RpeRejectsBadDelta) {
  std::mt19937_64 rng(54);
  const auto ref = random_trajectory(rng, 5);
  EXPECT_THROW(rpe({ref, ref}, 0), Error);
  EXPECT_THROW(rpe({ref, ref}, 5), Error);
}

TEST(Metrics, PairValidation) {
  std::mt19937_64 rng(55);
  const auto a = random_trajectory(rng, 5);
  const auto b = random_trajectory(rng, 4);
  EXPECT_THROW(ate({a, b}), Error);
  const auto shifted = random_trajectory(rng, 5, 1);
  EXPECT_THROW(ate({a, shifted}), Error);
  const auto m = TrajectoryPair::matched(a, shifted);
  EXPECT_EQ(m.estimate.size(), 4u);
  EXPECT_EQ(m.estimate.front().frame, 1);
}

TEST(Metrics, FiftyMillimeterAddGivesHalfAuc) {
  const std::vector<TimedPose> ref{{0, Pose()}, {1, Pose()}};
  auto est = ref;
  for (auto& p : est) p.pose = Pose(Rotation(), Vec3(0.05, 0, 0));
  const ModelPoints model{{Vec3::Zero()}, 0.1};
  const AddResult r = add_metrics({est, ref}, model);
  for (double d : r.add_m) EXPECT_NEAR(d, 0.05, 1e-15);
  EXPECT_NEAR(r.add_auc, 50.0, 1e-9);
}

TEST(Metrics, RecallAucMatchesFineTrapezoid) {
  std::mt19937_64 rng(56);
  std::uniform_real_distribution<double> u(0.0, 0.15);
  std::vector<double> d(37);
  for (double& x : d) x = u(rng);
  // Trapezoid on a very fine grid converges to the exact step integral.
  const int steps = 200000;
  double area = 0.0;
  auto recall = [&](double t) {
    return static_cast<double>(std::count_if(d.begin(), d.end(), [&](double x) { return x < t; })) /
           d.size();
  };
  double prev = recall(0.0);
  for (int i = 1; i <= steps; ++i) {
    const double cur = recall(0.1 * i / steps);
    area += 0.5 * (prev + cur) / steps;
    prev = cur;
  }
  EXPECT_NEAR(recall_auc(d), 100.0 * area, 1e-3);
}

TEST(Metrics, SphereUnderRotationHasZeroAddS) {
  std::mt19937_64 rng(57);
  const auto pts = sphere_points(rng, 3000, 0.05);
  // Pure rotations map the point set onto the sphere; the nearest neighbor
  // is then limited only by sampling density.
  std::vector<TimedPose> ref, est;
  for (int k = 0; k < 5; ++k) {
    ref.push_back({k, Pose(Rotation(), Vec3(0, 0, 0.5))});
    est.push_back({k, Pose(exp_so3(oracle::random_axis_angle(rng, 3.0)), Vec3(0, 0, 0.5))});
  }
  ModelPoints model{pts, 0.1};
  const AddResult r = add_metrics({est, ref}, model);
  for (size_t k = 0; k < r.add_m.size(); ++k) {
    EXPECT_GT(r.add_m[k], 0.01);
    // Oracle: brute-force nearest neighbor of each estimated point.
    std::vector<Vec3> ref_pts;
    for (const auto& p : pts) ref_pts.push_back(ref[k].pose * p);
    double sum = 0.0;
    for (const auto& p : pts) sum += oracle::brute_nn(ref_pts, est[k].pose * p);
    EXPECT_NEAR(r.adds_m[k], sum / pts.size(), 1e-12);
    EXPECT_LT(r.adds_m[k], 0.004);
  }
}

TEST(Metrics, AddSNeverExceedsAdd) {
  std::mt19937_64 rng(58);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Vec3> pts;
    for (int i = 0; i < 500; ++i) pts.push_back(oracle::random_vec(rng, 0.1));
    const auto ref = random_trajectory(rng, 8);
    const auto est = perturbed(ref, rng, 0.5, 0.05);
    const AddResult r = add_metrics({est, ref}, ModelPoints{pts, 0.3});
    for (size_t k = 0; k < r.add_m.size(); ++k) EXPECT_LE(r.adds_m[k], r.add_m[k] + 1e-15);
  }
}

TEST(Metrics, GridNearestNeighborMatchesBruteForce) {
  std::mt19937_64 rng(59);
  std::vector<Vec3> pts;
  for (int i = 0; i < 5000; ++i) pts.push_back(oracle::random_vec(rng, 0.1));
  const NearestNeighbor nn(pts);
  ASSERT_TRUE(nn.uses_grid());
  for (int q = 0; q < 300; ++q) {
    const Vec3 x = oracle::random_vec(rng, 0.3);
    EXPECT_EQ(nn.distance(x), oracle::brute_nn(pts, x));
  }
}

TEST(Metrics, AddRejectsEmptyModel) {
  std::mt19937_64 rng(60);
  const auto ref = random_trajectory(rng, 3);
  EXPECT_THROW(add_metrics({ref, ref}, ModelPoints{}), Error);
}

TEST(Metrics, HalfShiftedCubesIouIsOneThird) {
  const Vec3 e(1, 1, 1);
  EXPECT_NEAR(box_iou(Pose(), e, Pose(Rotation(), Vec3(0.5, 0, 0)), e), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(box_intersection_volume(Pose(), e, Pose(Rotation(), Vec3(0.5, 0, 0)), e), 0.5, 1e-12);
  EXPECT_EQ(box_iou(Pose(), e, Pose(Rotation(), Vec3(2, 0, 0)), e), 0.0);
}

TEST(Metrics, CoplanarFacesAreNotDoubleCounted) {
  std::mt19937_64 rng(68);
  const Vec3 e(1, 1, 1);
  // Half-width slab flush with one face of the cube.
  EXPECT_NEAR(box_intersection_volume(Pose(), e, Pose(Rotation(), Vec3(0.25, 0, 0)), Vec3(0.5, 1, 1)),
              0.5, 1e-12);
  EXPECT_NEAR(box_intersection_volume(Pose(), e, Pose(), e), 1.0, 1e-12);
  // Touching boxes share a face but no volume.
  EXPECT_NEAR(box_intersection_volume(Pose(), e, Pose(Rotation(), Vec3(1, 0, 0)), e), 0.0, 1e-12);
  for (int k = 0; k < 20; ++k) {
    const Pose r(exp_so3(oracle::random_axis_angle(rng, 3.0)), oracle::random_vec(rng, 1.0));
    const Pose shifted = r * Pose(Rotation(), Vec3(0.5, 0.25, 0));
    EXPECT_NEAR(box_iou(r, e, shifted, e), 0.375 / (2 - 0.375), 1e-9);
  }
}

TEST(Metrics, IouAgreesWithMonteCarlo) {
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> side(0.05, 0.2);
  for (int trial = 0; trial < 8; ++trial) {
    const Vec3 ea(side(rng), side(rng), side(rng));
    const Vec3 eb(side(rng), side(rng), side(rng));
    const Pose a = oracle::random_pose(rng, 3.0, 0.02);
    const Pose b = oracle::random_pose(rng, 3.0, 0.02);
    const double inter_mc = oracle::monte_carlo_intersection(a, ea, b, eb, 1000000, rng);
    const double iou_mc = inter_mc / (ea.prod() + eb.prod() - inter_mc);
    EXPECT_NEAR(box_iou(a, ea, b, eb), iou_mc, 0.005) << trial;
  }
}

TEST(Metrics, IouIsSymmetric) {
  std::mt19937_64 rng(62);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec3 ea = Vec3::Constant(0.05) + oracle::random_vec(rng, 0.04).cwiseAbs();
    const Vec3 eb = Vec3::Constant(0.05) + oracle::random_vec(rng, 0.04).cwiseAbs();
    const Pose a = oracle::random_pose(rng, 3.0, 0.05);
    const Pose b = oracle::random_pose(rng, 3.0, 0.05);
    EXPECT_NEAR(box_iou(a, ea, b, eb), box_iou(b, eb, a, ea), 1e-12);
  }
}

TEST(Metrics, IouRejectsDegenerateBox) {
  std::mt19937_64 rng(63);
  const auto ref = random_trajectory(rng, 3);
  const std::vector<Vec3> ext{Vec3(0.1, 0.0, 0.1)};
  EXPECT_THROW(iou3d({ref, ref}, ext), Error);
}

TEST(Metrics, PoseRecallThresholdLogic) {
  std::vector<TimedPose> ref, est;
  for (int k = 0; k < 10; ++k) {
    ref.push_back({k, Pose()});
    est.push_back({k, Pose(exp_so3(Vec3(3 * kDeg, 0, 0)), Vec3(0.03, 0, 0))});
  }
  const std::vector<PoseThreshold> th{{5, 2}, {5, 5}, {2, 5}};
  const auto r = pose_recalls({est, ref}, th);
  EXPECT_EQ(r[0], 0.0);
  EXPECT_EQ(r[1], 100.0);
  EXPECT_EQ(r[2], 0.0);
}

TEST(Metrics, PoseRecallMatchesRecount) {
  std::mt19937_64 rng(64);
  const auto ref = random_trajectory(rng, 400);
  const auto est = perturbed(ref, rng, 12 * kDeg, 0.08);
  const std::vector<PoseThreshold> th{{5, 2}, {5, 5}, {10, 2}, {10, 5}, {10, 10}};
  const auto r = pose_recalls({est, ref}, th);
  for (size_t t = 0; t < th.size(); ++t) {
    int hits = 0;
    for (size_t k = 0; k < ref.size(); ++k) {
      const Mat3 d = ref[k].pose.rotation().matrix().transpose() * est[k].pose.rotation().matrix();
      const double deg = std::acos(std::clamp((d.trace() - 1.0) / 2.0, -1.0, 1.0)) / kDeg;
      const double cm = 100.0 * (est[k].pose.translation() - ref[k].pose.translation()).norm();
      if (deg < th[t].deg && cm < th[t].cm) ++hits;
    }
    EXPECT_EQ(r[t], 100.0 * hits / ref.size());
  }
}

TEST(Metrics, OrderPreservingRelabelingInvariance) {
  std::mt19937_64 rng(65);
  const auto ref = random_trajectory(rng, 25);
  const auto est = perturbed(ref, rng, 0.05, 0.01);
  auto ref2 = ref, est2 = est;
  for (size_t k = 0; k < ref.size(); ++k) ref2[k].frame = est2[k].frame = 100 + 7 * static_cast<int>(k);
  const Stats a = ate({est, ref}), b = ate({est2, ref2});
  EXPECT_EQ(a.values, b.values);
  const RpeResult ra = rpe({est, ref}), rb = rpe({est2, ref2});
  EXPECT_EQ(ra.rot_deg.values, rb.rot_deg.values);
  EXPECT_EQ(ra.trans_mm.values, rb.trans_mm.values);
}

TEST(Metrics, SerialEqualsParallel) {
  std::mt19937_64 rng(66);
  const auto ref = random_trajectory(rng, 64);
  const auto est = perturbed(ref, rng, 0.1, 0.02);
  std::vector<Vec3> pts;
  for (int i = 0; i < 3000; ++i) pts.push_back(oracle::random_vec(rng, 0.1));
  const ModelPoints model{pts, 0.3};
  const AddResult a = add_metrics({est, ref}, model, Exec::kSerial);
  const AddResult b = add_metrics({est, ref}, model, Exec::kParallel);
  EXPECT_EQ(a.add_m, b.add_m);
  EXPECT_EQ(a.adds_m, b.adds_m);
  const std::vector<Vec3> ext{Vec3(0.1, 0.2, 0.15)};
  EXPECT_EQ(iou3d({est, ref}, ext).iou, iou3d({est, ref}, ext, Exec::kParallel).iou);
}

TEST(Metrics, EvaluateReportInvariants) {
  std::mt19937_64 rng(67);
  const auto ref = random_trajectory(rng, 50);
  const auto est = perturbed(ref, rng, 0.05, 0.01);
  std::vector<Vec3> pts;
  for (int i = 0; i < 200; ++i) pts.push_back(oracle::random_vec(rng, 0.1));
  const ModelPoints model{pts, 0.3};
  const std::vector<Vec3> ext{Vec3(0.1, 0.2, 0.15)};
  const auto rep = evaluate({est, ref}, &model, ext, EvaluationOptions{});
  for (const Stats* s : {&rep.ate_mm, &rep.rpe_rot_deg, &rep.rpe_trans_mm}) {
    EXPECT_GE(s->max, s->mean);
    EXPECT_GE(s->mean, 0.0);
  }
  ASSERT_TRUE(rep.add && rep.iou);
  for (double r : rep.pose_recalls) {
    EXPECT_GE(r, 0.0);
    EXPECT_LE(r, 100.0);
  }
}
