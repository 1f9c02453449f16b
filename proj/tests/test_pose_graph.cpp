#include <gtest/gtest.h>

#include <numbers>

#include "oracles.hpp"
#include "posefuse/error.hpp"
#include "posefuse/pose_graph.hpp"
#include "graph_fixtures.hpp"
#include "scenario.hpp"

using namespace posefuse;
using namespace posefuse::fixture;

namespace {

double relative_jacobian_error(const Mat6& analytic, const Eigen::MatrixXd& numeric) {
  return (analytic - numeric).cwiseAbs().maxCoeff() / std::max(1.0, numeric.cwiseAbs().maxCoeff());
}

}  // namespace

TEST(PoseGraph, TierWeights) {
  const auto truth = smooth_truth(10);
  OverrideFile o;
  o.entries.push_back({OverrideEntry::Kind::kRange, 2, 4, ReliabilityTier::kDownweighted, {}});
  o.entries.push_back({OverrideEntry::Kind::kEdge, 6, 6, ReliabilityTier::kDownweighted, 250.0});
  o.entries.push_back({OverrideEntry::Kind::kRange, 4, 4, ReliabilityTier::kDefault, {}});
  const PoseGraph g = build_graph(truth, {}, o, EdgeWeights{});
  ASSERT_EQ(g.absolute.size(), 10u);
  EXPECT_EQ(g.absolute[0].information, 1e5 * Mat6::Identity());
  EXPECT_EQ(g.absolute[2].information, 5e2 * Mat6::Identity());
  EXPECT_EQ(g.absolute[3].tier, ReliabilityTier::kDownweighted);
  // Later entries win.
  EXPECT_EQ(g.absolute[4].information, 1e5 * Mat6::Identity());
  EXPECT_EQ(g.absolute[6].information, 250.0 * Mat6::Identity());
}

TEST(PoseGraph, RemovedSpanIsSeededFromRelatives) {
  std::mt19937_64 rng(30);
  const auto truth = smooth_truth(10);
  auto absolute = truth;
  absolute[5].pose = perturb(truth[5].pose, rng, 0.3, 0.1);
  std::vector<RelativePoseEstimate> rel;
  for (int i = 0; i + 1 < 10; ++i) {
    RelativePoseEstimate e;
    e.frame_i = i;
    e.frame_j = i + 1;
    e.pose = truth[i + 1].pose * truth[i].pose.inverse();
    e.information = Mat6::Identity();
    rel.push_back(e);
  }
  OverrideFile o;
  o.entries.push_back({OverrideEntry::Kind::kRange, 5, 5, ReliabilityTier::kRemoved, {}});
  const PoseGraph g = build_graph(absolute, rel, o, EdgeWeights{});
  EXPECT_EQ(g.absolute[5].information, Mat6::Zero());
  EXPECT_LT(max_pose_gap(std::span(&g.initial[5], 1), std::span(&truth[5].pose, 1)), 1e-12);
  const auto res = optimize(g, OptimizerOptions{});
  EXPECT_LT(translation_distance(res.poses[5], truth[5].pose), 1e-6);
}

TEST(PoseGraph, RemovedWithoutRelativesIsUnanchored) {
  const auto truth = smooth_truth(6);
  OverrideFile o;
  o.entries.push_back({OverrideEntry::Kind::kRange, 3, 3, ReliabilityTier::kRemoved, {}});
  try {
    build_graph(truth, {}, o, EdgeWeights{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kUnanchoredGraph);
  }
}

TEST(PoseGraph, RejectsOutOfRangeInputs) {
  const auto truth = smooth_truth(6);
  OverrideFile o;
  o.entries.push_back({OverrideEntry::Kind::kRange, 4, 9, ReliabilityTier::kDownweighted, {}});
  EXPECT_THROW(build_graph(truth, {}, o, EdgeWeights{}), Error);
  RelativePoseEstimate e;
  e.frame_i = 2;
  e.frame_j = 11;
  EXPECT_THROW(build_graph(truth, std::span(&e, 1), OverrideFile{}, EdgeWeights{}), Error);
}

TEST(PoseGraph, AbsoluteOnlyOptimumIsTheMeasurements) {
  std::mt19937_64 rng(31);
  const auto truth = smooth_truth(20);
  PoseGraph g = build_graph(truth, {}, OverrideFile{}, EdgeWeights{});
  for (auto& p : g.initial) p = perturb(p, rng, 10 * kDeg, 0.05);
  const auto res = optimize(g, OptimizerOptions{});
  std::vector<Pose> z;
  for (const auto& p : truth) z.push_back(p.pose);
  EXPECT_LT(max_pose_gap(res.poses, z), 1e-12);
}

TEST(PoseGraph, ResidualIdentities) {
  std::mt19937_64 rng(32);
  for (int k = 0; k < 50; ++k) {
    const Pose a = oracle::random_pose(rng), z = oracle::random_pose(rng);
    EXPECT_LT(residual_absolute(a, a).vector().norm(), 1e-12);
    const Twist xi{oracle::random_vec(rng, 0.5), oracle::random_axis_angle(rng, 2.0)};
    EXPECT_LT((residual_absolute(exp_se3(xi), Pose()).vector() - xi.vector()).norm(), 1e-12);
    EXPECT_LT(residual_relative(a, a * z, z).vector().norm(), 1e-12);
  }
  EXPECT_EQ(residual_relative(Pose(), Pose(), Pose()).vector(), Vec6::Zero());
}

TEST(PoseGraph, JacobiansMatchFiniteDifferences) {
  std::mt19937_64 rng(33);
  for (int k = 0; k < 50; ++k) {
    const Pose ti = oracle::random_pose(rng), tj = oracle::random_pose(rng);
    // Measurements near the nodes keep residuals away from the cut locus.
    const Pose z_abs = perturb(ti, rng, 1.0, 0.3);
    const Pose z_rel = perturb(ti.inverse() * tj, rng, 1.0, 0.3);

    const auto f_abs = [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
      return residual_absolute(ti * exp_se3(Twist::from_vector(Vec6(d))), z_abs).vector();
    };
    const auto f_i = [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
      return residual_relative(ti * exp_se3(Twist::from_vector(Vec6(d))), tj, z_rel).vector();
    };
    const auto f_j = [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
      return residual_relative(ti, tj * exp_se3(Twist::from_vector(Vec6(d))), z_rel).vector();
    };
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(6);
    Mat6 di, dj;
    jacobian_relative(ti, tj, z_rel, &di, &dj);
    EXPECT_LT(relative_jacobian_error(jacobian_absolute(ti, z_abs), oracle::numeric_jacobian(f_abs, zero)), 1e-5);
    EXPECT_LT(relative_jacobian_error(di, oracle::numeric_jacobian(f_i, zero)), 1e-5);
    EXPECT_LT(relative_jacobian_error(dj, oracle::numeric_jacobian(f_j, zero)), 1e-5);
  }
}

TEST(PoseGraph, ZeroResidualRecovery) {
  std::mt19937_64 rng(34);
  const auto truth = smooth_truth(40);
  const PoseGraph g = consistent_graph(truth, rng);
  const auto res = optimize(g, OptimizerOptions{});
  std::vector<Pose> t;
  for (const auto& p : truth) t.push_back(p.pose);
  EXPECT_LT(max_pose_gap(res.poses, t), 1e-8);
  EXPECT_LT(res.final_cost, 1e-16);
}

TEST(PoseGraph, AcceptedStepsNeverIncreaseCost) {
  std::mt19937_64 rng(35);
  const auto truth = smooth_truth(60);
  const PoseGraph g = noisy_graph(truth, rng);
  const auto res = optimize(g, OptimizerOptions{});
  double prev = res.initial_cost;
  int accepted = 0;
  for (const auto& rec : res.log) {
    if (!rec.accepted) continue;
    ++accepted;
    EXPECT_LE(rec.cost, prev);
    prev = rec.cost;
  }
  EXPECT_GT(accepted, 0);
  EXPECT_NEAR(res.final_cost, graph_cost(g, res.poses), 1e-12 * res.final_cost);
}

TEST(PoseGraph, ArgminInvariantUnderInformationScaling) {
  std::mt19937_64 rng(36);
  const auto truth = smooth_truth(50);
  const PoseGraph g = noisy_graph(truth, rng);
  PoseGraph scaled = g;
  for (auto& a : scaled.absolute) a.information *= 37.5;
  for (auto& r : scaled.relative) r.information *= 37.5;
  OptimizerOptions opts;
  opts.rel_tol = 1e-14;
  opts.abs_tol = 1e-12;
  const auto a = optimize(g, opts);
  const auto b = optimize(scaled, opts);
  EXPECT_LT(max_pose_gap(a.poses, b.poses), 1e-9);
}

TEST(PoseGraph, DroppingZeroResidualEdgeKeepsOptimum) {
  std::mt19937_64 rng(37);
  const auto truth = smooth_truth(30);
  PoseGraph g = noisy_graph(truth, rng);
  OptimizerOptions opts;
  opts.rel_tol = 1e-14;
  opts.abs_tol = 1e-12;
  const auto base = optimize(g, opts);
  // An extra edge that agrees with the optimum exactly.
  PoseGraph extra = g;
  extra.relative.push_back({g.frames[3], g.frames[17], base.poses[3].inverse() * base.poses[17],
                            random_spd(rng, 50.0)});
  const auto with = optimize(extra, opts);
  EXPECT_LT(max_pose_gap(base.poses, with.poses), 1e-9);
}

TEST(PoseGraph, DeterministicAndParallelMatchesSerial) {
  std::mt19937_64 rng(38);
  const auto truth = smooth_truth(80);
  const PoseGraph g = noisy_graph(truth, rng);
  OptimizerOptions opts;
  const auto a = optimize(g, opts);
  const auto b = optimize(g, opts);
  opts.exec = Exec::kParallel;
  const auto c = optimize(g, opts);
  ASSERT_EQ(a.log.size(), b.log.size());
  ASSERT_EQ(a.log.size(), c.log.size());
  for (size_t i = 0; i < a.log.size(); ++i) {
    EXPECT_EQ(a.log[i].cost, b.log[i].cost);
    EXPECT_EQ(a.log[i].cost, c.log[i].cost);
  }
  for (size_t i = 0; i < a.poses.size(); ++i) {
    EXPECT_EQ(a.poses[i].matrix(), c.poses[i].matrix());
  }
  EXPECT_EQ(graph_cost(g, a.poses), graph_cost(g, a.poses, {}, Exec::kParallel));
}

TEST(PoseGraph, HuberLimitsAnOutlierEdge) {
  std::mt19937_64 rng(39);
  const auto truth = smooth_truth(30);
  PoseGraph g = consistent_graph(truth, rng);
  for (auto& r : g.relative) r.information = 1e4 * Mat6::Identity();
  // One absolute edge is badly wrong but carries full weight.
  g.absolute[15].measurement = perturb(truth[15].pose, rng, 0.0, 0.0) *
                               exp_se3(Twist{Vec3(0.05, 0, 0), Vec3(0, 0.3, 0)});
  OptimizerOptions plain;
  OptimizerOptions huber;
  huber.robust.type = RobustKernel::Type::kHuber;
  huber.robust.delta = 3.0;
  const auto a = optimize(g, plain);
  const auto b = optimize(g, huber);
  EXPECT_LT(translation_distance(b.poses[15], truth[15].pose),
            0.5 * translation_distance(a.poses[15], truth[15].pose));
  EXPECT_EQ(huber.robust.rho(4.0), 4.0);
  EXPECT_DOUBLE_EQ(huber.robust.rho(25.0), 2 * 3.0 * 5.0 - 9.0);
}

TEST(PoseGraph, NonFiniteCostIsNumericalFailure) {
  const auto truth = smooth_truth(4);
  PoseGraph g = build_graph(truth, {}, OverrideFile{}, EdgeWeights{});
  g.absolute[1].measurement = Pose(Rotation(), Vec3(1e200, 0, 0));
  try {
    optimize(g, OptimizerOptions{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNumericalFailure);
    EXPECT_TRUE(e.is_numerical());
  }
}

TEST(PoseGraph, CorruptedSequenceScenario) {
  // One seed here; the acceptance runner sweeps twenty.
  const auto out = scenario::run(1);
  EXPECT_LT(out.pgo.max, out.smoothed.max);
  EXPECT_LT(std::abs(out.pgo.mean - out.smoothed.mean), 0.2 * out.smoothed.mean);
  EXPECT_LT(out.pgo.mean, out.raw.mean);
}
