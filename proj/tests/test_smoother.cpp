#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <boost/math/distributions/chi_squared.hpp>
#include <numbers>

#include "oracles.hpp"
#include "posefuse/error.hpp"
#include "posefuse/smoother.hpp"

using namespace posefuse;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct Rmse {
  double trans = 0.0;
  double rot = 0.0;
};

Rmse rmse(std::span<const TimedPose> est, std::span<const TimedPose> truth) {
  Rmse r;
  for (size_t i = 0; i < est.size(); ++i) {
    r.trans += std::pow(translation_distance(est[i].pose, truth[i].pose), 2);
    r.rot += std::pow(rotation_angle_between(est[i].pose.rotation(), truth[i].pose.rotation()), 2);
  }
  r.trans = std::sqrt(r.trans / est.size());
  r.rot = std::sqrt(r.rot / est.size());
  return r;
}

struct CvSequence {
  std::vector<TimedPose> truth;
  std::vector<TimedPose> meas;
};

CvSequence constant_velocity(int frames, double sigma_p, double sigma_r, std::mt19937_64& rng,
                             Vec3 v = Vec3(0.1, 0, 0), Vec3 w = Vec3(0, 0, 0.2)) {
  std::normal_distribution<double> n;
  CvSequence s;
  const Pose start(exp_so3(Vec3(0.2, -0.1, 0.3)), Vec3(0.0, 0.0, 0.8));
  for (int k = 0; k < frames; ++k) {
    const double t = k / 15.0;
    const Pose truth(start.rotation() * exp_so3(w * t), start.translation() + v * t);
    s.truth.push_back({k, truth});
    const Vec3 dp = sigma_p * Vec3(n(rng), n(rng), n(rng));
    const Vec3 dr = sigma_r * Vec3(n(rng), n(rng), n(rng));
    s.meas.push_back({k, Pose(truth.rotation() * exp_so3(dr), truth.translation() + dp)});
  }
  return s;
}

double min_eigenvalue(const Mat12& m) {
  return Eigen::SelfAdjointEigenSolver<Mat12>(m, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

}  // namespace

TEST(Smoother, StationaryFixedPoint) {
  std::vector<TimedPose> meas;
  for (int k = 0; k < 30; ++k) meas.push_back({k, Pose()});
  NoiseConfig noise;
  noise.sigma_meas_trans = 1e-7;
  noise.sigma_meas_rot = 1e-7;
  for (const auto& step : ekf_forward(meas, noise)) {
    EXPECT_LT(step.updated.p.norm(), 1e-6);
    EXPECT_LT(rotation_angle_between(step.updated.q, Rotation()), 1e-6);
  }
}

TEST(Smoother, SinglePropagationStep) {
  FilterState x;
  x.v = Vec3(1, 0, 0);
  NoiseConfig noise;
  noise.dt = 0.1;
  const FilterState y = ekf_predict(x, noise);
  EXPECT_EQ(y.p, Vec3(0.1, 0, 0));
  EXPECT_EQ(y.v, x.v);
}

TEST(Smoother, PredictRotatesByAngularVelocity) {
  FilterState x;
  x.w = Vec3(0, 0, 0.3);
  NoiseConfig noise;
  noise.dt = 0.5;
  const FilterState y = ekf_predict(x, noise);
  EXPECT_NEAR(rotation_angle_between(y.q, exp_so3(Vec3(0, 0, 0.15))), 0.0, 1e-15);
}

TEST(Smoother, FilteredBeatsRawOnConstantVelocity) {
  std::mt19937_64 rng(21);
  const auto s = constant_velocity(150, 0.003, 0.5 * kDeg, rng);
  NoiseConfig noise;
  noise.sigma_meas_trans = 0.003;
  noise.sigma_meas_rot = 0.5 * kDeg;
  const auto fwd = ekf_forward(s.meas, noise);
  const auto filtered = filtered_poses(fwd);
  const Rmse raw = rmse(s.meas, s.truth);
  const Rmse filt = rmse(filtered, s.truth);
  EXPECT_LT(filt.trans, raw.trans);
  EXPECT_LT(filt.rot, raw.rot);
}

TEST(Smoother, NoiselessStaticIsReproduced) {
  const Pose p(exp_so3(Vec3(0.4, 0.1, -0.2)), Vec3(0.05, -0.02, 0.7));
  std::vector<TimedPose> meas;
  for (int k = 0; k < 40; ++k) meas.push_back({k, p});
  const auto sm = smooth(meas, NoiseConfig{});
  for (const auto& f : sm.frames) {
    EXPECT_LT(translation_distance(f.pose(), p), 1e-9);
    EXPECT_LT(rotation_angle_between(f.pose().rotation(), p.rotation()), 1e-9);
  }
}

TEST(Smoother, OutlierIsMoreThanHalved) {
  const Pose p(exp_so3(Vec3(0.4, 0.1, -0.2)), Vec3(0.05, -0.02, 0.7));
  std::vector<TimedPose> meas;
  for (int k = 0; k < 60; ++k) meas.push_back({k, p});
  const int bad = 30;
  meas[bad].pose = Pose(p.rotation() * exp_so3(Vec3(0, 5 * kDeg, 0)),
                        p.translation() + Vec3(0.02, 0, 0));
  const auto sm = smooth(meas, NoiseConfig{});
  const Pose s = sm.frames[bad].pose();
  EXPECT_LT(translation_distance(s, p), 0.5 * 0.02);
  EXPECT_LT(rotation_angle_between(s.rotation(), p.rotation()), 0.5 * 5 * kDeg);
}

TEST(Smoother, SmoothedNoWorseThanFilteredNoWorseThanRaw) {
  std::mt19937_64 rng(22);
  NoiseConfig noise;
  noise.sigma_meas_trans = 0.003;
  noise.sigma_meas_rot = 0.5 * kDeg;
  for (int run = 0; run < 20; ++run) {
    const auto s = constant_velocity(120, 0.003, 0.5 * kDeg, rng,
                                     oracle::random_vec(rng, 0.1), oracle::random_vec(rng, 0.3));
    const auto fwd = ekf_forward(s.meas, noise);
    const auto sm = rts_backward(fwd);
    const Rmse raw = rmse(s.meas, s.truth);
    const Rmse filt = rmse(filtered_poses(fwd), s.truth);
    const Rmse smo = rmse(sm.poses(), s.truth);
    EXPECT_LE(smo.trans, filt.trans) << run;
    EXPECT_LE(smo.rot, filt.rot) << run;
    EXPECT_LE(filt.trans, raw.trans) << run;
    EXPECT_LE(filt.rot, raw.rot) << run;
  }
}

TEST(Smoother, CovarianceStaysSymmetricPsdAndHemisphereAligned) {
  std::mt19937_64 rng(23);
  const auto s = constant_velocity(100, 0.005, 1 * kDeg, rng, Vec3(0.05, 0.02, 0), Vec3(0.5, 1.0, 2.0));
  const auto fwd = ekf_forward(s.meas, NoiseConfig{});
  for (const auto& step : fwd) {
    for (const Mat12* c : {&step.predicted.cov, &step.updated.cov}) {
      EXPECT_LT((*c - c->transpose()).cwiseAbs().maxCoeff(), 1e-10);
      EXPECT_GE(min_eigenvalue(*c), -1e-9);
    }
    EXPECT_NEAR(step.updated.q.quaternion().norm(), 1.0, 1e-12);
  }
  const auto sm = rts_backward(fwd);
  for (size_t i = 0; i < sm.frames.size(); ++i) {
    const Mat12& c = sm.frames[i].state.cov;
    EXPECT_LT((c - c.transpose()).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_GE(min_eigenvalue(c), -1e-9);
    if (i > 0) EXPECT_GE(sm.frames[i].state.q.dot(sm.frames[i - 1].state.q), 0.0);
  }
}

TEST(Smoother, LastSmoothedEqualsLastFiltered) {
  std::mt19937_64 rng(24);
  const auto s = constant_velocity(50, 0.005, 1 * kDeg, rng);
  const auto fwd = ekf_forward(s.meas, NoiseConfig{});
  const auto sm = rts_backward(fwd);
  EXPECT_EQ(sm.frames.back().state.p, fwd.back().updated.p);
  EXPECT_EQ(sm.frames.back().state.cov, fwd.back().updated.cov);
}

TEST(Smoother, DeterministicBitForBit) {
  std::mt19937_64 rng(25);
  const auto s = constant_velocity(80, 0.005, 1 * kDeg, rng);
  const auto a = smooth(s.meas, NoiseConfig{}).poses();
  const auto b = smooth(s.meas, NoiseConfig{}).poses();
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].pose.translation(), b[i].pose.translation());
    EXPECT_EQ(a[i].pose.rotation().quaternion().coeffs(), b[i].pose.rotation().quaternion().coeffs());
  }
}

TEST(Smoother, GapsArePredictedAndFlagged) {
  std::mt19937_64 rng(26);
  auto s = constant_velocity(60, 0.002, 0.3 * kDeg, rng);
  std::vector<TimedPose> meas;
  for (const auto& m : s.meas) {
    if (m.frame < 20 || m.frame > 29) meas.push_back(m);
  }
  const auto sm = smooth(meas, NoiseConfig{});
  ASSERT_EQ(sm.frames.size(), 60u);
  for (int k = 0; k < 60; ++k) {
    EXPECT_EQ(sm.frames[k].frame, k);
    EXPECT_EQ(sm.gap_mask[k], k >= 20 && k <= 29);
  }
  // The bridged gap stays close to the constant-velocity truth.
  EXPECT_LT(translation_distance(sm.frames[25].pose(), s.truth[25].pose), 0.01);
}

TEST(Smoother, RejectsTooFewOrUnorderedMeasurements) {
  const std::vector<TimedPose> one{{0, Pose()}};
  try {
    ekf_forward(one, NoiseConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInsufficientData);
  }
  const std::vector<TimedPose> unordered{{3, Pose()}, {2, Pose()}};
  EXPECT_THROW(ekf_forward(unordered, NoiseConfig{}), Error);
  NoiseConfig bad;
  bad.q_accel = 0.0;
  const std::vector<TimedPose> two{{0, Pose()}, {1, Pose()}};
  EXPECT_THROW(ekf_forward(two, bad), Error);
}

TEST(Smoother, NeesWithinChiSquareBand) {
  std::mt19937_64 rng(27);
  NoiseConfig noise;
  noise.sigma_meas_trans = 0.005;
  noise.sigma_meas_rot = 1 * kDeg;
  const int runs = 50;
  double total = 0.0;
  for (int r = 0; r < runs; ++r) {
    const auto traj = oracle::sample_model_trajectory(noise, 100, rng);
    const auto fwd = ekf_forward(traj.measurements, noise);
    total += nees(fwd.back().updated, traj.truth.back());
  }
  boost::math::chi_squared chi(12.0 * runs);
  const double lo = boost::math::quantile(chi, 0.025) / runs;
  const double hi = boost::math::quantile(chi, 0.975) / runs;
  EXPECT_GE(total / runs, lo);
  EXPECT_LE(total / runs, hi);
}
