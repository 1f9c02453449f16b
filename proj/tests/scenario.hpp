#pragma once

// The 500-frame corrupted-sequence scenario: noisy absolute poses with a
// handful of grossly corrupted frames, relative edges from registering
// model points seen in two frames, and the corrupted frames marked
// downweighted. Shared by the unit tests and the acceptance runner.

#include <algorithm>
#include <random>
#include <set>
#include <vector>

#include "posefuse/dataio.hpp"
#include "posefuse/metrics.hpp"
#include "posefuse/pose_graph.hpp"
#include "posefuse/relpose.hpp"
#include "posefuse/smoother.hpp"

namespace posefuse::scenario {

struct Outcome {
  Stats raw;
  Stats smoothed;
  Stats pgo;
};

struct Options {
  int frames = 500;
  int corrupted = 10;
  double point_noise_m = 0.001;
  int points_per_pair = 100;
  Exec exec = Exec::kSerial;
};

inline Outcome run(std::uint64_t seed, const Options& opt = {}) {
  SynthSpec spec;
  spec.frames = opt.frames;
  spec.seed = seed;
  std::mt19937_64 rng(seed * 7919 + 1);
  std::uniform_int_distribution<int> pick(1, opt.frames - 2);
  std::set<int> bad;
  while (static_cast<int>(bad.size()) < opt.corrupted) bad.insert(pick(rng));
  for (int f : bad) spec.corruptions.push_back({f, 20.0, 50.0});

  const auto gt = synth_ground_truth(spec);
  const auto raw = synth_noisy_absolute(spec, gt);

  NoiseConfig noise;
  noise.sigma_meas_trans = spec.noise_trans_m;
  noise.sigma_meas_rot = spec.noise_rot_rad;
  noise.dt = 1.0 / spec.rate_hz;
  const SmoothedTrajectory sm = smooth(raw, noise);

  // Relative edges: the same object points observed in both frames.
  std::vector<int> frames;
  for (const auto& p : gt) frames.push_back(p.frame);
  const std::vector<int> strides{1, 5};
  const auto pairs = make_pairs(frames, strides);
  std::normal_distribution<double> n(0.0, opt.point_noise_m);
  std::vector<CorrespondenceSet> sets;
  for (size_t k = 0; k < pairs.size(); ++k) {
    const auto [fi, fj] = pairs[k];
    const auto pts = sample_box_surface(spec.extents, opt.points_per_pair, seed * 1000003 + k);
    CorrespondenceSet c;
    c.frame_i = fi;
    c.frame_j = fj;
    for (const Vec3& p : pts) {
      c.points_i.push_back(gt[fi].pose * p + Vec3(n(rng), n(rng), n(rng)));
      c.points_j.push_back(gt[fj].pose * p + Vec3(n(rng), n(rng), n(rng)));
    }
    sets.push_back(std::move(c));
  }
  RelposeConfig rcfg;
  rcfg.ransac.seed = seed;
  std::vector<RelativePoseEstimate> rel;
  for (auto& r : register_all(sets, rcfg, opt.exec)) {
    if (r) rel.push_back(std::move(*r));
  }

  OverrideFile overrides;
  for (int f : bad) overrides.entries.push_back({OverrideEntry::Kind::kRange, f, f,
                                                 ReliabilityTier::kDownweighted, std::nullopt});
  const PoseGraph g = build_graph(sm, rel, overrides, EdgeWeights{});
  OptimizerOptions oo;
  oo.exec = opt.exec;
  const OptimizeResult res = optimize(g, oo);

  Outcome out;
  out.raw = ate(TrajectoryPair::matched(raw, gt));
  out.smoothed = ate(TrajectoryPair::matched(sm.poses(), gt));
  out.pgo = ate(TrajectoryPair::matched(res.timed(g), gt));
  return out;
}

}  // namespace posefuse::scenario
