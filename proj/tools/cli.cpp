#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <csignal>
#include <iostream>
#include <map>
#include <mutex>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "posefuse/config.hpp"
#include "posefuse/dataio.hpp"
#include "posefuse/error.hpp"
#include "serve.hpp"

namespace posefuse::cli {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 1;
};

PipelineConfig load_pipeline(const Common& c) {
  PipelineConfig cfg;
  if (!c.config.empty()) cfg = load_config(cfg, c.config);
  if (c.seed_set) cfg.relpose.ransac.seed = c.seed;
  cfg.validate();
  return cfg;
}

Vec3 parse_extents(const std::string& s) {
  std::istringstream ss(s);
  Vec3 e;
  if (!(ss >> e.x() >> e.y() >> e.z()) || !(e.minCoeff() > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "extents must be three positive numbers, got '" + s + "'");
  }
  return e;
}

std::set<int> removed_frames(const OverrideFile& o) {
  std::set<int> out;
  for (const auto& e : o.entries) {
    if (e.tier != ReliabilityTier::kRemoved) continue;
    for (int f = e.start; f <= e.end; ++f) out.insert(f);
  }
  return out;
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads; the first error wins.
template <class Fn>
void run_jobs(int jobs, size_t n, Fn&& fn) {
  std::atomic<size_t> next{0};
  std::exception_ptr first;
  std::mutex m;
  const auto worker = [&] {
    for (size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(m);
        if (!first) first = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const int count = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
  for (int t = 1; t < count; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

// ---- synth --------------------------------------------------------------------

struct SynthArgs {
  std::string out;
  std::string id = "synth";
  int frames = 500;
  double rate = 15.0;
  std::string motion = "smooth";
  double noise_trans_mm = 5.0;
  double noise_rot_deg = 1.0;
  double track_noise_px = 0.0;
  int corrupt = 0;
  std::vector<int> corrupt_frames;
  double corrupt_rot_deg = 20.0;
  double corrupt_trans_mm = 50.0;
};

int cmd_synth(const SynthArgs& a, const Common& c, std::ostream& out) {
  SynthSpec spec;
  spec.id = a.id;
  spec.frames = a.frames;
  spec.rate_hz = a.rate;
  const std::map<std::string, MotionProfile> motions{{"static", MotionProfile::kStatic},
                                                     {"constant_velocity", MotionProfile::kConstantVelocity},
                                                     {"smooth", MotionProfile::kSmooth}};
  auto it = motions.find(a.motion);
  if (it == motions.end()) throw Error(ErrorKind::kInvalidSpec, "unknown motion profile " + a.motion);
  spec.motion = it->second;
  spec.noise_trans_m = a.noise_trans_mm * 1e-3;
  spec.noise_rot_rad = a.noise_rot_deg * kDeg;
  spec.track_noise_px = a.track_noise_px;
  spec.seed = c.seed;
  std::vector<int> frames = a.corrupt_frames;
  if (a.corrupt > 0) {
    if (a.corrupt > a.frames - 2) throw Error(ErrorKind::kInvalidSpec, "too many corrupted frames");
    std::vector<int> pool(a.frames - 2);
    for (int i = 0; i < a.frames - 2; ++i) pool[i] = i + 1;
    std::mt19937_64 rng(c.seed ^ 0xC0AAu);
    std::shuffle(pool.begin(), pool.end(), rng);
    frames.insert(frames.end(), pool.begin(), pool.begin() + a.corrupt);
  }
  std::sort(frames.begin(), frames.end());
  frames.erase(std::unique(frames.begin(), frames.end()), frames.end());
  for (int f : frames) spec.corruptions.push_back({f, a.corrupt_rot_deg, a.corrupt_trans_mm});
  const fs::path manifest = synth_sequence(spec, a.out);
  out << manifest.string() << "\n";
  return kExitOk;
}

// ---- smooth -------------------------------------------------------------------

struct SmoothArgs {
  std::string input;
  std::string output;
  std::string overrides;
  std::string filtered_output;
  double rate = 0.0;
};

int cmd_smooth(const SmoothArgs& a, const Common& c, std::ostream& err) {
  PipelineConfig cfg = load_pipeline(c);
  if (a.rate > 0.0) cfg.noise.dt = 1.0 / a.rate;
  std::vector<std::string> warnings;
  auto meas = read_poses(fs::path(a.input), &warnings);
  if (!a.overrides.empty() && cfg.removal == RemovalOrder::kBeforeSmoothing) {
    const auto removed = removed_frames(read_overrides(a.overrides));
    std::erase_if(meas, [&](const TimedPose& p) { return removed.count(p.frame) > 0; });
  }
  const auto forward = ekf_forward(meas, cfg.noise);
  const auto smoothed = rts_backward(forward);
  for (const auto& w : warnings) err << "warning: " << w << "\n";
  for (const auto& w : smoothed.warnings) err << "warning: " << w << "\n";
  write_poses(fs::path(a.output), smoothed.poses());
  if (!a.filtered_output.empty()) write_poses(fs::path(a.filtered_output), filtered_poses(forward));
  return kExitOk;
}

// ---- relpose ------------------------------------------------------------------

struct RelposeArgs {
  std::vector<std::string> manifests;
  std::string output;
  std::string chain_output;
  std::string anchor;
};

// Correspondences and registrations for one sequence.
std::vector<RelativePoseEstimate> relpose_sequence(const SequenceManifest& m,
                                                   const PipelineConfig& cfg,
                                                   std::vector<std::string>* notes) {
  if (m.tracks_file.empty()) throw Error(ErrorKind::kInvalidInput, m.id + ": manifest has no tracks");
  if (m.depth_pattern.empty()) throw Error(ErrorKind::kInvalidInput, m.id + ": manifest has no depth");
  const TrackTable tracks = read_tracks(m.resolve(m.tracks_file));
  const std::vector<int> frames = m.frames();
  const auto pairs = make_pairs(frames, cfg.relpose.strides);

  // Images are loaded once each and released when no later pair needs them.
  struct Images {
    DepthImage depth;
    std::optional<Mask> mask;
  };
  std::map<int, Images> cache;
  const auto images = [&](int f) -> const Images& {
    auto it = cache.find(f);
    if (it != cache.end()) return it->second;
    Images im;
    im.depth = read_depth_png(m.depth_path(f));
    if (!m.mask_pattern.empty()) im.mask = read_mask_png(m.mask_path(f));
    return cache.emplace(f, std::move(im)).first->second;
  };

  std::vector<std::pair<int, int>> order = pairs;
  std::sort(order.begin(), order.end());
  std::vector<CorrespondenceSet> sets;
  for (const auto& [i, j] : order) {
    while (!cache.empty() && cache.begin()->first < i) cache.erase(cache.begin());
    const Images& a = images(i);
    const Images& b = images(j);
    try {
      sets.push_back(backproject(tracks, a.depth, b.depth, a.mask ? &*a.mask : nullptr,
                                 b.mask ? &*b.mask : nullptr, m.intrinsics, i, j));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kInsufficientCorrespondences) throw;
      notes->push_back(m.id + ": pair (" + std::to_string(i) + ", " + std::to_string(j) +
                       ") skipped: " + e.what());
    }
  }
  const auto results = register_all(sets, cfg.relpose, Exec::kParallel);
  std::vector<RelativePoseEstimate> out;
  for (size_t k = 0; k < results.size(); ++k) {
    if (results[k]) {
      out.push_back(*results[k]);
    } else {
      notes->push_back(m.id + ": pair (" + std::to_string(sets[k].frame_i) + ", " +
                       std::to_string(sets[k].frame_j) + ") failed registration");
    }
  }
  return out;
}

int cmd_relpose(const RelposeArgs& a, const Common& c, std::ostream& err) {
  const PipelineConfig cfg = load_pipeline(c);
  if (a.manifests.size() > 1 && (!a.output.empty() || !a.chain_output.empty())) {
    throw Error(ErrorKind::kInvalidArgument,
                "with several manifests, outputs go to <sequence>/relatives.csv; drop --output");
  }
  std::vector<std::vector<std::string>> notes(a.manifests.size());
  run_jobs(c.jobs, a.manifests.size(), [&](size_t s) {
    const SequenceManifest m = read_manifest(a.manifests[s]);
    const auto rel = relpose_sequence(m, cfg, &notes[s]);
    const fs::path out = a.output.empty() ? m.dir / "relatives.csv" : fs::path(a.output);
    write_relatives(out, rel);
    if (!a.chain_output.empty()) {
      std::vector<RelativePoseEstimate> consecutive;
      for (const auto& e : rel) {
        if (e.frame_j == e.frame_i + 1) consecutive.push_back(e);
      }
      const fs::path anchor_file =
          a.anchor.empty() ? m.resolve(m.raw_poses_file) : fs::path(a.anchor);
      const auto anchor = read_poses(anchor_file);
      if (anchor.empty()) throw Error(ErrorKind::kInvalidInput, "anchor pose file is empty");
      write_poses(fs::path(a.chain_output),
                  chain_relative(anchor.front().pose, anchor.front().frame, consecutive));
    }
  });
  for (const auto& n : notes) {
    for (const auto& line : n) err << "note: " << line << "\n";
  }
  return kExitOk;
}

// ---- optimize -----------------------------------------------------------------

struct OptimizeArgs {
  std::string absolute;
  std::string relatives;
  std::string overrides;
  std::string output;
  bool log = false;
};

int cmd_optimize(const OptimizeArgs& a, const Common& c, std::ostream& err) {
  PipelineConfig cfg = load_pipeline(c);
  cfg.optimizer.exec = Exec::kParallel;
  const auto absolute = read_poses(fs::path(a.absolute));
  std::vector<RelativePoseEstimate> rel;
  if (!a.relatives.empty()) rel = read_relatives(a.relatives);
  OverrideFile overrides;
  if (!a.overrides.empty()) overrides = read_overrides(a.overrides);
  const PoseGraph graph = build_graph(absolute, rel, overrides, cfg.weights);
  const OptimizeResult res = optimize(graph, cfg.optimizer);
  if (a.log) {
    for (const auto& r : res.log) {
      err << "iter " << r.iteration << " cost " << r.cost << " lambda " << r.lambda << " grad "
          << r.gradient_norm << (r.accepted ? "" : " (rejected)") << "\n";
    }
  }
  err << "cost " << res.initial_cost << " -> " << res.final_cost << " after " << res.iterations
      << " iterations (" << res.termination << ")\n";
  write_poses(fs::path(a.output), res.timed(graph));
  return kExitOk;
}

// ---- evaluate -----------------------------------------------------------------

struct EvaluateArgs {
  std::string estimate;
  std::string reference;
  std::string manifest;
  std::string model;
  std::string extents;
  std::string json;
  bool align = false;
  int rpe_delta = 1;
};

int cmd_evaluate(const EvaluateArgs& a, const Common& c, std::ostream& out) {
  (void)c;
  TrajectoryPair pair{read_poses(fs::path(a.estimate)), read_poses(fs::path(a.reference))};
  pair.validate();
  std::optional<ModelPoints> model;
  std::vector<Vec3> extents;
  if (!a.manifest.empty()) {
    const SequenceManifest m = read_manifest(a.manifest);
    if (!m.model_file.empty()) model = read_model_points(m.resolve(m.model_file));
    if (m.extents.minCoeff() > 0.0) extents.push_back(m.extents);
  }
  if (!a.model.empty()) model = read_model_points(a.model);
  if (!a.extents.empty()) extents = {parse_extents(a.extents)};
  EvaluationOptions opts;
  opts.align = a.align;
  opts.rpe_delta = a.rpe_delta;
  opts.exec = Exec::kParallel;
  const EvaluationReport r = evaluate(pair, model ? &*model : nullptr, extents, opts);
  out << report_table(r);
  if (!a.json.empty()) {
    std::ofstream os(a.json, std::ios::binary);
    if (!os) throw Error(ErrorKind::kIo, "cannot write " + a.json);
    os << report_json(r);
  }
  return kExitOk;
}

// ---- export-overlays --------------------------------------------------------

struct OverlayArgs {
  std::string manifest;
  std::vector<std::string> variants;  // name=path
  std::string output;
  std::string extents;
};

int cmd_overlays(const OverlayArgs& a, std::ostream& err) {
  const SequenceManifest m = read_manifest(a.manifest);
  std::map<std::string, std::vector<TimedPose>> traj;
  for (const auto& v : a.variants) {
    const auto eq = v.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error(ErrorKind::kInvalidArgument, "variant must be name=path, got '" + v + "'");
    }
    const fs::path p = v.substr(eq + 1);
    if (!fs::exists(p)) {
      err << "note: variant '" << v.substr(0, eq) << "' file " << p << " is missing; omitted\n";
      continue;
    }
    traj[v.substr(0, eq)] = read_poses(p);
  }
  const Vec3 extents = a.extents.empty() ? m.extents : parse_extents(a.extents);
  const OverlayBundle b = export_overlays(m, traj, extents, m.intrinsics);
  for (const auto& n : b.notices) err << "note: " << n << "\n";
  write_overlay_bundle(a.output.empty() ? m.dir / "overlays.json" : fs::path(a.output), b);
  return kExitOk;
}

// ---- serve --------------------------------------------------------------------

struct ServeArgs {
  std::string root = ".";
  std::string host = "127.0.0.1";
  int port = 8080;
};

ReviewServer* g_server = nullptr;

int cmd_serve(const ServeArgs& a, std::ostream& out) {
  if (!fs::is_directory(a.root)) {
    throw Error(ErrorKind::kInvalidArgument, "serve root " + a.root + " is not a directory");
  }
  ReviewServer server(a.root);
  const int port = server.bind(a.host, a.port);
  if (port < 0) throw Error(ErrorKind::kIo, "cannot bind " + a.host + ":" + std::to_string(a.port));
  out << "serving " << a.root << " on http://" << a.host << ":" << port << "\n" << std::flush;
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  server.listen();
  g_server = nullptr;
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"posefuse: object pose trajectory fusion toolkit"};
  app.require_subcommand(1);
  Common common;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "pipeline INI file")->check(CLI::ExistingFile);
    sub->add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t s) { common.seed = s; common.seed_set = true; },
        "seed for every stochastic step");
    sub->add_option("--jobs", common.jobs, "sequences processed in parallel")->check(CLI::PositiveNumber);
  };

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "generate a synthetic sequence directory");
  s->add_option("--out", synth.out, "output directory")->required();
  s->add_option("--id", synth.id);
  s->add_option("--frames", synth.frames);
  s->add_option("--rate", synth.rate, "frame rate (Hz)");
  s->add_option("--motion", synth.motion, "static | constant_velocity | smooth");
  s->add_option("--noise-trans-mm", synth.noise_trans_mm);
  s->add_option("--noise-rot-deg", synth.noise_rot_deg);
  s->add_option("--track-noise-px", synth.track_noise_px);
  s->add_option("--corrupt", synth.corrupt, "number of randomly chosen corrupted frames");
  s->add_option("--corrupt-frames", synth.corrupt_frames, "explicit corrupted frames")->delimiter(',');
  s->add_option("--corrupt-rot-deg", synth.corrupt_rot_deg);
  s->add_option("--corrupt-trans-mm", synth.corrupt_trans_mm);
  add_common(s);

  SmoothArgs smooth_args;
  auto* sm = app.add_subcommand("smooth", "EKF + RTS smoothing of an absolute pose file");
  sm->add_option("--input", smooth_args.input)->required()->check(CLI::ExistingFile);
  sm->add_option("--output", smooth_args.output)->required();
  sm->add_option("--filtered-output", smooth_args.filtered_output, "forward-pass poses");
  sm->add_option("--overrides", smooth_args.overrides,
                 "withhold removed frames (with removal=before_smoothing)")
      ->check(CLI::ExistingFile);
  sm->add_option("--rate", smooth_args.rate, "frame rate (Hz), overrides the config");
  add_common(sm);

  RelposeArgs rel_args;
  auto* rp = app.add_subcommand("relpose", "relative poses from tracks and depth");
  rp->add_option("--manifest", rel_args.manifests)->required()->check(CLI::ExistingFile);
  rp->add_option("--output", rel_args.output, "defaults to <sequence>/relatives.csv");
  rp->add_option("--chain-output", rel_args.chain_output, "chained relative-only trajectory");
  rp->add_option("--anchor", rel_args.anchor, "pose file whose first pose anchors the chain");
  add_common(rp);

  OptimizeArgs opt_args;
  auto* op = app.add_subcommand("optimize", "pose-graph fusion of absolute and relative poses");
  op->add_option("--absolute", opt_args.absolute)->required()->check(CLI::ExistingFile);
  op->add_option("--relatives", opt_args.relatives)->check(CLI::ExistingFile);
  op->add_option("--overrides", opt_args.overrides)->check(CLI::ExistingFile);
  op->add_option("--output", opt_args.output)->required();
  op->add_flag("--log", opt_args.log, "print the iteration log");
  add_common(op);

  EvaluateArgs eval_args;
  auto* ev = app.add_subcommand("evaluate", "metrics between an estimate and a reference");
  ev->add_option("--estimate", eval_args.estimate)->required()->check(CLI::ExistingFile);
  ev->add_option("--reference", eval_args.reference)->required()->check(CLI::ExistingFile);
  ev->add_option("--manifest", eval_args.manifest, "model and extents from a sequence")
      ->check(CLI::ExistingFile);
  ev->add_option("--model", eval_args.model)->check(CLI::ExistingFile);
  ev->add_option("--extents", eval_args.extents, "\"x y z\" box side lengths (m)");
  ev->add_option("--json", eval_args.json, "write the report as JSON");
  ev->add_flag("--align", eval_args.align, "SE(3)-align before ATE");
  ev->add_option("--rpe-delta", eval_args.rpe_delta);
  add_common(ev);

  OverlayArgs ov_args;
  auto* ov = app.add_subcommand("export-overlays", "projected box/axes overlays for review");
  ov->add_option("--manifest", ov_args.manifest)->required()->check(CLI::ExistingFile);
  ov->add_option("--variant", ov_args.variants, "name=poses.csv (repeatable)");
  ov->add_option("--output", ov_args.output, "defaults to <sequence>/overlays.json");
  ov->add_option("--extents", ov_args.extents);
  add_common(ov);

  ServeArgs serve_args;
  auto* sv = app.add_subcommand("serve", "HTTP endpoints for the review UI");
  sv->add_option("--root", serve_args.root, "directory of sequence directories");
  sv->add_option("--host", serve_args.host);
  sv->add_option("--port", serve_args.port);
  add_common(sv);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.front()->help());
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "posefuse: " << e.what() << "\n";
    return kExitValidation;
  }

  auto* sub = app.get_subcommands().front();
  try {
    if (sub == s) return cmd_synth(synth, common, out);
    if (sub == sm) return cmd_smooth(smooth_args, common, err);
    if (sub == rp) return cmd_relpose(rel_args, common, err);
    if (sub == op) return cmd_optimize(opt_args, common, err);
    if (sub == ev) return cmd_evaluate(eval_args, common, out);
    if (sub == ov) return cmd_overlays(ov_args, err);
    if (sub == sv) return cmd_serve(serve_args, out);
  } catch (const Error& e) {
    err << "posefuse " << sub->get_name() << ": " << e.what() << "\n";
    return e.is_numerical() ? kExitNumerical : kExitValidation;
  } catch (const std::exception& e) {
    err << "posefuse " << sub->get_name() << ": " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}

}  // namespace posefuse::cli
