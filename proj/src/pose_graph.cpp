#include "posefuse/pose_graph.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "posefuse/error.hpp"

namespace posefuse {

const char* to_string(ReliabilityTier tier) {
  switch (tier) {
    case ReliabilityTier::kDefault: return "default";
    case ReliabilityTier::kDownweighted: return "downweighted";
    case ReliabilityTier::kRemoved: return "removed";
  }
  return "default";
}

ReliabilityTier parse_tier(const std::string& name) {
  if (name == "default") return ReliabilityTier::kDefault;
  if (name == "downweighted") return ReliabilityTier::kDownweighted;
  if (name == "removed") return ReliabilityTier::kRemoved;
  throw Error(ErrorKind::kParse, "unknown reliability tier '" + name + "'");
}

int PoseGraph::node_index(int frame) const {
  auto it = std::lower_bound(frames.begin(), frames.end(), frame);
  if (it == frames.end() || *it != frame) return -1;
  return static_cast<int>(it - frames.begin());
}

double RobustKernel::rho(double squared) const {
  if (type == Type::kNone) return squared;
  const double s = std::sqrt(squared);
  return s <= delta ? squared : 2.0 * delta * s - delta * delta;
}

double RobustKernel::weight(double squared) const {
  if (type == Type::kNone) return 1.0;
  const double s = std::sqrt(squared);
  return s <= delta ? 1.0 : delta / s;
}

Twist residual_absolute(const Pose& node, const Pose& z) { return log_se3(z.inverse() * node); }

Twist residual_relative(const Pose& node_i, const Pose& node_j, const Pose& z) {
  return log_se3(z.inverse() * node_i.inverse() * node_j);
}

Mat6 jacobian_absolute(const Pose& node, const Pose& z) {
  return se3_right_jacobian_inverse(residual_absolute(node, z));
}

void jacobian_relative(const Pose& node_i, const Pose& node_j, const Pose& z, Mat6* d_i,
                       Mat6* d_j) {
  const Mat6 jr_inv = se3_right_jacobian_inverse(residual_relative(node_i, node_j, z));
  // Perturbing T_i on the right moves the residual through Ad_{T_j^-1 T_i}.
  if (d_i) *d_i = -jr_inv * adjoint(node_j.inverse() * node_i);
  if (d_j) *d_j = jr_inv;
}

RelativeEdge to_relative_edge(const RelativePoseEstimate& est, const Pose& pose_i,
                              const EdgeWeights& weights) {
  RelativeEdge e;
  e.frame_i = est.frame_i;
  e.frame_j = est.frame_j;
  e.measurement = pose_i.inverse() * est.pose * pose_i;
  // Left perturbation of M -> right perturbation of z: xi_R = Ad_{(M T_i)^-1} xi_L.
  const Mat6 ad = adjoint(est.pose * pose_i);
  Mat6 info = ad.transpose() * est.information * ad;
  info = 0.5 * (info + info.transpose()).eval();
  if (weights.relative_mode == RelativeInfoMode::kNormalized) {
    const double mean_diag = info.trace() / 6.0;
    if (mean_diag > 0.0) info *= weights.relative_level / mean_diag;
  }
  e.information = info;
  return e;
}

namespace {

struct DisjointSets {
  std::vector<int> parent;
  explicit DisjointSets(size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

double abs_weight(const AbsoluteEdge& e) { return e.information.trace(); }

}  // namespace

void check_anchored(const PoseGraph& graph) {
  const size_t n = graph.frames.size();
  DisjointSets sets(n);
  for (const auto& r : graph.relative) {
    sets.unite(graph.node_index(r.frame_i), graph.node_index(r.frame_j));
  }
  std::vector<bool> anchored(n, false);
  for (const auto& a : graph.absolute) {
    if (a.tier != ReliabilityTier::kRemoved && abs_weight(a) > 0.0) {
      anchored[sets.find(graph.node_index(a.frame))] = true;
    }
  }
  for (size_t i = 0; i < n; ++i) {
    if (!anchored[sets.find(static_cast<int>(i))]) {
      throw Error(ErrorKind::kUnanchoredGraph,
                  "frame " + std::to_string(graph.frames[i]) +
                      " belongs to a component without any absolute edge");
    }
  }
}

PoseGraph build_graph(std::span<const TimedPose> absolute,
                      std::span<const RelativePoseEstimate> relatives,
                      const OverrideFile& overrides, const EdgeWeights& weights) {
  PoseGraph g;
  for (size_t i = 0; i < absolute.size(); ++i) {
    if (i > 0 && absolute[i].frame <= absolute[i - 1].frame) {
      throw Error(ErrorKind::kInvalidInput, "absolute frames must be strictly increasing");
    }
    g.frames.push_back(absolute[i].frame);
    g.initial.push_back(absolute[i].pose);
    AbsoluteEdge e;
    e.frame = absolute[i].frame;
    e.measurement = absolute[i].pose;
    e.information = weights.default_weight * Mat6::Identity();
    g.absolute.push_back(e);
  }

  for (const auto& o : overrides.entries) {
    if (o.end < o.start || g.node_index(o.start) < 0 || g.node_index(o.end) < 0) {
      std::ostringstream os;
      os << "override [" << o.start << ", " << o.end << "] outside the sequence";
      throw Error(ErrorKind::kInvalidInput, os.str());
    }
    if (o.weight && !(*o.weight >= 0.0)) {
      throw Error(ErrorKind::kInvalidInput, "override weight must be non-negative");
    }
    for (auto& e : g.absolute) {
      if (e.frame < o.start || e.frame > o.end) continue;
      e.tier = o.tier;
      double w = 0.0;
      switch (o.tier) {
        case ReliabilityTier::kDefault: w = weights.default_weight; break;
        case ReliabilityTier::kDownweighted: w = weights.downweighted_weight; break;
        case ReliabilityTier::kRemoved: w = 0.0; break;
      }
      if (o.weight && o.tier != ReliabilityTier::kRemoved) w = *o.weight;
      e.information = w * Mat6::Identity();
    }
  }
  for (const auto& est : relatives) {
    const int a = g.node_index(est.frame_i);
    const int b = g.node_index(est.frame_j);
    if (a < 0 || b < 0 || est.frame_i == est.frame_j) {
      std::ostringstream os;
      os << "relative edge " << est.frame_i << "-" << est.frame_j << " outside the sequence";
      throw Error(ErrorKind::kInvalidInput, os.str());
    }
    if (est.frame_i > est.frame_j) {
      throw Error(ErrorKind::kInvalidInput, "relative edges must satisfy frame_i < frame_j");
    }
  }

  // Removed spans: seed nodes by chaining consecutive relatives forward from
  // the last trusted node instead of the unreliable absolute pose.
  std::vector<const RelativePoseEstimate*> step(g.frames.size(), nullptr);
  for (const auto& est : relatives) {
    const int a = g.node_index(est.frame_i);
    if (g.node_index(est.frame_j) == a + 1) step[a] = &est;
  }
  for (size_t k = 1; k < g.absolute.size(); ++k) {
    if (g.absolute[k].tier == ReliabilityTier::kRemoved && step[k - 1]) {
      g.initial[k] = step[k - 1]->pose * g.initial[k - 1];
    }
  }

  // Converted after seeding so removed frames use the chained pose.
  for (const auto& est : relatives) {
    g.relative.push_back(to_relative_edge(est, g.initial[g.node_index(est.frame_i)], weights));
  }

  check_anchored(g);
  return g;
}

PoseGraph build_graph(const SmoothedTrajectory& smoothed,
                      std::span<const RelativePoseEstimate> relatives,
                      const OverrideFile& overrides, const EdgeWeights& weights) {
  const auto poses = smoothed.poses();
  return build_graph(poses, relatives, overrides, weights);
}

std::vector<TimedPose> OptimizeResult::timed(const PoseGraph& g) const {
  std::vector<TimedPose> out;
  out.reserve(poses.size());
  for (size_t i = 0; i < poses.size(); ++i) out.push_back({g.frames[i], poses[i]});
  return out;
}

namespace {

struct EdgeTerm {
  int a = -1;
  int b = -1;  // -1 for absolute edges
  Vec6 r = Vec6::Zero();
  Mat6 ja = Mat6::Zero();
  Mat6 jb = Mat6::Zero();
  double cost = 0.0;
  double weight = 1.0;
};

size_t edge_count(const PoseGraph& g) { return g.absolute.size() + g.relative.size(); }

// Evaluates residuals (and Jacobians when requested) of every edge into its
// own slot; callers reduce in edge order.
void evaluate_edges(const PoseGraph& g, std::span<const Pose> x, const RobustKernel& robust,
                    bool with_jacobians, Exec exec, std::vector<EdgeTerm>& terms) {
  const size_t na = g.absolute.size();
  terms.resize(edge_count(g));
  for_each_index(exec, static_cast<std::ptrdiff_t>(terms.size()), [&](std::ptrdiff_t k) {
    EdgeTerm& t = terms[k];
    const Mat6* info;
    if (static_cast<size_t>(k) < na) {
      const AbsoluteEdge& e = g.absolute[k];
      t.a = g.node_index(e.frame);
      t.b = -1;
      info = &e.information;
      const Twist r = residual_absolute(x[t.a], e.measurement);
      t.r = r.vector();
      if (with_jacobians) t.ja = se3_right_jacobian_inverse(r);
    } else {
      const RelativeEdge& e = g.relative[k - na];
      t.a = g.node_index(e.frame_i);
      t.b = g.node_index(e.frame_j);
      info = &e.information;
      t.r = residual_relative(x[t.a], x[t.b], e.measurement).vector();
      if (with_jacobians) jacobian_relative(x[t.a], x[t.b], e.measurement, &t.ja, &t.jb);
    }
    const double sq = t.r.dot(*info * t.r);
    t.cost = robust.rho(sq);
    t.weight = robust.weight(sq);
  });
}

const Mat6& edge_information(const PoseGraph& g, size_t k) {
  const size_t na = g.absolute.size();
  return k < na ? g.absolute[k].information : g.relative[k - na].information;
}

double sum_cost(const std::vector<EdgeTerm>& terms) {
  double c = 0.0;
  for (const auto& t : terms) c += t.cost;
  return c;
}

void add_block(std::vector<Eigen::Triplet<double>>& trips, int row, int col, const Mat6& m) {
  for (int c = 0; c < 6; ++c) {
    for (int r = 0; r < 6; ++r) {
      trips.emplace_back(6 * row + r, 6 * col + c, m(r, c));
    }
  }
}

}  // namespace

double graph_cost(const PoseGraph& graph, std::span<const Pose> poses,
                  const RobustKernel& robust, Exec exec) {
  std::vector<EdgeTerm> terms;
  evaluate_edges(graph, poses, robust, false, exec, terms);
  return sum_cost(terms);
}

OptimizeResult optimize(const PoseGraph& graph, const OptimizerOptions& opts) {
  check_anchored(graph);
  const int n = static_cast<int>(graph.frames.size());
  const int dim = 6 * n;

  OptimizeResult res;
  res.poses = graph.initial;
  std::vector<EdgeTerm> terms;
  evaluate_edges(graph, res.poses, opts.robust, true, opts.exec, terms);
  double cost = sum_cost(terms);
  res.initial_cost = cost;
  if (!std::isfinite(cost)) {
    throw Error(ErrorKind::kNumericalFailure, "initial graph cost is not finite");
  }

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
  bool pattern_ready = false;
  double lambda = opts.lambda_init;
  res.termination = "max_iters";

  std::vector<Eigen::Triplet<double>> trips;
  for (int iter = 1; iter <= opts.max_iters; ++iter) {
    // Normal equations at the current iterate, assembled in edge order.
    trips.clear();
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(dim);
    for (size_t k = 0; k < terms.size(); ++k) {
      const EdgeTerm& t = terms[k];
      const Mat6 wi = t.weight * edge_information(graph, k);
      const Mat6 ja_w = t.ja.transpose() * wi;
      add_block(trips, t.a, t.a, ja_w * t.ja);
      grad.segment<6>(6 * t.a) += ja_w * t.r;
      if (t.b >= 0) {
        const Mat6 jb_w = t.jb.transpose() * wi;
        add_block(trips, t.b, t.b, jb_w * t.jb);
        add_block(trips, t.a, t.b, ja_w * t.jb);
        add_block(trips, t.b, t.a, jb_w * t.ja);
        grad.segment<6>(6 * t.b) += jb_w * t.r;
      }
    }
    Eigen::SparseMatrix<double> hessian(dim, dim);
    hessian.setFromTriplets(trips.begin(), trips.end());
    const double gnorm = grad.lpNorm<Eigen::Infinity>();
    if (gnorm < opts.abs_tol) {
      res.termination = "gradient";
      break;
    }
    const Eigen::VectorXd diag = hessian.diagonal();

    bool accepted = false;
    bool solved_any = false;
    std::vector<Pose> candidate(res.poses.size());
    std::vector<EdgeTerm> candidate_terms;
    double new_cost = cost;
    while (lambda <= opts.lambda_max) {
      Eigen::SparseMatrix<double> damped = hessian;
      for (int d = 0; d < dim; ++d) {
        damped.coeffRef(d, d) += lambda * std::max(diag[d], 1e-12);
      }
      if (!pattern_ready) {
        solver.analyzePattern(damped);
        pattern_ready = true;
      }
      solver.factorize(damped);
      if (solver.info() != Eigen::Success) {
        lambda *= 10.0;
        continue;
      }
      const Eigen::VectorXd delta = solver.solve(-grad);
      if (solver.info() != Eigen::Success || !delta.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      solved_any = true;
      for (int i = 0; i < n; ++i) {
        candidate[i] = res.poses[i] * exp_se3(Twist::from_vector(delta.segment<6>(6 * i)));
      }
      evaluate_edges(graph, candidate, opts.robust, true, opts.exec, candidate_terms);
      new_cost = sum_cost(candidate_terms);
      if (new_cost < cost) {
        accepted = true;
        break;
      }
      res.log.push_back({iter, cost, lambda, gnorm, false});
      lambda *= 10.0;
    }

    if (!accepted) {
      if (!solved_any) {
        res.final_cost = cost;
        res.iterations = iter;
        throw Error(ErrorKind::kOptimizationFailure,
                    "normal equations unsolvable at maximum damping (iteration " +
                        std::to_string(iter) + ", cost " + std::to_string(cost) + ")");
      }
      res.termination = "no_decrease";
      res.iterations = iter;
      break;
    }

    const double decrease = cost - new_cost;
    res.poses.swap(candidate);
    terms.swap(candidate_terms);
    const double old_cost = cost;
    cost = new_cost;
    lambda = std::max(lambda / 10.0, opts.lambda_min);
    res.log.push_back({iter, cost, lambda, gnorm, true});
    res.iterations = iter;
    if (decrease <= opts.rel_tol * old_cost) {
      res.termination = "relative_decrease";
      break;
    }
  }
  res.final_cost = cost;
  return res;
}

}  // namespace posefuse
