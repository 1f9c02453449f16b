#include "posefuse/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "posefuse/error.hpp"

namespace posefuse {

namespace {

[[noreturn]] void bad(const std::string& source, const std::string& key, const std::string& what) {
  throw Error(ErrorKind::kInvalidInput, source + ": " + key + ": " + what);
}

double as_double(const std::string& s, const std::string& source, const std::string& key) {
  size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    bad(source, key, "not a number: '" + s + "'");
  }
  if (used != s.size() || !std::isfinite(v)) bad(source, key, "not a finite number: '" + s + "'");
  return v;
}

int as_int(const std::string& s, const std::string& source, const std::string& key) {
  const double v = as_double(s, source, key);
  if (v != std::floor(v)) bad(source, key, "expected an integer");
  return static_cast<int>(v);
}

using Setter = std::function<void(PipelineConfig&, const std::string&, const std::string&)>;

std::map<std::string, Setter> setters(const std::string& src) {
  constexpr double deg = std::numbers::pi / 180.0;
  std::map<std::string, Setter> m;
#define POSEFUSE_DOUBLE(KEY, EXPR) \
  m[KEY] = [src](PipelineConfig& c, const std::string& k, const std::string& v) { EXPR = as_double(v, src, k); }
  POSEFUSE_DOUBLE("noise.sigma_meas_trans", c.noise.sigma_meas_trans);
  POSEFUSE_DOUBLE("noise.q_accel", c.noise.q_accel);
  POSEFUSE_DOUBLE("noise.q_alpha", c.noise.q_alpha);
  POSEFUSE_DOUBLE("noise.init_sigma_vel", c.noise.init_sigma_vel);
  POSEFUSE_DOUBLE("noise.init_sigma_angvel", c.noise.init_sigma_angvel);
  POSEFUSE_DOUBLE("ransac.inlier_threshold_m", c.relpose.ransac.inlier_threshold_m);
  POSEFUSE_DOUBLE("relpose.sigma_point_m", c.relpose.sigma_point_m);
  POSEFUSE_DOUBLE("weights.default", c.weights.default_weight);
  POSEFUSE_DOUBLE("weights.downweighted", c.weights.downweighted_weight);
  POSEFUSE_DOUBLE("weights.relative_level", c.weights.relative_level);
  POSEFUSE_DOUBLE("optimizer.lambda_init", c.optimizer.lambda_init);
  POSEFUSE_DOUBLE("optimizer.lambda_min", c.optimizer.lambda_min);
  POSEFUSE_DOUBLE("optimizer.lambda_max", c.optimizer.lambda_max);
  POSEFUSE_DOUBLE("optimizer.abs_tol", c.optimizer.abs_tol);
  POSEFUSE_DOUBLE("optimizer.rel_tol", c.optimizer.rel_tol);
  POSEFUSE_DOUBLE("optimizer.huber_delta", c.optimizer.robust.delta);
#undef POSEFUSE_DOUBLE
  m["noise.sigma_meas_rot_deg"] = [src, deg](PipelineConfig& c, const std::string& k,
                                             const std::string& v) {
    c.noise.sigma_meas_rot = as_double(v, src, k) * deg;
  };
  m["noise.rate_hz"] = [src](PipelineConfig& c, const std::string& k, const std::string& v) {
    const double hz = as_double(v, src, k);
    if (!(hz > 0.0)) bad(src, k, "must be > 0");
    c.noise.dt = 1.0 / hz;
  };
  m["ransac.iters"] = [src](PipelineConfig& c, const std::string& k, const std::string& v) {
    c.relpose.ransac.iters = as_int(v, src, k);
  };
  m["ransac.seed"] = [src](PipelineConfig& c, const std::string& k, const std::string& v) {
    const double s = as_double(v, src, k);
    if (s < 0.0 || s != std::floor(s)) bad(src, k, "expected a non-negative integer");
    c.relpose.ransac.seed = std::stoull(v);
  };
  m["relpose.strides"] = [src](PipelineConfig& c, const std::string& k, const std::string& v) {
    std::istringstream ss(v);
    std::vector<int> strides;
    std::string tok;
    while (ss >> tok) strides.push_back(as_int(tok, src, k));
    c.relpose.strides = strides;
  };
  m["weights.relative_mode"] = [src](PipelineConfig& c, const std::string& k, const std::string& v) {
    if (v == "raw") {
      c.weights.relative_mode = RelativeInfoMode::kRaw;
    } else if (v == "normalized") {
      c.weights.relative_mode = RelativeInfoMode::kNormalized;
    } else {
      bad(src, k, "expected raw or normalized");
    }
  };
  m["optimizer.max_iters"] = [src](PipelineConfig& c, const std::string& k, const std::string& v) {
    c.optimizer.max_iters = as_int(v, src, k);
  };
  m["optimizer.robust"] = [src](PipelineConfig& c, const std::string& k, const std::string& v) {
    if (v == "none") {
      c.optimizer.robust.type = RobustKernel::Type::kNone;
    } else if (v == "huber") {
      c.optimizer.robust.type = RobustKernel::Type::kHuber;
    } else {
      bad(src, k, "expected none or huber");
    }
  };
  m["pipeline.removal"] = [src](PipelineConfig& c, const std::string& k, const std::string& v) {
    if (v == "after_smoothing") {
      c.removal = RemovalOrder::kAfterSmoothing;
    } else if (v == "before_smoothing") {
      c.removal = RemovalOrder::kBeforeSmoothing;
    } else {
      bad(src, k, "expected after_smoothing or before_smoothing");
    }
  };
  return m;
}

}  // namespace

void PipelineConfig::validate() const {
  noise.validate();
  const auto fail = [](const std::string& what) { throw Error(ErrorKind::kInvalidInput, what); };
  if (relpose.ransac.iters < 1) fail("ransac.iters must be >= 1");
  if (!(relpose.ransac.inlier_threshold_m > 0.0)) fail("ransac.inlier_threshold_m must be > 0");
  if (!(relpose.sigma_point_m > 0.0)) fail("relpose.sigma_point_m must be > 0");
  for (int s : relpose.strides) {
    if (s < 1) fail("relpose.strides must be >= 1");
  }
  if (!(weights.default_weight > 0.0) || !(weights.downweighted_weight > 0.0) ||
      !(weights.relative_level > 0.0)) {
    fail("weights must be > 0");
  }
  if (optimizer.max_iters < 0) fail("optimizer.max_iters must be >= 0");
  if (!(optimizer.lambda_min > 0.0) || !(optimizer.lambda_max >= optimizer.lambda_min) ||
      optimizer.lambda_init < optimizer.lambda_min || optimizer.lambda_init > optimizer.lambda_max) {
    fail("optimizer lambdas must satisfy 0 < lambda_min <= lambda_init <= lambda_max");
  }
  if (optimizer.abs_tol < 0.0 || optimizer.rel_tol < 0.0) fail("optimizer tolerances must be >= 0");
  if (!(optimizer.robust.delta > 0.0)) fail("optimizer.huber_delta must be > 0");
}

PipelineConfig apply_config(const PipelineConfig& base, const std::string& text,
                            const std::string& source) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::ini_parser::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorKind::kParse, source + ": " + e.message() + " (line " +
                                       std::to_string(e.line()) + ")");
  }
  const auto table = setters(source);
  PipelineConfig cfg = base;
  for (const auto& [section, keys] : tree) {
    if (keys.empty() && !keys.data().empty()) bad(source, section, "keys must sit inside a section");
    for (const auto& [key, value] : keys) {
      const std::string full = section + "." + key;
      auto it = table.find(full);
      if (it == table.end()) bad(source, full, "unknown key");
      it->second(cfg, full, value.get_value<std::string>());
    }
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const PipelineConfig& base, const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return apply_config(base, ss.str(), path.string());
}

}  // namespace posefuse
