#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "posefuse/dataio.hpp"
#include "posefuse/error.hpp"

namespace posefuse {

double model_diameter_brute_force(std::span<const Vec3> points) {
  double best = 0.0;
  for (size_t i = 0; i < points.size(); ++i) {
    for (size_t j = i + 1; j < points.size(); ++j) {
      best = std::max(best, (points[i] - points[j]).squaredNorm());
    }
  }
  return std::sqrt(best);
}

double model_diameter(std::span<const Vec3> points, size_t brute_force_limit) {
  if (points.size() <= brute_force_limit) return model_diameter_brute_force(points);

  Vec3 centroid = Vec3::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());
  std::vector<double> radius(points.size());
  for (size_t i = 0; i < points.size(); ++i) radius[i] = (points[i] - centroid).norm();
  std::vector<size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return radius[a] > radius[b] || (radius[a] == radius[b] && a < b);
  });

  // Lower bound from a couple of farthest-point sweeps.
  size_t a = order[0];
  double best = 0.0;
  for (int sweep = 0; sweep < 3; ++sweep) {
    size_t far = a;
    double d = 0.0;
    for (size_t i = 0; i < points.size(); ++i) {
      const double di = (points[i] - points[a]).norm();
      if (di > d) {
        d = di;
        far = i;
      }
    }
    best = std::max(best, d);
    a = far;
  }

  // |p - q| <= r_p + r_q, so pairs whose radii cannot beat `best` are skipped.
  for (size_t i = 0; i < order.size(); ++i) {
    const double ri = radius[order[i]];
    if (ri + radius[order[0]] <= best) break;
    for (size_t j = i + 1; j < order.size(); ++j) {
      if (ri + radius[order[j]] <= best) break;
      best = std::max(best, (points[order[i]] - points[order[j]]).norm());
    }
  }
  return best;
}

ModelPoints read_model_points(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  ModelPoints m;
  std::string line;
  std::getline(is, line);
  const bool ply = line.rfind("ply", 0) == 0;
  if (ply) {
    size_t vertices = 0;
    std::vector<std::string> props;
    bool in_vertex = false;
    while (std::getline(is, line)) {
      std::istringstream ss(line);
      std::string kw;
      ss >> kw;
      if (kw == "format") {
        std::string fmt;
        ss >> fmt;
        if (fmt != "ascii") throw Error(ErrorKind::kFormat, path.string() + ": only ASCII PLY");
      } else if (kw == "element") {
        std::string name;
        ss >> name;
        in_vertex = name == "vertex";
        if (in_vertex) ss >> vertices;
      } else if (kw == "property" && in_vertex) {
        std::string type, name;
        ss >> type >> name;
        props.push_back(name);
      } else if (kw == "end_header") {
        break;
      }
    }
    const auto find = [&](const char* n) {
      auto it = std::find(props.begin(), props.end(), n);
      if (it == props.end()) throw Error(ErrorKind::kFormat, path.string() + ": missing vertex " + n);
      return static_cast<size_t>(it - props.begin());
    };
    const size_t ix = find("x"), iy = find("y"), iz = find("z");
    for (size_t v = 0; v < vertices; ++v) {
      if (!std::getline(is, line)) throw Error(ErrorKind::kFormat, path.string() + ": truncated");
      std::istringstream ss(line);
      std::vector<double> vals(props.size());
      for (auto& val : vals) {
        if (!(ss >> val)) throw Error(ErrorKind::kFormat, path.string() + ": bad vertex line");
      }
      m.points.emplace_back(vals[ix], vals[iy], vals[iz]);
    }
  } else {
    size_t lineno = 0;
    do {
      ++lineno;
      std::istringstream ss(line);
      double x, y, z;
      if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
      if (!(ss >> x >> y >> z)) {
        throw Error(ErrorKind::kParse, path.string() + ":" + std::to_string(lineno) + ": expected x y z");
      }
      m.points.emplace_back(x, y, z);
    } while (std::getline(is, line));
  }
  if (m.points.empty()) throw Error(ErrorKind::kInvalidModel, path.string() + ": no points");
  m.diameter = model_diameter(m.points);
  if (!(m.diameter > 0.0)) {
    throw Error(ErrorKind::kInvalidModel, path.string() + ": all points coincide");
  }
  return m;
}

void write_model_ply(const fs::path& path, std::span<const Vec3> points) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  os << "ply\nformat ascii 1.0\nelement vertex " << points.size()
     << "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
  char buf[96];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", p.x(), p.y(), p.z());
    os << buf;
  }
}

// ---- manifest ----------------------------------------------------------------

namespace {

std::string format_pattern(const std::string& pattern, int frame) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), pattern.c_str(), frame);
  return buf;
}

}  // namespace

fs::path SequenceManifest::depth_path(int frame) const {
  return resolve(format_pattern(depth_pattern, frame));
}
fs::path SequenceManifest::mask_path(int frame) const {
  return resolve(format_pattern(mask_pattern, frame));
}
fs::path SequenceManifest::frame_path(int frame) const {
  return resolve(format_pattern(frame_pattern, frame));
}

std::vector<int> SequenceManifest::frames() const {
  std::vector<int> f(frame_count);
  std::iota(f.begin(), f.end(), first_frame);
  return f;
}

SequenceManifest read_manifest(const fs::path& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorKind::kParse, e.what());
  }
  SequenceManifest m;
  m.dir = path.parent_path();
  try {
    m.id = tree.get<std::string>("sequence.id");
    m.frame_count = tree.get<int>("sequence.frames");
    m.first_frame = tree.get<int>("sequence.first_frame", 0);
    m.rate_hz = tree.get<double>("sequence.rate_hz");
    m.intrinsics.fx = tree.get<double>("camera.fx");
    m.intrinsics.fy = tree.get<double>("camera.fy");
    m.intrinsics.cx = tree.get<double>("camera.cx");
    m.intrinsics.cy = tree.get<double>("camera.cy");
    m.intrinsics.width = tree.get<int>("camera.width");
    m.intrinsics.height = tree.get<int>("camera.height");
    std::istringstream ext(tree.get<std::string>("object.extents", "0 0 0"));
    ext >> m.extents.x() >> m.extents.y() >> m.extents.z();
    m.depth_pattern = tree.get<std::string>("paths.depth", "");
    m.mask_pattern = tree.get<std::string>("paths.mask", "");
    m.frame_pattern = tree.get<std::string>("paths.frames", "");
    m.model_file = tree.get<std::string>("paths.model", "");
    m.raw_poses_file = tree.get<std::string>("paths.raw_poses", "");
    m.gt_poses_file = tree.get<std::string>("paths.gt_poses", "");
    m.tracks_file = tree.get<std::string>("paths.tracks", "");
  } catch (const pt::ptree_error& e) {
    throw Error(ErrorKind::kParse, path.string() + ": " + e.what());
  }
  if (!(m.rate_hz > 0.0)) throw Error(ErrorKind::kInvalidInput, "manifest frame rate must be > 0");
  if (m.frame_count < 1) throw Error(ErrorKind::kInvalidInput, "manifest frame count must be >= 1");
  m.intrinsics.validate();
  for (const std::string* f : {&m.model_file, &m.raw_poses_file, &m.gt_poses_file, &m.tracks_file}) {
    if (!f->empty() && !fs::exists(m.resolve(*f))) {
      throw Error(ErrorKind::kInvalidInput, "manifest references missing file " + *f);
    }
  }
  return m;
}

void write_manifest(const fs::path& path, const SequenceManifest& m) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  char buf[128];
  const auto g = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  os << "[sequence]\nid=" << m.id << "\nframes=" << m.frame_count
     << "\nfirst_frame=" << m.first_frame << "\nrate_hz=" << g(m.rate_hz) << "\n\n";
  os << "[camera]\nfx=" << g(m.intrinsics.fx) << "\nfy=" << g(m.intrinsics.fy)
     << "\ncx=" << g(m.intrinsics.cx) << "\ncy=" << g(m.intrinsics.cy)
     << "\nwidth=" << m.intrinsics.width << "\nheight=" << m.intrinsics.height << "\n\n";
  os << "[object]\nextents=" << g(m.extents.x()) << ' ' << g(m.extents.y()) << ' '
     << g(m.extents.z()) << "\n\n";
  os << "[paths]\n";
  const std::pair<const char*, const std::string*> entries[] = {
      {"depth", &m.depth_pattern},   {"mask", &m.mask_pattern},
      {"frames", &m.frame_pattern},  {"model", &m.model_file},
      {"raw_poses", &m.raw_poses_file}, {"gt_poses", &m.gt_poses_file},
      {"tracks", &m.tracks_file}};
  for (const auto& [key, value] : entries) {
    if (!value->empty()) os << key << '=' << *value << '\n';
  }
}

}  // namespace posefuse
