#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "posefuse/dataio.hpp"
#include "posefuse/error.hpp"

namespace posefuse {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void parse_fail(const std::string& source, size_t line, const std::string& what) {
  throw Error(ErrorKind::kParse, source + ":" + std::to_string(line) + ": " + what);
}

double to_double(const std::string& s, const std::string& source, size_t line) {
  const std::string t = trim(s);
  if (t.empty()) parse_fail(source, line, "empty field");
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || !std::isfinite(v)) {
    parse_fail(source, line, "not a finite number: '" + t + "'");
  }
  return v;
}

int to_int(const std::string& s, const std::string& source, size_t line) {
  const std::string t = trim(s);
  char* end = nullptr;
  const long v = std::strtol(t.c_str(), &end, 10);
  if (t.empty() || end != t.c_str() + t.size()) {
    parse_fail(source, line, "not an integer: '" + t + "'");
  }
  return static_cast<int>(v);
}

bool skip_line(const std::string& line) {
  const std::string t = trim(line);
  return t.empty() || t[0] == '#';
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  return is;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  return os;
}

Pose read_pose_fields(const std::vector<std::string>& f, size_t offset, const std::string& source,
                      size_t line, std::vector<std::string>* warnings) {
  const Vec3 t(to_double(f[offset], source, line), to_double(f[offset + 1], source, line),
               to_double(f[offset + 2], source, line));
  const Eigen::Quaterniond q(
      to_double(f[offset + 3], source, line), to_double(f[offset + 4], source, line),
      to_double(f[offset + 5], source, line), to_double(f[offset + 6], source, line));
  const double norm_err = std::abs(q.norm() - 1.0);
  if (norm_err > 1e-3) {
    parse_fail(source, line, "quaternion norm " + num(q.norm()) + " is not unit");
  }
  if (norm_err > 1e-6 && warnings) {
    warnings->push_back(source + ":" + std::to_string(line) + ": quaternion renormalized");
  }
  Eigen::Quaterniond qn = q;
  if (norm_err > 1e-6) qn.normalize();
  return Pose(Rotation(qn), t);
}

}  // namespace

std::string format_pose_line(const TimedPose& p) {
  const auto& q = p.pose.rotation();
  const auto& t = p.pose.translation();
  std::string s = std::to_string(p.frame);
  for (double v : {t.x(), t.y(), t.z(), q.w(), q.x(), q.y(), q.z()}) s += "," + num(v);
  return s;
}

void write_poses(std::ostream& os, std::span<const TimedPose> poses) {
  os << "# frame,tx,ty,tz,qw,qx,qy,qz (meters; quaternion w-first)\n";
  for (const auto& p : poses) os << format_pose_line(p) << '\n';
}

void write_poses(const fs::path& path, std::span<const TimedPose> poses) {
  auto os = open_out(path);
  write_poses(os, poses);
}

std::vector<TimedPose> read_poses(std::istream& is, const std::string& source,
                                  std::vector<std::string>* warnings) {
  std::vector<TimedPose> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (skip_line(line)) continue;
    const auto f = split_csv(line);
    if (f.size() != 8) parse_fail(source, lineno, "expected 8 fields, got " + std::to_string(f.size()));
    TimedPose tp;
    tp.frame = to_int(f[0], source, lineno);
    tp.pose = read_pose_fields(f, 1, source, lineno, warnings);
    if (!out.empty() && tp.frame <= out.back().frame) {
      throw Error(ErrorKind::kInvalidInput, source + ":" + std::to_string(lineno) +
                                                ": frame indices must be strictly increasing");
    }
    out.push_back(tp);
  }
  return out;
}

std::vector<TimedPose> read_poses(const fs::path& path, std::vector<std::string>* warnings) {
  auto is = open_in(path);
  return read_poses(is, path.string(), warnings);
}

TrackTable read_tracks(const fs::path& path) {
  auto is = open_in(path);
  const std::string source = path.string();
  TrackTable table;
  std::string line;
  size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (skip_line(line) || trim(line).rfind("query", 0) == 0) continue;
    const auto f = split_csv(line);
    if (f.size() != 5) parse_fail(source, lineno, "expected query,frame,u,v,visible");
    const int q = to_int(f[0], source, lineno);
    if (q < 0) parse_fail(source, lineno, "negative query id");
    if (static_cast<size_t>(q) >= table.tracks.size()) table.tracks.resize(q + 1);
    TrackObservation o;
    o.frame = to_int(f[1], source, lineno);
    o.u = to_double(f[2], source, lineno);
    o.v = to_double(f[3], source, lineno);
    o.visible = to_int(f[4], source, lineno) != 0;
    auto& t = table.tracks[q];
    if (!t.empty() && o.frame <= t.back().frame) {
      parse_fail(source, lineno, "track frames must increase per query");
    }
    t.push_back(o);
  }
  return table;
}

void write_tracks(const fs::path& path, const TrackTable& tracks) {
  auto os = open_out(path);
  os << "query,frame,u,v,visible\n";
  for (size_t q = 0; q < tracks.tracks.size(); ++q) {
    for (const auto& o : tracks.tracks[q]) {
      os << q << ',' << o.frame << ',' << num(o.u) << ',' << num(o.v) << ','
         << (o.visible ? 1 : 0) << '\n';
    }
  }
}

std::vector<RelativePoseEstimate> read_relatives(const fs::path& path) {
  auto is = open_in(path);
  const std::string source = path.string();
  std::vector<RelativePoseEstimate> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (skip_line(line)) continue;
    const auto f = split_csv(line);
    if (f.size() != 10 + 36) parse_fail(source, lineno, "expected 46 fields");
    RelativePoseEstimate e;
    e.frame_i = to_int(f[0], source, lineno);
    e.frame_j = to_int(f[1], source, lineno);
    e.pose = read_pose_fields(f, 2, source, lineno, nullptr);
    const int inliers = to_int(f[9], source, lineno);
    for (int k = 0; k < inliers; ++k) e.inliers.push_back(k);
    for (int k = 0; k < 36; ++k) e.information(k / 6, k % 6) = to_double(f[10 + k], source, lineno);
    out.push_back(std::move(e));
  }
  return out;
}

void write_relatives(const fs::path& path, std::span<const RelativePoseEstimate> rel) {
  auto os = open_out(path);
  os << "# frame_i,frame_j,tx,ty,tz,qw,qx,qy,qz,inliers,information(6x6 row-major; "
        "camera-frame motion x_j = M x_i)\n";
  for (const auto& e : rel) {
    const TimedPose tp{e.frame_i, e.pose};
    std::string line = format_pose_line(tp);
    line.insert(line.find(','), "," + std::to_string(e.frame_j));
    os << line << ',' << e.inliers.size();
    for (int k = 0; k < 36; ++k) os << ',' << num(e.information(k / 6, k % 6));
    os << '\n';
  }
}

OverrideFile parse_overrides(std::istream& is, const std::string& source) {
  OverrideFile out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (skip_line(line)) continue;
    const auto f = split_csv(trim(line));
    OverrideEntry e;
    size_t tier_at = 0;
    if (!f.empty() && trim(f[0]) == "range" && (f.size() == 4 || f.size() == 5)) {
      e.kind = OverrideEntry::Kind::kRange;
      e.start = to_int(f[1], source, lineno);
      e.end = to_int(f[2], source, lineno);
      tier_at = 3;
    } else if (!f.empty() && trim(f[0]) == "edge" && (f.size() == 3 || f.size() == 4)) {
      e.kind = OverrideEntry::Kind::kEdge;
      e.start = e.end = to_int(f[1], source, lineno);
      tier_at = 2;
    } else {
      parse_fail(source, lineno, "expected range,<start>,<end>,<tier>[,<weight>] or "
                                 "edge,<frame>,<tier>[,<weight>]");
    }
    if (e.end < e.start) parse_fail(source, lineno, "range end before start");
    try {
      e.tier = parse_tier(trim(f[tier_at]));
    } catch (const Error& err) {
      parse_fail(source, lineno, err.what());
    }
    if (f.size() > tier_at + 1) {
      const double w = to_double(f[tier_at + 1], source, lineno);
      if (w < 0.0) parse_fail(source, lineno, "negative weight");
      e.weight = w;
    }
    out.entries.push_back(e);
  }
  return out;
}

OverrideFile read_overrides(const fs::path& path) {
  auto is = open_in(path);
  return parse_overrides(is, path.string());
}

std::string format_overrides(const OverrideFile& o) {
  std::string s = "# posefuse-overrides v1\n";
  for (const auto& e : o.entries) {
    if (e.kind == OverrideEntry::Kind::kRange) {
      s += "range," + std::to_string(e.start) + "," + std::to_string(e.end);
    } else {
      s += "edge," + std::to_string(e.start);
    }
    s += std::string(",") + to_string(e.tier);
    if (e.weight) s += "," + num(*e.weight);
    s += "\n";
  }
  return s;
}

void write_overrides(const fs::path& path, const OverrideFile& o) {
  auto os = open_out(path);
  os << format_overrides(o);
}

}  // namespace posefuse
