#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "posefuse/se3.hpp"

namespace posefuse {

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  /// Throws InvalidArgument unless fx, fy > 0 and the principal point lies
  /// inside the image.
  void validate() const;

  /// depth * K^-1 * (u, v, 1)
  Vec3 backproject(double u, double v, double depth) const {
    return {depth * (u - cx) / fx, depth * (v - cy) / fy, depth};
  }
  Eigen::Vector2d project(const Vec3& p) const {
    return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy};
  }
  bool contains(double u, double v) const {
    return u >= 0.0 && v >= 0.0 && u <= width - 1.0 && v <= height - 1.0;
  }
};

/// Metric depth image; 0 marks an invalid pixel.
struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<double> meters;

  DepthImage() = default;
  DepthImage(int w, int h) : width(w), height(h), meters(static_cast<size_t>(w) * h, 0.0) {}

  double at(int x, int y) const { return meters[static_cast<size_t>(y) * width + x]; }
  double& at(int x, int y) { return meters[static_cast<size_t>(y) * width + x]; }
  bool valid(int x, int y) const { return at(x, y) > 0.0; }
};

/// Binary object mask; nonzero marks the object.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  Mask() = default;
  Mask(int w, int h) : width(w), height(h), data(static_cast<size_t>(w) * h, 0) {}

  bool at(int x, int y) const { return data[static_cast<size_t>(y) * width + x] != 0; }
  std::uint8_t& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
};

}  // namespace posefuse
