#pragma once

#include <stdexcept>

#include <Eigen/Core>

namespace semslam {

/// Pinhole intrinsics, no distortion.
struct Camera {
  double fx = 500.0;
  double fy = 500.0;
  double cx = 320.0;
  double cy = 240.0;
  int width = 640;
  int height = 480;

  Eigen::Matrix3d K() const {
    Eigen::Matrix3d k;
    k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
  }

  bool is_valid() const {
    return fx > 0.0 && fy > 0.0 && width > 0 && height > 0 && cx >= 0.0 && cx <= width && cy >= 0.0 &&
           cy <= height;
  }

  bool in_image(const Eigen::Vector2d& px) const {
    return px.x() >= 0.0 && px.x() <= width && px.y() >= 0.0 && px.y() <= height;
  }
};

inline Camera make_camera(double fx, double fy, double cx, double cy, int width, int height) {
  Camera cam{fx, fy, cx, cy, width, height};
  if (!cam.is_valid()) throw std::invalid_argument("camera: invalid intrinsics");
  return cam;
}

}  // namespace semslam
