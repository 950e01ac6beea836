#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "splatprune/camera_rig.hpp"
#include "splatprune/gaussian_store.hpp"

namespace splatprune {

/// Points closer to the image plane than this are treated as behind it.
inline constexpr double kMinDepth = 1e-8;

struct ProjectedPoint {
  double u = 0.0;
  double v = 0.0;
  int px = -1;
  int py = -1;
  double depth = 0.0;
  bool valid = false;
};

/// Per-view constants for projecting many points: x_cam = R_w2c x + t_w2c,
/// (u, v) = first two components of K x_cam / depth.
class ViewProjector {
 public:
  explicit ViewProjector(const CameraView& view)
      : w2c_(world_to_camera(view)),
        fx_(view.fx),
        fy_(view.fy),
        cx_(view.cx),
        cy_(view.cy),
        width_(view.width),
        height_(view.height) {}

  ProjectedPoint operator()(double x, double y, double z) const {
    const Eigen::Vector3d cam = w2c_.R * Eigen::Vector3d(x, y, z) + w2c_.t;
    ProjectedPoint p;
    p.depth = cam.z();
    if (!(p.depth > kMinDepth)) return p;
    p.u = fx_ * cam.x() / p.depth + cx_;
    p.v = fy_ * cam.y() / p.depth + cy_;
    if (p.u >= 0.0 && p.u < width_ && p.v >= 0.0 && p.v < height_) {
      p.px = static_cast<int>(std::floor(p.u));
      p.py = static_cast<int>(std::floor(p.v));
      p.valid = true;
    }
    return p;
  }

  ProjectedPoint operator()(const Eigen::Vector3d& x) const { return (*this)(x.x(), x.y(), x.z()); }

  ProjectedPoint operator()(const GaussianCloud& cloud, std::size_t i) const {
    return (*this)(cloud.positions[3 * i], cloud.positions[3 * i + 1], cloud.positions[3 * i + 2]);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

 private:
  RigidTransform w2c_;
  double fx_, fy_, cx_, cy_;
  int width_, height_;
};

inline ProjectedPoint project_point(const Eigen::Vector3d& x, const CameraView& view) { return ViewProjector(view)(x); }

inline std::vector<ProjectedPoint> project_cloud(const GaussianCloud& cloud, const CameraView& view) {
  const ViewProjector project(view);
  std::vector<ProjectedPoint> out(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) out[i] = project(cloud, i);
  return out;
}

}  // namespace splatprune
