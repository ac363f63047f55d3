#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace scenemap {

constexpr float kInvalidDepth = std::numeric_limits<float>::quiet_NaN();

struct Intrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  // Throws ConfigError on non-positive focal lengths or a principal point
  // outside the image.
  void validate() const;
};

/// Rigid camera pose in camera-from-world convention: X_cam = R * X_world + t.
/// The camera center in world coordinates is -R^T t.
class Pose {
 public:
  Pose() : rotation_(Eigen::Matrix3d::Identity()), translation_(Eigen::Vector3d::Zero()) {}
  Pose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
      : rotation_(rotation), translation_(translation) {}

  static Pose identity() { return Pose(); }

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }

  Eigen::Vector3d apply(const Eigen::Vector3d& world_point) const {
    return rotation_ * world_point + translation_;
  }

  Eigen::Vector3d camera_center() const { return -(rotation_.transpose() * translation_); }

  // max |R^T R - I|
  double orthonormality_error() const;

  // Replaces R by the nearest rotation (polar decomposition).
  void reorthonormalize();

  bool is_identity(double tol = 1e-12) const {
    return (rotation_ - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= tol &&
           translation_.cwiseAbs().maxCoeff() <= tol;
  }

 private:
  Eigen::Matrix3d rotation_;
  Eigen::Vector3d translation_;
};

Eigen::Matrix4d to_homogeneous(const Pose& pose);
Pose from_homogeneous(const Eigen::Matrix4d& mat);

/// Homogeneous product a*b, re-orthonormalized when rotation drift exceeds 1e-9.
Pose compose(const Pose& a, const Pose& b);

/// [R^T | -R^T t]
Pose invert(const Pose& pose);

/// Per-pixel depth in meters; non-finite marks invalid pixels.
class DepthMap {
 public:
  DepthMap() = default;
  DepthMap(int width, int height, float fill = kInvalidDepth)
      : width_(width), height_(height), values_(static_cast<size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return values_.empty(); }

  float at(int x, int y) const { return values_[static_cast<size_t>(y) * width_ + x]; }
  float& at(int x, int y) { return values_[static_cast<size_t>(y) * width_ + x]; }
  bool valid(int x, int y) const { return std::isfinite(at(x, y)); }

  const std::vector<float>& values() const { return values_; }
  std::vector<float>& values() { return values_; }

  // Throws DataError if any finite value is <= 0.
  void validate() const;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> values_;
};

/// World-frame points with optional parallel attribute arrays (either empty
/// or the same length as points).
struct PointCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<long> frame_indices;
  std::vector<std::array<std::uint8_t, 3>> colors;

  size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  void append(const Eigen::Vector3d& p) { points.push_back(p); }
  void append(const Eigen::Vector3d& p, long frame_index) {
    points.push_back(p);
    frame_indices.push_back(frame_index);
  }
};

struct Projection {
  double u = 0.0;
  double v = 0.0;
  double z = 0.0;  // camera-frame depth
  bool in_bounds = false;
};

/// Back-projects the stride-grid of valid pixels into world coordinates.
PointCloud unproject(const DepthMap& depth, const Intrinsics& intrinsics, const Pose& pose,
                     int stride = 1);

Projection project_point(const Eigen::Vector3d& world_point, const Intrinsics& intrinsics,
                         const Pose& pose);

std::vector<Projection> project(const PointCloud& cloud, const Intrinsics& intrinsics,
                                const Pose& pose);

}  // namespace scenemap
