#include "scenemap/geometry.hpp"

#include <Eigen/SVD>
#include <sstream>

#include "scenemap/errors.hpp"

namespace scenemap {

namespace {
constexpr double kRotationDriftTol = 1e-9;
}

void Intrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw ConfigError("intrinsics: focal lengths must be positive");
  if (width <= 0 || height <= 0) throw ConfigError("intrinsics: image size must be positive");
  if (cx < 0.0 || cx >= width || cy < 0.0 || cy >= height) {
    std::ostringstream os;
    os << "intrinsics: principal point (" << cx << ", " << cy << ") outside " << width << "x"
       << height << " image";
    throw ConfigError(os.str());
  }
}

double Pose::orthonormality_error() const {
  Eigen::Matrix3d gram = rotation_.transpose() * rotation_;
  return (gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
}

void Pose::reorthonormalize() {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(rotation_, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d nearest = svd.matrixU() * svd.matrixV().transpose();
  if (nearest.determinant() < 0.0) {
    Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
    flip(2, 2) = -1.0;
    nearest = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  rotation_ = nearest;
}

Eigen::Matrix4d to_homogeneous(const Pose& pose) {
  Eigen::Matrix4d mat = Eigen::Matrix4d::Identity();
  mat.topLeftCorner<3, 3>() = pose.rotation();
  mat.topRightCorner<3, 1>() = pose.translation();
  return mat;
}

Pose from_homogeneous(const Eigen::Matrix4d& mat) {
  return Pose(mat.topLeftCorner<3, 3>(), mat.topRightCorner<3, 1>());
}

Pose compose(const Pose& a, const Pose& b) {
  Pose result(a.rotation() * b.rotation(), a.rotation() * b.translation() + a.translation());
  if (result.orthonormality_error() > kRotationDriftTol) result.reorthonormalize();
  return result;
}

Pose invert(const Pose& pose) {
  Eigen::Matrix3d rt = pose.rotation().transpose();
  return Pose(rt, -(rt * pose.translation()));
}

void DepthMap::validate() const {
  for (float v : values_) {
    if (std::isfinite(v) && v <= 0.0f) {
      throw DataError("depth map: finite values must be positive");
    }
  }
}

PointCloud unproject(const DepthMap& depth, const Intrinsics& intrinsics, const Pose& pose,
                     int stride) {
  if (stride < 1) throw ConfigError("unproject: stride must be >= 1");
  PointCloud cloud;
  const Pose world_from_cam = invert(pose);
  for (int y = 0; y < depth.height(); y += stride) {
    for (int x = 0; x < depth.width(); x += stride) {
      if (!depth.valid(x, y)) continue;
      const double z = depth.at(x, y);
      Eigen::Vector3d cam_point((x - intrinsics.cx) * z / intrinsics.fx,
                                (y - intrinsics.cy) * z / intrinsics.fy, z);
      cloud.points.push_back(world_from_cam.apply(cam_point));
    }
  }
  return cloud;
}

Projection project_point(const Eigen::Vector3d& world_point, const Intrinsics& intrinsics,
                         const Pose& pose) {
  const Eigen::Vector3d cam = pose.apply(world_point);
  Projection proj;
  proj.z = cam.z();
  if (cam.z() != 0.0) {
    proj.u = intrinsics.fx * cam.x() / cam.z() + intrinsics.cx;
    proj.v = intrinsics.fy * cam.y() / cam.z() + intrinsics.cy;
  }
  proj.in_bounds = cam.z() > 0.0 && proj.u >= 0.0 && proj.u < intrinsics.width && proj.v >= 0.0 &&
                   proj.v < intrinsics.height;
  return proj;
}

std::vector<Projection> project(const PointCloud& cloud, const Intrinsics& intrinsics,
                                const Pose& pose) {
  std::vector<Projection> result;
  result.reserve(cloud.size());
  for (const auto& p : cloud.points) result.push_back(project_point(p, intrinsics, pose));
  return result;
}

}  // namespace scenemap
