#pragma once

#include <string>
#include <vector>

#include "scenemap/block_aligner.hpp"
#include "scenemap/geometry.hpp"

namespace scenemap {

struct TrajectorySample {
  double timestamp = 0.0;
  Pose pose;  // camera-from-world
};

using Trajectory = std::vector<TrajectorySample>;

// TUM trajectory format: "timestamp tx ty tz qx qy qz qw" per line, where
// t is the camera center and q the world-from-camera rotation.
Trajectory read_tum(const std::string& path);
void write_tum_line(std::string& out, double timestamp, const Pose& pose);

/// Greedy nearest-timestamp association within max_dt, each sample matched
/// at most once. Throws NoMatchesError when nothing pairs up.
std::vector<std::pair<size_t, size_t>> associate(const Trajectory& est, const Trajectory& gt,
                                                 double max_dt);

struct Similarity {
  double scale = 1.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return scale * (rotation * p) + translation;
  }
};

/// Least-squares similarity (rigid when with_scale is false) mapping src
/// onto dst. Throws DegenerateConfigurationError for fewer than 3 pairs or
/// collinear/coincident sources.
Similarity align_umeyama(const std::vector<Eigen::Vector3d>& src,
                         const std::vector<Eigen::Vector3d>& dst, bool with_scale);

/// RMSE of aligned camera-center errors over associated samples.
double ate_rmse(const Trajectory& est, const Trajectory& gt, double max_dt, bool with_scale);

/// 3D nearest-neighbor index over a fixed point set.
class KdTree {
 public:
  explicit KdTree(std::vector<Eigen::Vector3d> points);
  double nearest_distance(const Eigen::Vector3d& query) const;
  std::pair<size_t, double> nearest(const Eigen::Vector3d& query) const;
  size_t size() const { return points_.size(); }
  const std::vector<Eigen::Vector3d>& points() const { return points_; }

 private:
  struct Node {
    int axis = 0;
    size_t point = 0;
    int left = -1;
    int right = -1;
  };
  int build(size_t begin, size_t end, int depth);
  void search(int node, const Eigen::Vector3d& query, double& best, size_t& best_index) const;

  std::vector<Eigen::Vector3d> points_;
  std::vector<size_t> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

struct ReconMetrics {
  double accuracy = 0.0;    // mean NN distance prediction -> truth
  double completion = 0.0;  // mean NN distance truth -> prediction
  double chamfer = 0.0;     // (accuracy + completion) / 2
};

/// Accuracy / completion / Chamfer between point clouds; optional
/// pre-alignment via iterated nearest-neighbor Umeyama. use_median switches
/// the per-direction aggregation from mean to median.
ReconMetrics recon_metrics(const std::vector<Eigen::Vector3d>& pred,
                           const std::vector<Eigen::Vector3d>& gt, bool align = false,
                           bool use_median = false);

}  // namespace scenemap
