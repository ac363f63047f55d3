#include "scenemap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "scenemap/errors.hpp"

namespace scenemap {

Trajectory read_tum(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw MissingFileError(path);
  Trajectory traj;
  std::string line;
  size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    double ts, tx, ty, tz, qx, qy, qz, qw;
    if (!(ls >> ts >> tx >> ty >> tz >> qx >> qy >> qz >> qw)) {
      throw DataError(path + ":" + std::to_string(line_no) + ": expected 8 numbers");
    }
    Eigen::Quaterniond q(qw, qx, qy, qz);
    if (q.norm() < 1e-12) {
      throw DataError(path + ":" + std::to_string(line_no) + ": zero quaternion");
    }
    q.normalize();
    // Stored rotation is world-from-camera; t is the camera center.
    const Eigen::Matrix3d cam_from_world = q.toRotationMatrix().transpose();
    const Eigen::Vector3d center(tx, ty, tz);
    traj.push_back({ts, Pose(cam_from_world, -(cam_from_world * center))});
  }
  return traj;
}

void write_tum_line(std::string& out, double timestamp, const Pose& pose) {
  const Eigen::Vector3d center = pose.camera_center();
  const Eigen::Quaterniond q(pose.rotation().transpose());
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%.9f %.9f %.9f %.9f %.9f %.9f %.9f %.9f\n", timestamp,
                center.x(), center.y(), center.z(), q.x(), q.y(), q.z(), q.w());
  out += buf;
}

std::vector<std::pair<size_t, size_t>> associate(const Trajectory& est, const Trajectory& gt,
                                                 double max_dt) {
  if (est.empty() || gt.empty()) throw NoMatchesError("empty trajectory");
  struct Candidate {
    double dt;
    size_t e;
    size_t g;
  };
  std::vector<Candidate> candidates;
  size_t lo = 0;
  for (size_t e = 0; e < est.size(); ++e) {
    while (lo < gt.size() && gt[lo].timestamp < est[e].timestamp - max_dt) ++lo;
    for (size_t g = lo; g < gt.size() && gt[g].timestamp <= est[e].timestamp + max_dt; ++g) {
      candidates.push_back({std::abs(gt[g].timestamp - est[e].timestamp), e, g});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.dt != b.dt) return a.dt < b.dt;
    if (a.e != b.e) return a.e < b.e;
    return a.g < b.g;
  });
  std::vector<bool> e_used(est.size(), false), g_used(gt.size(), false);
  std::vector<std::pair<size_t, size_t>> matches;
  for (const Candidate& c : candidates) {
    if (e_used[c.e] || g_used[c.g]) continue;
    e_used[c.e] = true;
    g_used[c.g] = true;
    matches.emplace_back(c.e, c.g);
  }
  if (matches.empty()) throw NoMatchesError("no timestamp pairs within max_dt");
  std::sort(matches.begin(), matches.end());
  return matches;
}

Similarity align_umeyama(const std::vector<Eigen::Vector3d>& src,
                         const std::vector<Eigen::Vector3d>& dst, bool with_scale) {
  if (src.size() != dst.size()) throw DataError("align: size mismatch");
  const size_t n = src.size();
  if (n < 3) throw DegenerateConfigurationError("need at least 3 point pairs");

  Eigen::Vector3d mu_src = Eigen::Vector3d::Zero();
  Eigen::Vector3d mu_dst = Eigen::Vector3d::Zero();
  for (size_t i = 0; i < n; ++i) {
    mu_src += src[i];
    mu_dst += dst[i];
  }
  mu_src /= static_cast<double>(n);
  mu_dst /= static_cast<double>(n);

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  double var_src = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d x = src[i] - mu_src;
    const Eigen::Vector3d y = dst[i] - mu_dst;
    cov += y * x.transpose();
    var_src += x.squaredNorm();
  }
  cov /= static_cast<double>(n);
  var_src /= static_cast<double>(n);

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d d = svd.singularValues();
  // The rotation is determined only when the sources span at least a plane.
  if (!(d(0) > 0.0) || d(1) <= 1e-9 * d(0)) {
    throw DegenerateConfigurationError("source points are collinear or coincident");
  }
  Eigen::Vector3d s_fix = Eigen::Vector3d::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) s_fix(2) = -1.0;

  Similarity result;
  result.rotation = svd.matrixU() * s_fix.asDiagonal() * svd.matrixV().transpose();
  result.scale = with_scale ? d.dot(s_fix) / var_src : 1.0;
  result.translation = mu_dst - result.scale * (result.rotation * mu_src);
  return result;
}

double ate_rmse(const Trajectory& est, const Trajectory& gt, double max_dt, bool with_scale) {
  const auto matches = associate(est, gt, max_dt);
  std::vector<Eigen::Vector3d> src, dst;
  src.reserve(matches.size());
  dst.reserve(matches.size());
  for (const auto& [e, g] : matches) {
    src.push_back(est[e].pose.camera_center());
    dst.push_back(gt[g].pose.camera_center());
  }
  const Similarity sim = align_umeyama(src, dst, with_scale);
  double sum = 0.0;
  for (size_t i = 0; i < src.size(); ++i) sum += (dst[i] - sim.apply(src[i])).squaredNorm();
  return std::sqrt(sum / static_cast<double>(src.size()));
}

KdTree::KdTree(std::vector<Eigen::Vector3d> points) : points_(std::move(points)) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), size_t{0});
  nodes_.reserve(points_.size());
  if (!points_.empty()) root_ = build(0, points_.size(), 0);
}

int KdTree::build(size_t begin, size_t end, int depth) {
  if (begin >= end) return -1;
  const int axis = depth % 3;
  const size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](size_t a, size_t b) { return points_[a][axis] < points_[b][axis]; });
  const int node_index = static_cast<int>(nodes_.size());
  nodes_.push_back({axis, order_[mid], -1, -1});
  const int left = build(begin, mid, depth + 1);
  const int right = build(mid + 1, end, depth + 1);
  nodes_[node_index].left = left;
  nodes_[node_index].right = right;
  return node_index;
}

void KdTree::search(int node, const Eigen::Vector3d& query, double& best,
                    size_t& best_index) const {
  if (node < 0) return;
  const Node& n = nodes_[node];
  const Eigen::Vector3d& p = points_[n.point];
  const double dist = (p - query).norm();
  if (dist < best) {
    best = dist;
    best_index = n.point;
  }
  const double diff = query[n.axis] - p[n.axis];
  const int near = diff < 0.0 ? n.left : n.right;
  const int far = diff < 0.0 ? n.right : n.left;
  search(near, query, best, best_index);
  if (std::abs(diff) < best) search(far, query, best, best_index);
}

std::pair<size_t, double> KdTree::nearest(const Eigen::Vector3d& query) const {
  if (root_ < 0) throw EmptyCloudError("nearest neighbor in empty tree");
  double best = std::numeric_limits<double>::infinity();
  size_t best_index = 0;
  search(root_, query, best, best_index);
  return {best_index, best};
}

double KdTree::nearest_distance(const Eigen::Vector3d& query) const {
  return nearest(query).second;
}

namespace {

double aggregate(std::vector<double>& values, bool use_median) {
  if (!use_median) {
    return std::accumulate(values.begin(), values.end(), 0.0) /
           static_cast<double>(values.size());
  }
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  return (n % 2 == 1) ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double directed_distance(const std::vector<Eigen::Vector3d>& from, const KdTree& to,
                         bool use_median) {
  std::vector<double> nn;
  nn.reserve(from.size());
  for (const auto& p : from) nn.push_back(to.nearest_distance(p));
  return aggregate(nn, use_median);
}

}  // namespace

ReconMetrics recon_metrics(const std::vector<Eigen::Vector3d>& pred,
                           const std::vector<Eigen::Vector3d>& gt, bool align, bool use_median) {
  if (pred.empty() || gt.empty()) throw EmptyCloudError("reconstruction metrics need both clouds");

  std::vector<Eigen::Vector3d> aligned = pred;
  const KdTree gt_tree(gt);
  if (align) {
    // A few rounds of nearest-neighbor correspondences + rigid Umeyama on a
    // subsample.
    const size_t max_pairs = 10000;
    const size_t step = std::max<size_t>(1, aligned.size() / max_pairs);
    for (int iter = 0; iter < 5; ++iter) {
      std::vector<Eigen::Vector3d> src, dst;
      for (size_t i = 0; i < aligned.size(); i += step) {
        src.push_back(aligned[i]);
        dst.push_back(gt[gt_tree.nearest(aligned[i]).first]);
      }
      try {
        const Similarity sim = align_umeyama(src, dst, false);
        for (auto& p : aligned) p = sim.apply(p);
      } catch (const DegenerateConfigurationError&) {
        break;
      }
    }
  }

  const KdTree pred_tree(aligned);
  ReconMetrics metrics;
  metrics.accuracy = directed_distance(aligned, gt_tree, use_median);
  metrics.completion = directed_distance(gt, pred_tree, use_median);
  metrics.chamfer = 0.5 * (metrics.accuracy + metrics.completion);
  return metrics;
}

}  // namespace scenemap
