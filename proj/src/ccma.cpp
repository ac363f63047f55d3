#include "scenemap/ccma.hpp"

#include <algorithm>
#include <cmath>

#include "scenemap/errors.hpp"

namespace scenemap {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kCurvatureFloor = 1e-9;
constexpr double kShrinkFloor = 1e-3;

struct MengerResult {
  double curvature = 0.0;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
};

// Circumcircle of (a, b, c); curvature 0 when the points are collinear.
MengerResult menger(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  MengerResult result;
  const Eigen::Vector3d u = a - c;
  const Eigen::Vector3d v = b - c;
  const Eigen::Vector3d cross = u.cross(v);
  const double cross2 = cross.squaredNorm();
  const double scale = std::max({u.squaredNorm(), v.squaredNorm(), 1e-300});
  if (cross2 <= 1e-24 * scale * scale) return result;  // collinear or coincident
  result.center =
      c + (u.squaredNorm() * v - v.squaredNorm() * u).cross(cross) / (2.0 * cross2);
  const double radius = (a - result.center).norm();
  if (radius > 0.0) result.curvature = 1.0 / radius;
  return result;
}

int effective_half_width(int half_width, int index, int count) {
  return std::min({half_width, index, count - 1 - index});
}

}  // namespace

void SmootherConfig::validate() const {
  if (curvature_half_width < 1 || smoothing_half_width < 1) {
    throw ConfigError("smoother: half widths must be >= 1");
  }
}

std::vector<double> kernel_weights(int half_width, SmootherConfig::Kernel kernel) {
  const int len = 2 * half_width + 1;
  std::vector<double> weights(len, 1.0);
  if (kernel == SmootherConfig::Kernel::Hann) {
    for (int m = 0; m < len; ++m) {
      weights[m] = 0.5 * (1.0 - std::cos(2.0 * kPi * (m + 1) / (len + 1)));
    }
  }
  double sum = 0.0;
  for (double w : weights) sum += w;
  for (double& w : weights) w /= sum;
  return weights;
}

std::vector<Eigen::Vector3d> moving_average(const std::vector<Eigen::Vector3d>& positions,
                                            const SmootherConfig& cfg) {
  const int count = static_cast<int>(positions.size());
  std::vector<Eigen::Vector3d> averaged(positions.size());
  for (int i = 0; i < count; ++i) {
    const int k = effective_half_width(cfg.smoothing_half_width, i, count);
    if (k == 0) {
      averaged[i] = positions[i];
      continue;
    }
    const std::vector<double> weights = kernel_weights(k, cfg.kernel);
    Eigen::Vector3d acc = Eigen::Vector3d::Zero();
    for (int j = -k; j <= k; ++j) acc += weights[j + k] * positions[i + j];
    averaged[i] = acc;
  }
  return averaged;
}

std::vector<Eigen::Vector3d> smooth_positions(const std::vector<Eigen::Vector3d>& positions,
                                              const SmootherConfig& cfg) {
  cfg.validate();
  if (positions.size() < 3) throw TooShortError("smoothing needs at least 3 points");
  const int count = static_cast<int>(positions.size());

  const std::vector<Eigen::Vector3d> averaged = moving_average(positions, cfg);
  std::vector<Eigen::Vector3d> out = averaged;

  for (int i = 0; i < count; ++i) {
    const int kc = effective_half_width(cfg.curvature_half_width, i, count);
    if (kc < 1) continue;
    const MengerResult m = menger(averaged[i - kc], averaged[i], averaged[i + kc]);
    if (m.curvature <= kCurvatureFloor) continue;

    const int ks = effective_half_width(cfg.smoothing_half_width, i, count);
    if (ks < 1) continue;

    // Step angle on the osculating circle, from the mean chord length in the
    // smoothing window.
    double chord_sum = 0.0;
    for (int j = i - ks; j < i + ks; ++j) chord_sum += (averaged[j + 1] - averaged[j]).norm();
    const double mean_chord = chord_sum / (2 * ks);
    const double half_sine = std::clamp(m.curvature * mean_chord / 2.0, 0.0, 1.0);
    const double alpha = 2.0 * std::asin(half_sine);

    const std::vector<double> weights = kernel_weights(ks, cfg.kernel);
    double shrink = 0.0;
    for (int j = -ks; j <= ks; ++j) shrink += weights[j + ks] * std::cos(j * alpha);
    if (shrink < kShrinkFloor) continue;

    // Corrected radius = averaged radius / shrink.
    const Eigen::Vector3d radial = averaged[i] - m.center;
    if (radial.norm() <= 0.0) continue;
    out[i] = m.center + radial / shrink;
  }
  return out;
}

std::vector<Pose> smooth_block_poses(const std::vector<Pose>& poses, const SmootherConfig& cfg) {
  std::vector<Eigen::Vector3d> centers;
  centers.reserve(poses.size());
  for (const Pose& pose : poses) centers.push_back(pose.camera_center());
  const std::vector<Eigen::Vector3d> smoothed = smooth_positions(centers, cfg);
  std::vector<Pose> out;
  out.reserve(poses.size());
  for (size_t i = 0; i < poses.size(); ++i) {
    out.emplace_back(poses[i].rotation(), -(poses[i].rotation() * smoothed[i]));
  }
  return out;
}

}  // namespace scenemap
