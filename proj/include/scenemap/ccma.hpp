#pragma once

#include <Eigen/Core>
#include <vector>

#include "scenemap/geometry.hpp"

namespace scenemap {

struct SmootherConfig {
  enum class Kernel { Hann, Uniform };

  int curvature_half_width = 3;  // k1
  int smoothing_half_width = 3;  // k2
  Kernel kernel = Kernel::Hann;

  void validate() const;
};

/// Normalized symmetric kernel over a 2k+1 window. Hann weights come from a
/// (2k+3)-point Hann window with the zero endpoints dropped.
std::vector<double> kernel_weights(int half_width, SmootherConfig::Kernel kernel);

/// Curvature-corrected moving average. A kernel-weighted moving average
/// shrinks curved paths radially; each averaged point is pushed back out
/// along the local outward normal by the shrink factor a kernel average
/// produces on the osculating circle. Windows shrink symmetrically near the
/// ends. Throws TooShortError below 3 points.
std::vector<Eigen::Vector3d> smooth_positions(const std::vector<Eigen::Vector3d>& positions,
                                              const SmootherConfig& cfg);

/// Plain kernel-weighted moving average with the same boundary handling.
std::vector<Eigen::Vector3d> moving_average(const std::vector<Eigen::Vector3d>& positions,
                                            const SmootherConfig& cfg);

/// Smooths camera centers only; rotations pass through and translations are
/// rebuilt as t = -R * c_smoothed.
std::vector<Pose> smooth_block_poses(const std::vector<Pose>& poses, const SmootherConfig& cfg);

}  // namespace scenemap
