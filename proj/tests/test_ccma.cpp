#include <doctest.h>

#include <Eigen/Geometry>
#include <cmath>
#include <random>

#include "scenemap/ccma.hpp"
#include "scenemap/errors.hpp"

using namespace scenemap;

namespace {

std::vector<Eigen::Vector3d> circle_points(int n, double radius) {
  std::vector<Eigen::Vector3d> pts;
  for (int i = 0; i < n; ++i) {
    const double theta = 2.0 * M_PI * i / n;
    pts.emplace_back(radius * std::cos(theta), radius * std::sin(theta), 0.0);
  }
  return pts;
}

double max_radial_error(const std::vector<Eigen::Vector3d>& pts, double radius,
                        size_t skip_ends = 0) {
  double worst = 0.0;
  for (size_t i = skip_ends; i + skip_ends < pts.size(); ++i) {
    worst = std::max(worst, std::abs(pts[i].norm() - radius));
  }
  return worst;
}

}  // namespace

TEST_CASE("kernel weights are normalized and positive") {
  for (int k = 1; k <= 5; ++k) {
    for (auto kernel : {SmootherConfig::Kernel::Hann, SmootherConfig::Kernel::Uniform}) {
      const auto w = kernel_weights(k, kernel);
      REQUIRE(w.size() == static_cast<size_t>(2 * k + 1));
      double sum = 0.0;
      for (double x : w) {
        CHECK(x > 0.0);
        sum += x;
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
      // symmetric
      for (int j = 0; j <= k; ++j) CHECK(w[k - j] == doctest::Approx(w[k + j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("collinear equispaced input is unchanged") {
  SmootherConfig cfg;
  std::vector<Eigen::Vector3d> line;
  for (int i = 0; i < 20; ++i) line.emplace_back(0.5 * i, -0.25 * i, 2.0 * i);
  const auto out = smooth_positions(line, cfg);
  REQUIRE(out.size() == line.size());
  for (size_t i = 0; i < line.size(); ++i) CHECK((out[i] - line[i]).norm() < 1e-9);
}

TEST_CASE("identical points are unchanged") {
  SmootherConfig cfg;
  std::vector<Eigen::Vector3d> pts(10, Eigen::Vector3d(1.0, 2.0, 3.0));
  const auto out = smooth_positions(pts, cfg);
  for (const auto& p : out) CHECK((p - pts[0]).norm() < 1e-12);
}

TEST_CASE("too short input") {
  SmootherConfig cfg;
  std::vector<Eigen::Vector3d> two = {{0, 0, 0}, {1, 0, 0}};
  CHECK_THROWS_AS(smooth_positions(two, cfg), TooShortError);
}

TEST_CASE("circle oracle: curvature correction beats the plain moving average") {
  SmootherConfig cfg;  // Hann, k1 = k2 = 3
  const auto circle = circle_points(64, 1.0);
  const auto corrected = smooth_positions(circle, cfg);
  const auto plain = moving_average(circle, cfg);

  const double corrected_err = max_radial_error(corrected, 1.0);
  const double plain_err = max_radial_error(plain, 1.0);
  CHECK(corrected_err < plain_err);
  CHECK(plain_err > 1e-4);
  // away from the shrunk boundary windows the analytic correction recovers
  // the circle to machine precision
  CHECK(max_radial_error(corrected, 1.0, 6) < 1e-9);
}

TEST_CASE("uniform kernel with zero curvature reduces to the arithmetic mean") {
  SmootherConfig cfg;
  cfg.kernel = SmootherConfig::Kernel::Uniform;
  std::vector<Eigen::Vector3d> line;
  for (int i = 0; i < 15; ++i) line.emplace_back(1.0 * i, 0.0, 0.0);
  const auto ma = moving_average(line, cfg);
  for (size_t i = 3; i + 3 < line.size(); ++i) {
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (int j = -3; j <= 3; ++j) mean += line[i + j];
    mean /= 7.0;
    CHECK((ma[i] - mean).norm() < 1e-12);
  }
}

TEST_CASE("smoothing commutes with rigid transforms") {
  SmootherConfig cfg;
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Eigen::Vector3d> path;
  for (int i = 0; i < 40; ++i) {
    path.emplace_back(0.1 * i + 0.02 * u(rng), std::sin(0.2 * i) + 0.02 * u(rng), 0.05 * i);
  }
  Eigen::Quaterniond q(0.3, 0.5, -0.2, 0.6);
  q.normalize();
  const Eigen::Matrix3d R = q.toRotationMatrix();
  const Eigen::Vector3d t(4.0, -2.0, 1.5);

  std::vector<Eigen::Vector3d> transformed;
  for (const auto& p : path) transformed.push_back(R * p + t);

  const auto smooth_then_transform = smooth_positions(path, cfg);
  const auto transform_then_smooth = smooth_positions(transformed, cfg);
  for (size_t i = 0; i < path.size(); ++i) {
    CHECK((R * smooth_then_transform[i] + t - transform_then_smooth[i]).norm() < 1e-9);
  }
}

TEST_CASE("endpoints never move and length is preserved") {
  SmootherConfig cfg;
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Eigen::Vector3d> path;
  for (int i = 0; i < 25; ++i) path.emplace_back(u(rng), u(rng), u(rng));
  const auto out = smooth_positions(path, cfg);
  REQUIRE(out.size() == path.size());
  CHECK((out.front() - path.front()).norm() == 0.0);
  CHECK((out.back() - path.back()).norm() == 0.0);
}

TEST_CASE("pose smoothing keeps rotations and improves a jittered line") {
  SmootherConfig cfg;
  std::mt19937_64 rng(303);
  std::normal_distribution<double> noise(0.0, 0.01);

  std::vector<Pose> poses;
  std::vector<Eigen::Vector3d> truth;
  for (int i = 0; i < 30; ++i) {
    const Eigen::Vector3d c_true(0.1 * i, 0.0, 0.0);
    truth.push_back(c_true);
    const Eigen::Vector3d c = c_true + Eigen::Vector3d(noise(rng), noise(rng), noise(rng));
    const Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
    poses.emplace_back(R, -(R * c));
  }
  const auto smoothed = smooth_block_poses(poses, cfg);
  REQUIRE(smoothed.size() == poses.size());

  double raw_err = 0.0, smooth_err = 0.0;
  for (size_t i = 0; i < poses.size(); ++i) {
    CHECK(smoothed[i].rotation().isApprox(poses[i].rotation()));
    raw_err += (poses[i].camera_center() - truth[i]).norm();
    smooth_err += (smoothed[i].camera_center() - truth[i]).norm();
  }
  CHECK(smooth_err < raw_err);
}

TEST_CASE("static camera block is unchanged by pose smoothing") {
  SmootherConfig cfg;
  std::vector<Pose> poses(8, Pose(Eigen::Matrix3d::Identity(), Eigen::Vector3d(0, 0, -1)));
  const auto smoothed = smooth_block_poses(poses, cfg);
  for (size_t i = 0; i < poses.size(); ++i) {
    CHECK((smoothed[i].translation() - poses[i].translation()).norm() < 1e-12);
  }
}
