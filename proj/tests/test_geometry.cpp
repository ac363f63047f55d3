#include <doctest.h>

#include <Eigen/Geometry>
#include <random>

#include "scenemap/errors.hpp"
#include "scenemap/geometry.hpp"

using namespace scenemap;

namespace {

Pose random_pose(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::Quaterniond q(u(rng), u(rng), u(rng), u(rng));
  while (q.norm() < 1e-3) q = Eigen::Quaterniond(u(rng), u(rng), u(rng), u(rng));
  q.normalize();
  return Pose(q.toRotationMatrix(), Eigen::Vector3d(u(rng), u(rng), u(rng)) * 3.0);
}

Intrinsics test_intrinsics() {
  Intrinsics k;
  k.fx = 100.0;
  k.fy = 100.0;
  k.cx = 50.0;
  k.cy = 50.0;
  k.width = 100;
  k.height = 100;
  return k;
}

double pose_distance(const Pose& a, const Pose& b) {
  return std::max((a.rotation() - b.rotation()).cwiseAbs().maxCoeff(),
                  (a.translation() - b.translation()).cwiseAbs().maxCoeff());
}

}  // namespace

TEST_CASE("to_homogeneous embeds rotation and translation") {
  CHECK(to_homogeneous(Pose::identity()).isApprox(Eigen::Matrix4d::Identity()));

  Pose p(Eigen::Matrix3d::Identity(), Eigen::Vector3d(1, 2, 3));
  Eigen::Matrix4d h = to_homogeneous(p);
  CHECK(h(0, 3) == 1.0);
  CHECK(h(1, 3) == 2.0);
  CHECK(h(2, 3) == 3.0);
  CHECK(h(3, 3) == 1.0);
  CHECK(h.topLeftCorner<3, 3>().isApprox(Eigen::Matrix3d::Identity()));

  std::mt19937_64 rng(7);
  const Pose q = random_pose(rng);
  CHECK(pose_distance(from_homogeneous(to_homogeneous(q)), q) < 1e-15);
}

TEST_CASE("compose basics") {
  std::mt19937_64 rng(11);
  const Pose a = random_pose(rng);
  CHECK(pose_distance(compose(a, Pose::identity()), a) < 1e-15);

  Pose t1(Eigen::Matrix3d::Identity(), Eigen::Vector3d(1, 0, 0));
  Pose t2(Eigen::Matrix3d::Identity(), Eigen::Vector3d(0, 2, 5));
  CHECK((compose(t1, t2).translation() - Eigen::Vector3d(1, 2, 5)).norm() < 1e-15);

  const Pose b = random_pose(rng);
  CHECK(pose_distance(compose(compose(a, b), invert(b)), a) < 1e-9);
}

TEST_CASE("invert") {
  CHECK(pose_distance(invert(Pose::identity()), Pose::identity()) == 0.0);

  Pose t(Eigen::Matrix3d::Identity(), Eigen::Vector3d(1, 0, 0));
  CHECK((invert(t).translation() - Eigen::Vector3d(-1, 0, 0)).norm() < 1e-15);

  std::mt19937_64 rng(13);
  const Pose p = random_pose(rng);
  CHECK(pose_distance(compose(p, invert(p)), Pose::identity()) < 1e-9);
}

TEST_CASE("compose/invert group properties on random triples") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 50; ++i) {
    const Pose a = random_pose(rng);
    const Pose b = random_pose(rng);
    const Pose c = random_pose(rng);
    CHECK(pose_distance(compose(compose(a, b), c), compose(a, compose(b, c))) < 1e-9);
    CHECK(pose_distance(compose(a, invert(a)), Pose::identity()) < 1e-9);
  }
}

TEST_CASE("rotations stay orthonormal over long compose chains") {
  std::mt19937_64 rng(19);
  Pose chain;
  for (int i = 0; i < 20000; ++i) chain = compose(chain, random_pose(rng));
  CHECK(chain.orthonormality_error() < 1e-9);
}

TEST_CASE("unproject principal ray") {
  const Intrinsics k = test_intrinsics();
  DepthMap d(100, 100);
  d.at(50, 50) = 2.0f;

  SUBCASE("identity pose") {
    const PointCloud cloud = unproject(d, k, Pose::identity(), 1);
    REQUIRE(cloud.size() == 1);
    CHECK((cloud.points[0] - Eigen::Vector3d(0, 0, 2)).norm() < 1e-12);
  }
  SUBCASE("camera shifted backward along z") {
    // camera-from-world with t = (0,0,-2): the camera center sits at
    // +2 on z, looking forward; the point lands at world z = 4.
    Pose pose(Eigen::Matrix3d::Identity(), Eigen::Vector3d(0, 0, -2));
    const PointCloud cloud = unproject(d, k, pose, 1);
    REQUIRE(cloud.size() == 1);
    CHECK((cloud.points[0] - Eigen::Vector3d(0, 0, 4)).norm() < 1e-12);
  }
  SUBCASE("all-invalid map gives empty cloud") {
    DepthMap empty(16, 16);
    CHECK(unproject(empty, k, Pose::identity(), 1).empty());
  }
}

TEST_CASE("project basics") {
  const Intrinsics k = test_intrinsics();

  const Projection p = project_point(Eigen::Vector3d(0, 0, 2), k, Pose::identity());
  CHECK(p.u == doctest::Approx(50.0));
  CHECK(p.v == doctest::Approx(50.0));
  CHECK(p.z == doctest::Approx(2.0));
  CHECK(p.in_bounds);

  const Projection behind = project_point(Eigen::Vector3d(0, 0, -1), k, Pose::identity());
  CHECK(behind.z == doctest::Approx(-1.0));
  CHECK_FALSE(behind.in_bounds);
}

TEST_CASE("unproject then project reproduces the stride grid") {
  const Intrinsics k = test_intrinsics();
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> depth_dist(0.5, 5.0);
  DepthMap d(100, 100);
  for (int y = 0; y < 100; ++y)
    for (int x = 0; x < 100; ++x) d.at(x, y) = static_cast<float>(depth_dist(rng));

  const Pose pose = random_pose(rng);
  const int stride = 3;
  const PointCloud cloud = unproject(d, k, pose, stride);
  const auto projections = project(cloud, k, pose);

  size_t i = 0;
  for (int y = 0; y < 100; y += stride) {
    for (int x = 0; x < 100; x += stride) {
      REQUIRE(i < projections.size());
      CHECK(std::abs(projections[i].u - x) < 1e-6);
      CHECK(std::abs(projections[i].v - y) < 1e-6);
      CHECK(std::abs(projections[i].z - d.at(x, y)) < 1e-9);
      ++i;
    }
  }
  CHECK(i == projections.size());
}

TEST_CASE("intrinsics and depth validation") {
  Intrinsics k = test_intrinsics();
  k.fx = -1.0;
  CHECK_THROWS_AS(k.validate(), ConfigError);

  DepthMap d(4, 4);
  d.at(1, 1) = -0.5f;
  CHECK_THROWS_AS(d.validate(), DataError);
  d.at(1, 1) = kInvalidDepth;
  CHECK_NOTHROW(d.validate());
}
