#include <doctest.h>

#include <algorithm>
#include <random>

#include "scenemap/errors.hpp"
#include "scenemap/spatial_query.hpp"

using namespace scenemap;

namespace {

GlobalObject make_object(long id, const char* cls, LifeState state,
                         const std::vector<Eigen::Vector3d>& points) {
  GlobalObject o;
  o.global_id = id;
  o.class_label = cls;
  o.state = state;
  o.cloud.set_voxel_size(0.001);
  for (const auto& p : points) o.cloud.insert(p, 0);
  return o;
}

}  // namespace

TEST_CASE("component-wise median") {
  CHECK((object_centroid(PointCloud{{{0, 0, 0}, {1, 1, 1}, {10, 10, 10}}}) -
         Eigen::Vector3d(1, 1, 1)).norm() < 1e-15);
  CHECK((object_centroid(PointCloud{{{2, 3, 4}}}) - Eigen::Vector3d(2, 3, 4)).norm() == 0.0);
  CHECK_THROWS_AS(object_centroid(PointCloud{}), EmptyObjectError);

  // robust to one far outlier among a cluster
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  PointCloud cluster;
  for (int i = 0; i < 9; ++i) cluster.append(Eigen::Vector3d(1 + u(rng), 2 + u(rng), 3 + u(rng)));
  cluster.append({100, 100, 100});
  const Eigen::Vector3d median = object_centroid(cluster);
  CHECK((median - Eigen::Vector3d(1, 2, 3)).cwiseAbs().maxCoeff() < 0.2);
}

TEST_CASE("ego distance basics") {
  Registry registry;
  registry.objects.emplace(1, make_object(1, "chair", LifeState::Recent, {{3, 4, 0}}));
  EgoState ego{0, Eigen::Vector3d::Zero()};

  const auto result = distances(ego, registry);
  REQUIRE(result.size() == 1);
  CHECK(result[0].distance == doctest::Approx(5.0));
  CHECK(result[0].global_id == 1);

  Registry empty;
  CHECK(distances(ego, empty).empty());
}

TEST_CASE("state filter") {
  Registry registry;
  registry.objects.emplace(1, make_object(1, "a", LifeState::Recent, {{1, 0, 0}}));
  registry.objects.emplace(2, make_object(2, "b", LifeState::Retained, {{2, 0, 0}}));
  registry.objects.emplace(3, make_object(3, "c", LifeState::Removed, {{3, 0, 0}}));
  EgoState ego{0, Eigen::Vector3d::Zero()};

  CHECK(distances(ego, registry).size() == 2);  // removed excluded by default
  CHECK(distances(ego, registry, {LifeState::Removed}).size() == 1);
  CHECK(distances(ego, registry,
                  {LifeState::Recent, LifeState::Retained, LifeState::Removed})
            .size() == 3);
}

TEST_CASE("results are sorted ascending, matching a brute-force sort") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-5, 5);
  Registry registry;
  for (long id = 1; id <= 10; ++id) {
    registry.objects.emplace(
        id, make_object(id, "x", LifeState::Recent, {{u(rng), u(rng), u(rng)}}));
  }
  EgoState ego{0, Eigen::Vector3d(u(rng), u(rng), u(rng))};

  const auto result = distances(ego, registry);
  REQUIRE(result.size() == 10);
  std::vector<double> brute;
  for (const auto& [id, obj] : registry.objects) {
    brute.push_back((object_centroid(obj.cloud.cloud()) - ego.position).norm());
  }
  std::sort(brute.begin(), brute.end());
  for (size_t i = 0; i < 10; ++i) CHECK(result[i].distance == doctest::Approx(brute[i]));
  // repeated calls are identical
  const auto again = distances(ego, registry);
  for (size_t i = 0; i < 10; ++i) {
    CHECK(again[i].global_id == result[i].global_id);
    CHECK(again[i].distance == result[i].distance);
  }
}

TEST_CASE("pairwise distances satisfy metric properties") {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(-3, 3);
  Registry registry;
  for (long id = 1; id <= 6; ++id) {
    registry.objects.emplace(
        id, make_object(id, "x", LifeState::Recent, {{u(rng), u(rng), u(rng)}}));
  }
  const auto pairs = object_distances(registry);
  CHECK(pairs.size() == 15);

  std::map<std::pair<long, long>, double> lookup;
  for (const auto& p : pairs) {
    CHECK(p.distance >= 0.0);
    lookup[{p.id_a, p.id_b}] = p.distance;
    lookup[{p.id_b, p.id_a}] = p.distance;
  }
  // triangle inequality on all id triples
  for (long a = 1; a <= 6; ++a) {
    for (long b = 1; b <= 6; ++b) {
      for (long c = 1; c <= 6; ++c) {
        if (a == b || b == c || a == c) continue;
        CHECK(lookup[{a, c}] <= lookup[{a, b}] + lookup[{b, c}] + 1e-12);
      }
    }
  }
  // ascending order
  for (size_t i = 1; i < pairs.size(); ++i) CHECK(pairs[i - 1].distance <= pairs[i].distance);
}

TEST_CASE("ego state comes from the latest raw pose") {
  GlobalMap map;
  CHECK_THROWS_AS(ego_from_map(map), DataError);
  TrajectoryEntry entry;
  entry.frame_index = 42;
  entry.raw = Pose(Eigen::Matrix3d::Identity(), Eigen::Vector3d(-1, -2, -3));
  map.trajectory.push_back(entry);
  const EgoState ego = ego_from_map(map);
  CHECK(ego.frame_index == 42);
  CHECK((ego.position - Eigen::Vector3d(1, 2, 3)).norm() < 1e-15);
}
