#include "scenemap/spatial_query.hpp"

#include <algorithm>

#include "scenemap/errors.hpp"

namespace scenemap {

EgoState ego_from_map(const GlobalMap& map) {
  if (map.trajectory.empty()) throw DataError("ego query before any aligned block");
  const TrajectoryEntry& last = map.trajectory.back();
  return EgoState{last.frame_index, last.raw.camera_center()};
}

Eigen::Vector3d component_median(const std::vector<Eigen::Vector3d>& points) {
  if (points.empty()) throw EmptyObjectError("median of empty point set");
  Eigen::Vector3d median;
  std::vector<double> axis(points.size());
  for (int c = 0; c < 3; ++c) {
    for (size_t i = 0; i < points.size(); ++i) axis[i] = points[i][c];
    std::sort(axis.begin(), axis.end());
    const size_t n = axis.size();
    median[c] = (n % 2 == 1) ? axis[n / 2] : 0.5 * (axis[n / 2 - 1] + axis[n / 2]);
  }
  return median;
}

Eigen::Vector3d object_centroid(const PointCloud& cloud) {
  if (cloud.empty()) throw EmptyObjectError("centroid of empty object");
  return component_median(cloud.points);
}

std::vector<DistanceResult> distances(const EgoState& ego, const Registry& registry,
                                      const std::set<LifeState>& include) {
  std::vector<DistanceResult> out;
  for (const auto& [id, object] : registry.objects) {
    if (!include.count(object.state) || object.cloud.cloud().empty()) continue;
    DistanceResult r;
    r.global_id = id;
    r.class_label = object.class_label;
    r.state = object.state;
    r.distance = (object_centroid(object.cloud.cloud()) - ego.position).norm();
    out.push_back(std::move(r));
  }
  std::stable_sort(out.begin(), out.end(), [](const DistanceResult& a, const DistanceResult& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.global_id < b.global_id;
  });
  return out;
}

std::vector<PairDistance> object_distances(const Registry& registry,
                                           const std::set<LifeState>& include) {
  std::vector<std::pair<long, Eigen::Vector3d>> centroids;
  for (const auto& [id, object] : registry.objects) {
    if (!include.count(object.state) || object.cloud.cloud().empty()) continue;
    centroids.emplace_back(id, object_centroid(object.cloud.cloud()));
  }
  std::vector<PairDistance> out;
  for (size_t i = 0; i < centroids.size(); ++i) {
    for (size_t j = i + 1; j < centroids.size(); ++j) {
      out.push_back({centroids[i].first, centroids[j].first,
                     (centroids[i].second - centroids[j].second).norm()});
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const PairDistance& a, const PairDistance& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    if (a.id_a != b.id_a) return a.id_a < b.id_a;
    return a.id_b < b.id_b;
  });
  return out;
}

}  // namespace scenemap
