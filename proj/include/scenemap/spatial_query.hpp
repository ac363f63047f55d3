#pragma once

#include <set>
#include <string>
#include <vector>

#include "scenemap/block_aligner.hpp"
#include "scenemap/tracker.hpp"

namespace scenemap {

struct EgoState {
  long frame_index = -1;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();  // camera center, world
};

/// Camera center of the latest raw aligned pose.
EgoState ego_from_map(const GlobalMap& map);

Eigen::Vector3d component_median(const std::vector<Eigen::Vector3d>& points);

/// Component-wise median over all object points. Throws EmptyObjectError.
Eigen::Vector3d object_centroid(const PointCloud& cloud);

struct DistanceResult {
  long global_id = 0;
  std::string class_label;
  LifeState state = LifeState::Recent;
  double distance = 0.0;
};

/// Euclidean ego-to-centroid distances for objects whose state is included,
/// ascending.
std::vector<DistanceResult> distances(
    const EgoState& ego, const Registry& registry,
    const std::set<LifeState>& include = {LifeState::Recent, LifeState::Retained});

struct PairDistance {
  long id_a = 0;
  long id_b = 0;
  double distance = 0.0;
};

/// Pairwise centroid distances between included objects, ascending.
std::vector<PairDistance> object_distances(
    const Registry& registry,
    const std::set<LifeState>& include = {LifeState::Recent, LifeState::Retained});

}  // namespace scenemap
