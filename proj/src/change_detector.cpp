#include "scenemap/change_detector.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "scenemap/errors.hpp"

namespace scenemap {

void ChangeConfig::validate() const {
  if (!(delta > 0.0)) throw ConfigError("change: delta must be positive");
  if (eta < 0.0 || eta > 1.0) throw ConfigError("change: eta must be in [0,1]");
  if (tau_vis < 0.0 || tau_vis > 1.0) throw ConfigError("change: tau_vis must be in [0,1]");
  if (tau_area < 0.0 || tau_area > 1.0) throw ConfigError("change: tau_area must be in [0,1]");
}

const char* to_string(ChangeEventType type) {
  switch (type) {
    case ChangeEventType::Appeared: return "appeared";
    case ChangeEventType::Redetected: return "redetected";
    case ChangeEventType::BecameRetained: return "became_retained";
    case ChangeEventType::ConfidenceDecayed: return "confidence_decayed";
    case ChangeEventType::Removed: return "removed";
  }
  return "?";
}

VisibilityResult visible_fraction(const PointCloud& object_points, const Pose& pose,
                                  const Intrinsics& intrinsics, const DepthMap& observed,
                                  double delta) {
  if (object_points.empty()) throw EmptyObjectError("visibility of empty object");
  VisibilityResult result;
  size_t in_view = 0;
  size_t visible = 0;
  std::unordered_set<int> footprint;
  for (const auto& point : object_points.points) {
    const Projection proj = project_point(point, intrinsics, pose);
    if (!proj.in_bounds) continue;
    ++in_view;
    const int x = static_cast<int>(proj.u);
    const int y = static_cast<int>(proj.v);
    footprint.insert(y * intrinsics.width + x);
    if (observed.empty() || x >= observed.width() || y >= observed.height() ||
        !observed.valid(x, y)) {
      ++visible;  // no reliable observation; benefit of the doubt
      continue;
    }
    if (proj.z <= observed.at(x, y) + delta) ++visible;
  }
  result.in_fov = in_view > 0;
  if (in_view > 0) {
    result.f_vis = static_cast<double>(visible) / static_cast<double>(in_view);
    result.area_fraction = static_cast<double>(footprint.size()) /
                           (static_cast<double>(intrinsics.width) * intrinsics.height);
  }
  return result;
}

StateUpdate update_object_state(GlobalObject& object, bool detected,
                                const VisibilityResult& visibility, const ChangeConfig& cfg) {
  StateUpdate update;
  if (detected) {
    update.redetected = object.state != LifeState::Recent;
    object.state = LifeState::Recent;
    object.confidence = 1.0;
    return update;
  }
  if (!visibility.in_fov) {
    update.became_retained = object.state == LifeState::Recent;
    object.state = LifeState::Retained;
    return update;  // confidence kept; it may simply be behind the camera
  }
  if (visibility.f_vis > cfg.tau_vis && visibility.area_fraction > cfg.tau_area) {
    // Expected to be seen, but was not: forget a little.
    object.confidence = std::max(0.0, object.confidence - cfg.eta);
    update.decayed = true;
    if (object.confidence <= 0.0) {
      object.state = LifeState::Removed;
      update.removed = true;
    } else {
      update.became_retained = object.state == LifeState::Recent;
      object.state = LifeState::Retained;
    }
    return update;
  }
  // In view but occluded (or a sliver below the area threshold): keep the
  // last confidence.
  update.became_retained = object.state == LifeState::Recent;
  object.state = LifeState::Retained;
  return update;
}

std::vector<ChangeEvent> run_block_update(Registry& registry, const BlockState& block,
                                          const std::vector<long>& detected_ids,
                                          const std::vector<long>& appeared_ids,
                                          const ChangeConfig& cfg) {
  cfg.validate();
  std::vector<ChangeEvent> events;
  const int last = block.block_frame_count() - 1;
  const FrameRecord& frame = block.block_frame(last);
  const Pose& pose = block.block_pose_raw(last);
  const DepthMap* observed = &block.block_depth(last);
  if (observed->empty() && frame.sensor_depth) observed = &*frame.sensor_depth;

  const std::set<long> detected(detected_ids.begin(), detected_ids.end());
  const std::set<long> appeared(appeared_ids.begin(), appeared_ids.end());

  for (long id : appeared_ids) {
    events.push_back({block.block_index, frame.frame_index, id, ChangeEventType::Appeared,
                      registry.objects.at(id).confidence});
  }

  for (auto& [id, object] : registry.objects) {
    const bool is_detected = detected.count(id) > 0;
    if (object.state == LifeState::Removed && !is_detected) continue;
    if (object.cloud.cloud().empty()) continue;

    VisibilityResult visibility;
    if (!is_detected) {
      visibility = visible_fraction(object.cloud.cloud(), pose, frame.intrinsics, *observed,
                                    cfg.delta);
    }
    const StateUpdate update = update_object_state(object, is_detected, visibility, cfg);

    if (update.redetected && !appeared.count(id)) {
      events.push_back({block.block_index, frame.frame_index, id, ChangeEventType::Redetected,
                        object.confidence});
    }
    if (update.removed) {
      events.push_back({block.block_index, frame.frame_index, id, ChangeEventType::Removed,
                        object.confidence});
    } else if (update.decayed) {
      events.push_back({block.block_index, frame.frame_index, id,
                        ChangeEventType::ConfidenceDecayed, object.confidence});
    } else if (update.became_retained) {
      events.push_back({block.block_index, frame.frame_index, id,
                        ChangeEventType::BecameRetained, object.confidence});
    }
  }
  return events;
}

}  // namespace scenemap
