#pragma once

#include <set>
#include <string>
#include <vector>

#include "scenemap/block_aligner.hpp"
#include "scenemap/tracker.hpp"

namespace scenemap {

struct ChangeConfig {
  double delta = 0.001;  // visibility depth tolerance (meters)
  double eta = 0.34;     // confidence decay per missed visible block
  double tau_vis = 0.0;
  double tau_area = 0.0;

  void validate() const;
};

enum class ChangeEventType { Appeared, Redetected, BecameRetained, ConfidenceDecayed, Removed };

const char* to_string(ChangeEventType type);

struct ChangeEvent {
  int block_index = 0;
  long frame_index = 0;
  long global_id = 0;
  ChangeEventType type = ChangeEventType::Appeared;
  double confidence_after = 1.0;
};

struct VisibilityResult {
  double f_vis = 0.0;
  double area_fraction = 0.0;
  bool in_fov = false;
};

/// Projects the object's points into the given view. A projected pixel is
/// visible when its depth does not exceed the observed depth plus delta;
/// pixels with invalid observed depth count as visible. area_fraction is the
/// distinct-pixel footprint over the whole image.
VisibilityResult visible_fraction(const PointCloud& object_points, const Pose& pose,
                                  const Intrinsics& intrinsics, const DepthMap& observed,
                                  double delta);

struct StateUpdate {
  bool became_retained = false;
  bool decayed = false;
  bool removed = false;
  bool redetected = false;
};

/// One per-block state step: detection resets to Recent with full
/// confidence; an object out of view or fully occluded is Retained with its
/// confidence kept; a visible undetected object decays and is Removed when
/// the confidence reaches zero.
StateUpdate update_object_state(GlobalObject& object, bool detected,
                                const VisibilityResult& visibility, const ChangeConfig& cfg);

/// Evaluates every non-Removed object against the block's last frame and
/// emits the block's change events (Appeared events come first, then one
/// event per state transition, ordered by object id).
std::vector<ChangeEvent> run_block_update(Registry& registry, const BlockState& block,
                                          const std::vector<long>& detected_ids,
                                          const std::vector<long>& appeared_ids,
                                          const ChangeConfig& cfg);

}  // namespace scenemap
