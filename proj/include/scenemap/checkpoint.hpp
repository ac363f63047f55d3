#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scenemap/block_aligner.hpp"
#include "scenemap/change_detector.hpp"
#include "scenemap/tracker.hpp"

namespace scenemap {

/// Everything the pipeline needs to continue after a restart. Keyframe
/// records are stored by index and re-read from the immutable stream on
/// resume.
struct PipelineState {
  std::uint64_t config_hash = 0;
  int next_block_index = 0;
  long next_frame_index = 0;
  GlobalMap map;  // keyframes left empty in the serialized form
  std::vector<long> keyframe_indices;
  TrackerState tracker;
  std::vector<ChangeEvent> events;
  std::string report_json;
};

void save_checkpoint(const std::string& path, const PipelineState& state);
PipelineState load_checkpoint(const std::string& path);

struct CheckpointSummary {
  std::uint64_t config_hash = 0;
  int next_block_index = 0;
  long next_frame_index = 0;
  size_t trajectory_size = 0;
  size_t map_points = 0;
  size_t object_count = 0;
  size_t event_count = 0;
};

CheckpointSummary inspect_checkpoint(const std::string& path);

}  // namespace scenemap
