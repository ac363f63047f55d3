#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "scenemap/block_aligner.hpp"
#include "scenemap/ccma.hpp"
#include "scenemap/change_detector.hpp"
#include "scenemap/tracker.hpp"

namespace scenemap {

struct PipelineConfig {
  // stream
  std::string manifest;
  std::string provider = "file";  // "file" | "synthetic"
  std::string scene_spec;         // synthetic provider only
  std::string tracks_dir;         // default: <manifest dir>/tracks

  AlignConfig align;
  SmootherConfig smoother;
  bool smoothing_enabled = true;
  TrackerConfig tracker;
  ChangeConfig change;

  // output
  std::string output_dir = "out";
  double map_voxel_size = 0.02;
  int checkpoint_every = 1;  // blocks; 0 disables checkpoints

  void validate() const;
  nlohmann::json to_json() const;
  static PipelineConfig from_json(const nlohmann::json& doc);

  /// FNV-1a over the canonical JSON form; persists into checkpoints.
  std::uint64_t hash() const;
};

/// Loads a config file and applies "a.b.c=value" overrides; relative paths
/// are resolved against the config file's directory.
PipelineConfig load_config(const std::string& path, const std::vector<std::string>& overrides);

PipelineConfig config_from_json_text(const std::string& text,
                                     const std::vector<std::string>& overrides,
                                     const std::string& base_dir);

std::uint64_t fnv1a64(const std::string& data);

}  // namespace scenemap
