#pragma once

#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "scenemap/block_aligner.hpp"
#include "scenemap/bounded_queue.hpp"
#include "scenemap/change_detector.hpp"
#include "scenemap/checkpoint.hpp"
#include "scenemap/config.hpp"
#include "scenemap/ply_io.hpp"
#include "scenemap/provider.hpp"
#include "scenemap/synthetic.hpp"
#include "scenemap/tracker.hpp"

namespace scenemap {

/// Block-by-block engine: an ingest thread prefetches frames into a bounded
/// queue (frame ingestion of the next block overlaps processing of the
/// current one); the pipeline thread is the only mutator of the map and
/// registry.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig cfg);
  Pipeline(PipelineConfig cfg, const std::string& checkpoint_path);  // resume
  ~Pipeline();

  Pipeline(const Pipeline&) = delete;
  Pipeline& operator=(const Pipeline&) = delete;

  /// Processes the next block. Returns false when the stream is exhausted.
  bool step();

  /// Runs to completion and writes all outputs.
  void run();

  /// Writes trajectory, map, registry, events, report and final checkpoint.
  void finalize();

  const PipelineConfig& config() const { return cfg_; }
  const GlobalMap& map() const { return map_; }
  const Registry& registry() const { return tracker_.registry; }
  const std::vector<ChangeEvent>& events() const { return events_; }
  int blocks_processed() const { return next_block_index_; }

  static std::string trajectory_to_tum(const std::vector<TrajectoryEntry>& trajectory,
                                       bool smoothed);

 private:
  void init_provider();
  void start_ingest(long start_frame);
  std::optional<BlockFrames> next_block();
  void write_checkpoint();
  std::string output_path(const std::string& name) const;

  PipelineConfig cfg_;
  std::uint64_t config_hash_ = 0;
  std::unique_ptr<GeometryProvider> provider_;
  std::shared_ptr<SyntheticScene> scene_;

  GlobalMap map_;
  TrackerState tracker_;
  std::vector<ChangeEvent> events_;
  std::string report_json_ = "[]";

  int next_block_index_ = 0;
  long next_frame_index_ = 0;

  std::unique_ptr<BoundedQueue<BlockFrames>> queue_;
  std::thread ingest_thread_;
  std::exception_ptr ingest_error_;
  bool ingest_started_ = false;
};

// JSON export helpers shared by the pipeline and the C API.
std::string registry_to_json(const Registry& registry);
std::string events_to_jsonl(const std::vector<ChangeEvent>& events);
std::string event_to_json(const ChangeEvent& event);

/// Semantic map: accumulated background cloud (object_id 0) followed by the
/// object clouds, colored per object.
std::vector<PlyVertex> map_to_ply_vertices(const GlobalMap& map, const Registry& registry);

}  // namespace scenemap
