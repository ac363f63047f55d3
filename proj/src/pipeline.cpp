#include "scenemap/pipeline.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "scenemap/errors.hpp"
#include "scenemap/log.hpp"
#include "scenemap/metrics.hpp"
#include "scenemap/spatial_query.hpp"

namespace scenemap {

using nlohmann::json;

namespace {

// Fixed palette; object colors cycle by id.
constexpr std::uint8_t kPalette[12][3] = {
    {230, 25, 75},  {60, 180, 75},   {255, 225, 25}, {0, 130, 200},
    {245, 130, 48}, {145, 30, 180},  {70, 240, 240}, {240, 50, 230},
    {210, 245, 60}, {250, 190, 212}, {0, 128, 128},  {220, 190, 255}};

FrameRecord load_frame_by_index(StreamReader& reader, long frame_index) {
  reader.seek_to_frame(frame_index);
  std::optional<FrameRecord> record = reader.next();
  if (!record || record->frame_index != frame_index) {
    throw CorruptCheckpointError("checkpointed keyframe " + std::to_string(frame_index) +
                                 " not found in stream");
  }
  return std::move(*record);
}

}  // namespace

Pipeline::Pipeline(PipelineConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  config_hash_ = cfg_.hash();
  map_.cloud.set_voxel_size(cfg_.map_voxel_size);
  init_provider();
}

Pipeline::Pipeline(PipelineConfig cfg, const std::string& checkpoint_path) : cfg_(std::move(cfg)) {
  cfg_.validate();
  config_hash_ = cfg_.hash();
  init_provider();

  PipelineState state = load_checkpoint(checkpoint_path);
  if (state.config_hash != config_hash_) {
    throw ConfigHashMismatchError("checkpoint was written with a different configuration");
  }
  map_ = std::move(state.map);
  tracker_ = std::move(state.tracker);
  events_ = std::move(state.events);
  report_json_ = std::move(state.report_json);
  next_block_index_ = state.next_block_index;
  next_frame_index_ = state.next_frame_index;

  StreamReader reader(cfg_.manifest);
  for (long idx : state.keyframe_indices) {
    map_.keyframes.push_back(load_frame_by_index(reader, idx));
  }
}

Pipeline::~Pipeline() {
  if (queue_) queue_->close();
  if (ingest_thread_.joinable()) ingest_thread_.join();
}

void Pipeline::init_provider() {
  if (cfg_.provider == "synthetic") {
    scene_ = std::make_shared<SyntheticScene>(SceneSpec::from_file(cfg_.scene_spec));
    provider_ = std::make_unique<SyntheticProvider>(scene_);
  } else {
    const std::string root = std::filesystem::path(cfg_.manifest).parent_path().string();
    provider_ = std::make_unique<FileProvider>(root.empty() ? "." : root, cfg_.tracks_dir);
  }
}

void Pipeline::start_ingest(long start_frame) {
  queue_ = std::make_unique<BoundedQueue<BlockFrames>>(2);
  ingest_thread_ = std::thread([this, start_frame] {
    try {
      StreamReader reader(cfg_.manifest);
      reader.seek_to_frame(start_frame);
      BlockPartitioner partitioner(reader, cfg_.align.block_size);
      while (std::optional<BlockFrames> block = partitioner.next()) {
        queue_->push(std::move(*block));
      }
    } catch (...) {
      ingest_error_ = std::current_exception();
    }
    queue_->close();
  });
  ingest_started_ = true;
}

std::optional<BlockFrames> Pipeline::next_block() {
  if (!ingest_started_) start_ingest(next_frame_index_);
  std::optional<BlockFrames> block = queue_->pop();
  if (!block && ingest_error_) std::rethrow_exception(ingest_error_);
  return block;
}

bool Pipeline::step() {
  std::optional<BlockFrames> block = next_block();
  if (!block) return false;
  const auto t0 = std::chrono::steady_clock::now();

  const int block_index = next_block_index_;
  const int anchor_count = static_cast<int>(map_.keyframes.size());
  std::vector<FrameRecord> list = make_frame_list(map_, *block);

  const Intrinsics& intr = list.front().intrinsics;
  const std::vector<Eigen::Vector2d> queries =
      grid_query_points(intr.width, intr.height, cfg_.tracker.grid_stride);
  ProviderOutput output = provider_->infer(list, queries);

  BlockState state = align_block(map_, block_index, std::move(list), anchor_count,
                                 std::move(output), cfg_.align, cfg_.smoother,
                                 cfg_.smoothing_enabled);
  const BlockIntegration integration = integrate_block(tracker_, state, cfg_.tracker);
  const std::vector<ChangeEvent> block_events = run_block_update(
      tracker_.registry, state, integration.detected_ids, integration.appeared_ids, cfg_.change);
  events_.insert(events_.end(), block_events.begin(), block_events.end());

  next_block_index_ = block_index + 1;
  next_frame_index_ = state.list_frames.back().frame_index + 1;

  const double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  {
    json entry;
    entry["block_index"] = block_index;
    json scales = json::array();
    for (const auto& s : state.frame_scales) scales.push_back(s ? json(*s) : json(nullptr));
    entry["frame_scales"] = scales;
    entry["block_scale"] = state.scale;
    entry["scale_from_sensor"] = state.scale_from_sensor;
    entry["scale_fallback"] = state.scale_fallback;
    json delta = json::array();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) delta.push_back(state.delta.rotation()(r, c));
    for (int r = 0; r < 3; ++r) delta.push_back(state.delta.translation()(r));
    entry["delta"] = delta;
    json keyframes = json::array();
    for (int pos : state.keyframe_positions) {
      keyframes.push_back(state.block_frame(pos).frame_index);
    }
    entry["keyframes"] = keyframes;
    entry["frames"] = state.block_frame_count();
    entry["ms"] = ms;

    json report = json::parse(report_json_);
    report.push_back(entry);
    report_json_ = report.dump();
  }

  if (cfg_.checkpoint_every > 0 && (next_block_index_ % cfg_.checkpoint_every) == 0) {
    write_checkpoint();
  }
  SCENEMAP_LOG_INFO("block ", block_index, " done: scale ", state.scale, ", ",
                    state.block_frame_count(), " frames, ", tracker_.registry.objects.size(),
                    " objects");
  return true;
}

void Pipeline::run() {
  while (step()) {
  }
  finalize();
}

std::string Pipeline::output_path(const std::string& name) const {
  return (std::filesystem::path(cfg_.output_dir) / name).string();
}

void Pipeline::write_checkpoint() {
  std::filesystem::create_directories(cfg_.output_dir);
  PipelineState state;
  state.config_hash = config_hash_;
  state.next_block_index = next_block_index_;
  state.next_frame_index = next_frame_index_;
  state.map = map_;
  state.map.keyframes.clear();
  for (const FrameRecord& kf : map_.keyframes) state.keyframe_indices.push_back(kf.frame_index);
  state.tracker = tracker_;
  state.events = events_;
  state.report_json = report_json_;
  save_checkpoint(output_path("checkpoint.bin"), state);
}

std::string Pipeline::trajectory_to_tum(const std::vector<TrajectoryEntry>& trajectory,
                                        bool smoothed) {
  std::string out;
  out.reserve(trajectory.size() * 96);
  for (const TrajectoryEntry& t : trajectory) {
    write_tum_line(out, t.timestamp, smoothed ? t.smoothed : t.raw);
  }
  return out;
}

std::string registry_to_json(const Registry& registry) {
  json doc;
  json objects = json::array();
  for (const auto& [id, object] : registry.objects) {
    json o;
    o["global_id"] = id;
    o["class"] = object.class_label;
    o["state"] = to_string(object.state);
    o["confidence"] = object.confidence;
    o["first_seen"] = object.first_seen;
    o["last_seen"] = object.last_seen;
    o["born_block"] = object.born_block;
    o["last_detected_block"] = object.last_detected_block;
    o["point_count"] = object.cloud.size();
    if (!object.cloud.cloud().empty()) {
      const Eigen::Vector3d centroid = component_median(object.cloud.cloud().points);
      o["centroid"] = {centroid.x(), centroid.y(), centroid.z()};
      Eigen::Vector3d lo = object.cloud.cloud().points.front();
      Eigen::Vector3d hi = lo;
      for (const auto& p : object.cloud.cloud().points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
      }
      o["bbox"] = {{"min", {lo.x(), lo.y(), lo.z()}}, {"max", {hi.x(), hi.y(), hi.z()}}};
    }
    json medians = json::array();
    for (const MedianPoint& m : object.medians) {
      medians.push_back({{"frame_index", m.frame_index},
                         {"point", {m.point.x(), m.point.y(), m.point.z()}}});
    }
    o["medians"] = medians;
    objects.push_back(std::move(o));
  }
  doc["objects"] = objects;
  doc["next_global_id"] = registry.next_global_id;
  doc["untracked_detections"] = registry.untracked.size();
  return doc.dump(2);
}

std::string event_to_json(const ChangeEvent& event) {
  json e;
  e["block_index"] = event.block_index;
  e["frame_index"] = event.frame_index;
  e["global_id"] = event.global_id;
  e["event"] = to_string(event.type);
  e["confidence_after"] = event.confidence_after;
  return e.dump();
}

std::string events_to_jsonl(const std::vector<ChangeEvent>& events) {
  std::string out;
  for (const ChangeEvent& e : events) {
    out += event_to_json(e);
    out += '\n';
  }
  return out;
}

std::vector<PlyVertex> map_to_ply_vertices(const GlobalMap& map, const Registry& registry) {
  std::vector<PlyVertex> vertices;
  vertices.reserve(map.cloud.size());
  for (const auto& p : map.cloud.cloud().points) {
    PlyVertex v;
    v.x = static_cast<float>(p.x());
    v.y = static_cast<float>(p.y());
    v.z = static_cast<float>(p.z());
    vertices.push_back(v);
  }
  for (const auto& [id, object] : registry.objects) {
    const auto& color = kPalette[static_cast<size_t>(id) % 12];
    for (const auto& p : object.cloud.cloud().points) {
      PlyVertex v;
      v.x = static_cast<float>(p.x());
      v.y = static_cast<float>(p.y());
      v.z = static_cast<float>(p.z());
      v.r = color[0];
      v.g = color[1];
      v.b = color[2];
      v.object_id = static_cast<std::uint32_t>(id);
      vertices.push_back(v);
    }
  }
  return vertices;
}

void Pipeline::finalize() {
  std::filesystem::create_directories(cfg_.output_dir);

  {
    std::ofstream os(output_path("trajectory.tum"));
    os << trajectory_to_tum(map_.trajectory, false);
  }
  {
    std::ofstream os(output_path("trajectory_smoothed.tum"));
    os << trajectory_to_tum(map_.trajectory, true);
  }
  write_ply(output_path("map.ply"), map_to_ply_vertices(map_, tracker_.registry));
  {
    std::ofstream os(output_path("registry.json"));
    os << registry_to_json(tracker_.registry) << '\n';
  }
  {
    std::vector<ChangeEvent> sorted = events_;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const ChangeEvent& a, const ChangeEvent& b) {
                       return a.frame_index < b.frame_index;
                     });
    std::ofstream os(output_path("events.jsonl"));
    os << events_to_jsonl(sorted);
  }
  {
    json report;
    report["blocks"] = json::parse(report_json_);
    report["block_count"] = next_block_index_;
    report["config_hash"] = config_hash_;
    report["frames"] = map_.trajectory.size();
    report["map_points"] = map_.cloud.size();
    report["objects"] = tracker_.registry.objects.size();
    std::ofstream os(output_path("run_report.json"));
    os << report.dump(2) << '\n';
  }
  write_checkpoint();
}

}  // namespace scenemap
