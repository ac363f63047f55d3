#include "scenemap/block_aligner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "scenemap/errors.hpp"
#include "scenemap/log.hpp"

namespace scenemap {

void AlignConfig::validate() const {
  if (block_size < 2) throw ConfigError("align: block_size must be >= 2");
  if (keyframe_count < 1 || keyframe_count >= block_size) {
    throw ConfigError("align: keyframe_count must satisfy 0 < k < block_size");
  }
  if (!(near_thresh > 0.0) || !(far_thresh > near_thresh)) {
    throw ConfigError("align: need 0 < near_thresh < far_thresh");
  }
  if (grid_stride < 1) throw ConfigError("align: grid_stride must be >= 1");
}

BlockPartitioner::BlockPartitioner(StreamReader& reader, int block_size)
    : reader_(reader), block_size_(block_size) {
  if (block_size < 2) throw ConfigError("partition: block_size must be >= 2");
}

std::optional<BlockFrames> BlockPartitioner::next() {
  // Hold one completed block back until we know whether the stream ends in a
  // single leftover frame that must be merged into it.
  while (!exhausted_) {
    BlockFrames block;
    block.block_index = next_block_index_;
    while (static_cast<int>(block.frames.size()) < block_size_) {
      std::optional<FrameRecord> record = reader_.next();
      if (!record) {
        exhausted_ = true;
        break;
      }
      block.frames.push_back(std::move(*record));
    }
    if (block.frames.empty()) break;
    if (exhausted_ && block.frames.size() == 1 && pending_) {
      pending_->frames.push_back(std::move(block.frames.front()));
      break;
    }
    block.block_index = next_block_index_++;
    std::optional<BlockFrames> ready = std::move(pending_);
    pending_ = std::move(block);
    if (ready) return ready;
  }
  std::optional<BlockFrames> ready = std::move(pending_);
  pending_.reset();
  return ready;
}

std::vector<BlockFrames> partition(const std::vector<FrameRecord>& frames, int block_size) {
  if (block_size < 2) throw ConfigError("partition: block_size must be >= 2");
  std::vector<BlockFrames> blocks;
  for (size_t i = 0; i < frames.size(); i += block_size) {
    BlockFrames block;
    block.block_index = static_cast<int>(blocks.size());
    const size_t end = std::min(frames.size(), i + block_size);
    block.frames.assign(frames.begin() + i, frames.begin() + end);
    blocks.push_back(std::move(block));
  }
  if (blocks.size() >= 2 && blocks.back().frames.size() == 1) {
    blocks[blocks.size() - 2].frames.push_back(std::move(blocks.back().frames.front()));
    blocks.pop_back();
  }
  return blocks;
}

std::vector<int> select_keyframes(const std::vector<double>& scores, int k) {
  if (k < 1 || k >= static_cast<int>(scores.size())) {
    throw ConfigError("select_keyframes: need 0 < k < frame count");
  }
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

std::optional<double> estimate_scale(const DepthMap& pred, const DepthMap& sensor,
                                     const AlignConfig& cfg) {
  if (pred.width() != sensor.width() || pred.height() != sensor.height()) {
    throw DataError("estimate_scale: depth size mismatch");
  }
  double num = 0.0;
  double den = 0.0;
  size_t kept = 0;
  for (size_t i = 0; i < pred.values().size(); ++i) {
    const float p = pred.values()[i];
    const float s = sensor.values()[i];
    if (!std::isfinite(p) || !std::isfinite(s)) continue;
    if (!(s > cfg.near_thresh && s < cfg.far_thresh)) continue;
    num += static_cast<double>(p) * s;
    den += static_cast<double>(p) * p;
    ++kept;
  }
  if (kept == 0 || den == 0.0) return std::nullopt;
  return num / den;
}

double block_scale(const std::vector<std::optional<double>>& scales) {
  std::vector<double> finite;
  for (const auto& s : scales) {
    if (s && std::isfinite(*s)) finite.push_back(*s);
  }
  if (finite.empty()) throw NoValidScaleError("all per-frame scales unusable");
  std::sort(finite.begin(), finite.end());
  const size_t n = finite.size();
  if (n % 2 == 1) return finite[n / 2];
  return 0.5 * (finite[n / 2 - 1] + finite[n / 2]);
}

void rescale(ProviderOutput& output, double scale) {
  if (!(scale > 0.0)) throw NonPositiveScaleError(std::to_string(scale));
  if (scale == 1.0) return;
  const float fscale = static_cast<float>(scale);
  for (DepthMap& depth : output.predicted_depths) {
    for (float& v : depth.values()) v *= fscale;
  }
  for (Pose& pose : output.extrinsics) {
    pose = Pose(pose.rotation(), pose.translation() * scale);
  }
}

Pose compute_delta(const Pose& current_ref, const Pose& global_ref) {
  return compose(invert(current_ref), global_ref);
}

size_t VoxelCloud::VoxelKeyHash::operator()(const VoxelKey& k) const {
  // FNV-1a over the three packed coordinates
  std::uint64_t h = 1469598103934665603ull;
  for (std::int64_t v : {k.x, k.y, k.z}) {
    std::uint64_t u = static_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      h ^= (u >> (i * 8)) & 0xff;
      h *= 1099511628211ull;
    }
  }
  return static_cast<size_t>(h);
}

VoxelCloud::VoxelKey VoxelCloud::key_of(const Eigen::Vector3d& p) const {
  return VoxelKey{static_cast<std::int64_t>(std::floor(p.x() / voxel_size_)),
                  static_cast<std::int64_t>(std::floor(p.y() / voxel_size_)),
                  static_cast<std::int64_t>(std::floor(p.z() / voxel_size_))};
}

bool VoxelCloud::insert(const Eigen::Vector3d& point, long frame_index) {
  if (!occupied_.insert(key_of(point)).second) return false;
  cloud_.append(point, frame_index);
  return true;
}

void VoxelCloud::rebuild_index() {
  occupied_.clear();
  for (const auto& p : cloud_.points) occupied_.insert(key_of(p));
}

std::vector<FrameRecord> make_frame_list(const GlobalMap& map, const BlockFrames& block) {
  std::vector<FrameRecord> list = map.keyframes;
  list.insert(list.end(), block.frames.begin(), block.frames.end());
  return list;
}

double frame_score(const FrameRecord& frame, const DepthMap* fallback_depth) {
  if (frame.feature_score) return *frame.feature_score;
  if (frame.sensor_depth) return fallback_feature_score(*frame.sensor_depth);
  if (fallback_depth) return fallback_feature_score(*fallback_depth);
  return 0.0;
}

BlockState align_block(GlobalMap& map, int block_index, std::vector<FrameRecord> list_frames,
                       int anchor_count, ProviderOutput provider_output, const AlignConfig& cfg,
                       const SmootherConfig& smoother_cfg, bool smoothing_enabled) {
  provider_output.validate(list_frames.size());

  BlockState state;
  state.block_index = block_index;
  state.list_frames = std::move(list_frames);
  state.anchor_count = anchor_count;
  state.provider = std::move(provider_output);

  // Metric scale from sensor depth, medianized over the list.
  bool any_sensor = false;
  for (size_t j = 0; j < state.list_frames.size(); ++j) {
    const FrameRecord& frame = state.list_frames[j];
    if (frame.sensor_depth) {
      any_sensor = true;
      state.frame_scales.push_back(
          estimate_scale(state.provider.predicted_depths[j], *frame.sensor_depth, cfg));
    } else {
      state.frame_scales.push_back(std::nullopt);
    }
  }
  if (any_sensor) {
    state.scale_from_sensor = true;
    try {
      state.scale = block_scale(state.frame_scales);
    } catch (const NoValidScaleError&) {
      state.scale = map.last_block_scale;
      state.scale_fallback = true;
      SCENEMAP_LOG_WARN("block ", block_index, ": no valid scale, falling back to ",
                        state.scale);
    }
  } else {
    state.scale = 1.0;  // monocular mode
  }
  rescale(state.provider, state.scale);

  // Right-multiplicative alignment to the rolling reference.
  const Pose current_ref = state.provider.extrinsics.front();
  if (map.has_reference) {
    state.delta = compute_delta(current_ref, map.reference);
  } else {
    state.delta = Pose::identity();
    map.reference = current_ref;
    map.has_reference = true;
  }
  state.aligned.reserve(state.provider.extrinsics.size());
  for (const Pose& pose : state.provider.extrinsics) {
    state.aligned.push_back(compose(pose, state.delta));
  }

  // Smooth the block frames' camera centers; anchors keep raw poses.
  state.aligned_smoothed = state.aligned;
  const int n_block = state.block_frame_count();
  if (smoothing_enabled && n_block >= 3) {
    std::vector<Pose> block_poses(state.aligned.begin() + anchor_count, state.aligned.end());
    std::vector<Pose> smoothed = smooth_block_poses(block_poses, smoother_cfg);
    std::copy(smoothed.begin(), smoothed.end(), state.aligned_smoothed.begin() + anchor_count);
  }

  // Keyframes of the current block anchor the next block's alignment.
  std::vector<double> scores;
  scores.reserve(n_block);
  for (int i = 0; i < n_block; ++i) {
    scores.push_back(frame_score(state.block_frame(i), &state.block_depth(i)));
  }
  int k = cfg.keyframe_count;
  if (k >= n_block) {
    k = n_block - 1;
    SCENEMAP_LOG_WARN("block ", block_index, ": keyframe_count clamped to ", k);
  }
  state.keyframe_positions = select_keyframes(scores, k);

  map.keyframes.clear();
  for (int pos : state.keyframe_positions) map.keyframes.push_back(state.block_frame(pos));
  map.reference = state.block_pose_smoothed(state.keyframe_positions.front());
  map.last_block_scale = state.scale;

  // Trajectory gains only the block's own frames; anchor duplicates were
  // already appended when their block was processed.
  for (int i = 0; i < n_block; ++i) {
    map.trajectory.push_back(TrajectoryEntry{state.block_frame(i).frame_index,
                                             state.block_frame(i).timestamp,
                                             state.block_pose_raw(i),
                                             state.block_pose_smoothed(i)});
  }

  // Raw poses feed the map cloud.
  for (int i = 0; i < n_block; ++i) {
    const PointCloud points = unproject(state.block_depth(i), state.block_frame(i).intrinsics,
                                        state.block_pose_raw(i), cfg.grid_stride);
    for (const auto& p : points.points) map.cloud.insert(p, state.block_frame(i).frame_index);
  }

  return state;
}

}  // namespace scenemap
