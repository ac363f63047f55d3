#pragma once

#include <optional>
#include <unordered_set>
#include <vector>

#include "scenemap/ccma.hpp"
#include "scenemap/geometry.hpp"
#include "scenemap/provider.hpp"
#include "scenemap/stream.hpp"

namespace scenemap {

struct AlignConfig {
  int block_size = 10;      // n
  int keyframe_count = 3;   // k
  double near_thresh = 0.3;
  double far_thresh = 6.0;
  // Reserved for providers that expose per-pixel depth confidence; the
  // built-in providers do not, so it is currently unused.
  std::optional<double> min_pred_conf;
  int grid_stride = 4;      // pixel stride for map unprojection

  void validate() const;
};

struct BlockFrames {
  int block_index = 0;
  std::vector<FrameRecord> frames;
};

/// Tiles a stream into consecutive blocks of block_size frames. A trailing
/// partial block is emitted as-is when it has at least 2 frames, otherwise
/// its single frame is appended to the previous block.
class BlockPartitioner {
 public:
  BlockPartitioner(StreamReader& reader, int block_size);
  std::optional<BlockFrames> next();

 private:
  StreamReader& reader_;
  int block_size_;
  int next_block_index_ = 0;
  std::optional<BlockFrames> pending_;
  bool exhausted_ = false;
};

std::vector<BlockFrames> partition(const std::vector<FrameRecord>& frames, int block_size);

/// Indices of the k largest scores, ties toward the smaller index, returned
/// ascending.
std::vector<int> select_keyframes(const std::vector<double>& scores, int k);

/// Closed-form least squares for s minimizing ||mask * (s*pred - sensor)||^2.
/// The mask keeps pixels where both depths are valid and the sensor value
/// lies strictly between the near/far thresholds. nullopt when the mask is
/// empty.
std::optional<double> estimate_scale(const DepthMap& pred, const DepthMap& sensor,
                                     const AlignConfig& cfg);

/// Median of the finite scales (mean of the central pair for even counts).
/// Throws NoValidScaleError when no finite scale exists.
double block_scale(const std::vector<std::optional<double>>& scales);

/// Multiplies every predicted depth and every extrinsic translation by
/// scale; rotations are untouched.
void rescale(ProviderOutput& output, double scale);

/// Delta such that compose(current_ref, delta) == global_ref.
Pose compute_delta(const Pose& current_ref, const Pose& global_ref);

struct TrajectoryEntry {
  long frame_index = -1;
  double timestamp = 0.0;
  Pose raw;
  Pose smoothed;
};

/// Keep-first voxel-grid subsampled accumulation cloud.
class VoxelCloud {
 public:
  explicit VoxelCloud(double voxel_size = 0.02) : voxel_size_(voxel_size) {}

  bool insert(const Eigen::Vector3d& point, long frame_index);
  void rebuild_index();  // after deserialization

  double voxel_size() const { return voxel_size_; }
  void set_voxel_size(double v) { voxel_size_ = v; }
  const PointCloud& cloud() const { return cloud_; }
  PointCloud& cloud() { return cloud_; }
  size_t size() const { return cloud_.size(); }

 private:
  struct VoxelKey {
    std::int64_t x, y, z;
    bool operator==(const VoxelKey&) const = default;
  };
  struct VoxelKeyHash {
    size_t operator()(const VoxelKey& k) const;
  };
  VoxelKey key_of(const Eigen::Vector3d& p) const;

  double voxel_size_;
  PointCloud cloud_;
  std::unordered_set<VoxelKey, VoxelKeyHash> occupied_;
};

/// Incrementally built global state: rolling reference extrinsic, keyframe
/// memory, trajectory and the accumulated cloud.
struct GlobalMap {
  Pose reference;             // E_ref
  bool has_reference = false;
  std::vector<FrameRecord> keyframes;  // previous block's keyframes
  std::vector<TrajectoryEntry> trajectory;
  VoxelCloud cloud;
  double last_block_scale = 1.0;
};

/// Everything the downstream stages need about one aligned block.
struct BlockState {
  int block_index = 0;
  std::vector<FrameRecord> list_frames;  // previous keyframes ++ block frames
  int anchor_count = 0;
  ProviderOutput provider;               // rescaled
  std::vector<std::optional<double>> frame_scales;
  double scale = 1.0;
  bool scale_from_sensor = false;
  bool scale_fallback = false;
  Pose delta;
  std::vector<Pose> aligned;           // raw aligned, per list frame
  std::vector<Pose> aligned_smoothed;  // anchors copy raw
  std::vector<int> keyframe_positions;  // within block frames

  int block_frame_count() const { return static_cast<int>(list_frames.size()) - anchor_count; }
  const FrameRecord& block_frame(int i) const { return list_frames[anchor_count + i]; }
  const Pose& block_pose_raw(int i) const { return aligned[anchor_count + i]; }
  const Pose& block_pose_smoothed(int i) const { return aligned_smoothed[anchor_count + i]; }
  const DepthMap& block_depth(int i) const { return provider.predicted_depths[anchor_count + i]; }
};

/// The frame list the provider must be invoked on for this block.
std::vector<FrameRecord> make_frame_list(const GlobalMap& map, const BlockFrames& block);

/// Scales, aligns and commits one block: estimates the depth scale from
/// sensor depth when available, rescales the provider output, aligns all
/// list extrinsics to the rolling reference, smooths block poses, selects
/// keyframes, advances the reference, extends the trajectory and unprojects
/// the block's depth into the map cloud.
BlockState align_block(GlobalMap& map, int block_index, std::vector<FrameRecord> list_frames,
                       int anchor_count, ProviderOutput provider_output, const AlignConfig& cfg,
                       const SmootherConfig& smoother_cfg, bool smoothing_enabled = true);

double frame_score(const FrameRecord& frame, const DepthMap* fallback_depth);

}  // namespace scenemap
