#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "scenemap/block_aligner.hpp"
#include "scenemap/geometry.hpp"
#include "scenemap/stream.hpp"

namespace scenemap {

struct TrackerConfig {
  double track_conf_thresh = 0.1;  // strictly-above keep rule
  int grid_stride = 8;
  int erosion_radius = 1;
  double bbox_iou_thresh = 0.25;
  double chamfer_thresh = 0.30;  // meters
  double object_voxel_size = 0.02;

  void validate() const;
};

enum class LifeState { Recent, Retained, Removed };

const char* to_string(LifeState state);
LifeState life_state_from_string(const std::string& s);

constexpr int kEmptyRecord = -1;  // tracklet got no mask this frame
constexpr int kBackground = -1;   // grid point covered by no mask

struct TrackletRecord {
  long frame_index = -1;
  int mask_index = kEmptyRecord;
};

struct MedianPoint {
  long frame_index = -1;
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
};

/// A within-list identity chain: per-frame mask assignments plus the points
/// voting for it.
struct Tracklet {
  long global_id = 0;
  std::string class_label;
  std::vector<TrackletRecord> records;
  std::vector<int> point_ids;  // indices into the list's query set
  bool born_this_list = false;
  PointCloud block_points;
  std::vector<MedianPoint> block_medians;
};

/// Persistent 3D object: subsampled cloud, per-frame medians, identity
/// records and the temporal state owned by the change detector.
struct GlobalObject {
  long global_id = 0;
  std::string class_label;
  VoxelCloud cloud;
  std::vector<MedianPoint> medians;
  std::vector<TrackletRecord> records;
  long first_seen = -1;
  long last_seen = -1;
  int last_detected_block = -1;
  int born_block = -1;
  LifeState state = LifeState::Recent;
  double confidence = 1.0;
};

struct UntrackedDetection {
  long frame_index = -1;
  int mask_index = -1;
  std::string class_label;
};

struct Registry {
  std::map<long, GlobalObject> objects;  // keyed by global_id
  long next_global_id = 1;
  std::vector<UntrackedDetection> untracked;
};

/// Tracker memory surviving across blocks: the registry plus the mask ->
/// object assignments of frames that may anchor the next frame list.
struct TrackerState {
  Registry registry;
  std::map<long, std::map<int, long>> mask_assignments;  // frame_index -> mask -> id
};

/// Morphological erosion with a square structuring element of half-width
/// radius. May produce an empty mask.
BinaryMask erode_mask(const BinaryMask& mask, int radius);

/// Strictly-above confidence keep rule.
inline bool track_kept(const TrackPoint& point, double thresh) {
  return point.confidence > thresh;
}

/// Per-frame keep flags for every trajectory.
std::vector<std::vector<bool>> filter_tracks(const std::vector<TrackTrajectory>& tracks,
                                             double thresh);

/// Label per grid point: covering mask index (ties resolved by the higher
/// detection confidence, then the smaller mask index) or kBackground.
/// Dropped masks are passed as nullptr.
std::vector<int> sample_grid_labels(const std::vector<const BinaryMask*>& masks,
                                    const std::vector<double>& mask_confidences,
                                    const std::vector<Eigen::Vector2d>& grid_points);

struct SupportVote {
  long tracklet_id = 0;
  double u = 0.0;
  double v = 0.0;
};

/// counts[tracklet][mask] = number of propagated points inside the mask.
std::map<long, std::map<int, int>> support_matrix(const std::vector<SupportVote>& votes,
                                                  const std::vector<const BinaryMask*>& masks);

struct AssignmentResult {
  std::vector<std::pair<long, int>> matches;  // (tracklet id, mask index)
  std::vector<long> unmatched_tracklets;
  std::vector<int> unmatched_masks;
};

/// Mutual best-support assignment with a class-consistency gate: per mask
/// the strongest tracklet becomes its candidate, then each tracklet keeps
/// the candidate mask with its highest support. Zero support never matches.
AssignmentResult mutual_assign(const std::map<long, std::map<int, int>>& support,
                               const std::map<long, std::string>& tracklet_classes,
                               const std::vector<std::string>& mask_classes);

/// Appends per-frame outcomes: matched tracklets record the mask; unmatched
/// masks start a fresh tracklet only on the first frame of the list and are
/// recorded untracked otherwise; unmatched tracklets record an empty state.
void update_tracklets(std::vector<Tracklet>& live, const AssignmentResult& result,
                      const std::vector<InstanceMask>& masks, long frame_index,
                      bool first_of_list, long& next_global_id,
                      std::vector<UntrackedDetection>& untracked,
                      std::vector<long>* born_ids = nullptr);

struct Aabb {
  Eigen::Vector3d lo = Eigen::Vector3d::Zero();
  Eigen::Vector3d hi = Eigen::Vector3d::Zero();
};

Aabb bounding_box(const PointCloud& cloud);
double bbox_iou(const Aabb& a, const Aabb& b);

/// Symmetric Chamfer distance: mean of both directed mean nearest-neighbor
/// distances.
double chamfer_distance(const std::vector<Eigen::Vector3d>& a,
                        const std::vector<Eigen::Vector3d>& b);

struct MergeDecision {
  long new_id = 0;       // tracklet born this block
  long existing_id = 0;  // registry object absorbing it
};

/// Greedy best-first matching on bounding-box IoU above the threshold;
/// classes must agree and each side merges at most once.
std::vector<MergeDecision> reid_bbox(
    const std::vector<std::pair<long, const PointCloud*>>& new_clouds,
    const std::vector<std::pair<long, const GlobalObject*>>& candidates, double iou_thresh);

/// Closest historical median cloud of the same class under the Chamfer
/// threshold, or -1.
long reid_chamfer(const std::vector<Eigen::Vector3d>& new_medians,
                  const std::string& class_label,
                  const std::vector<std::pair<long, const GlobalObject*>>& candidates,
                  double thresh);

struct BlockIntegration {
  std::vector<long> detected_ids;  // objects that received a mask this block
  std::vector<long> appeared_ids;  // objects created this block
  int untracked_count = 0;
};

/// Runs the per-frame voting over one aligned block, accumulates instance
/// geometry, and folds new tracklets into the registry via bounding-box and
/// median-cloud re-identification.
BlockIntegration integrate_block(TrackerState& state, const BlockState& block,
                                 const TrackerConfig& cfg);

}  // namespace scenemap
