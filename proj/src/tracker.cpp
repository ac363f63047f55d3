#include "scenemap/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "scenemap/errors.hpp"
#include "scenemap/log.hpp"
#include "scenemap/spatial_query.hpp"

namespace scenemap {

void TrackerConfig::validate() const {
  if (track_conf_thresh < 0.0 || track_conf_thresh > 1.0) {
    throw ConfigError("tracker: track_conf_thresh must be in [0,1]");
  }
  if (grid_stride < 1) throw ConfigError("tracker: grid_stride must be >= 1");
  if (erosion_radius < 0) throw ConfigError("tracker: erosion_radius must be >= 0");
  if (bbox_iou_thresh < 0.0 || bbox_iou_thresh > 1.0) {
    throw ConfigError("tracker: bbox_iou_thresh must be in [0,1]");
  }
  if (!(chamfer_thresh > 0.0)) throw ConfigError("tracker: chamfer_thresh must be positive");
  if (!(object_voxel_size > 0.0)) throw ConfigError("tracker: object_voxel_size must be positive");
}

const char* to_string(LifeState state) {
  switch (state) {
    case LifeState::Recent: return "recent";
    case LifeState::Retained: return "retained";
    case LifeState::Removed: return "removed";
  }
  return "?";
}

LifeState life_state_from_string(const std::string& s) {
  if (s == "recent") return LifeState::Recent;
  if (s == "retained") return LifeState::Retained;
  if (s == "removed") return LifeState::Removed;
  throw DataError("unknown life state: " + s);
}

BinaryMask erode_mask(const BinaryMask& mask, int radius) {
  if (radius <= 0) return mask;
  BinaryMask out(mask.width, mask.height);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y)) continue;
      bool keep = true;
      for (int dy = -radius; dy <= radius && keep; ++dy) {
        for (int dx = -radius; dx <= radius && keep; ++dx) {
          const int nx = x + dx;
          const int ny = y + dy;
          if (nx < 0 || nx >= mask.width || ny < 0 || ny >= mask.height || !mask.at(nx, ny)) {
            keep = false;
          }
        }
      }
      out.at(x, y) = keep ? 1 : 0;
    }
  }
  return out;
}

std::vector<std::vector<bool>> filter_tracks(const std::vector<TrackTrajectory>& tracks,
                                             double thresh) {
  std::vector<std::vector<bool>> kept(tracks.size());
  for (size_t q = 0; q < tracks.size(); ++q) {
    kept[q].reserve(tracks[q].points.size());
    for (const TrackPoint& p : tracks[q].points) kept[q].push_back(track_kept(p, thresh));
  }
  return kept;
}

std::vector<int> sample_grid_labels(const std::vector<const BinaryMask*>& masks,
                                    const std::vector<double>& mask_confidences,
                                    const std::vector<Eigen::Vector2d>& grid_points) {
  std::vector<int> labels(grid_points.size(), kBackground);
  for (size_t q = 0; q < grid_points.size(); ++q) {
    const int x = static_cast<int>(std::lround(grid_points[q].x()));
    const int y = static_cast<int>(std::lround(grid_points[q].y()));
    double best_conf = -1.0;
    for (size_t mi = 0; mi < masks.size(); ++mi) {
      const BinaryMask* mask = masks[mi];
      if (!mask) continue;
      if (x < 0 || x >= mask->width || y < 0 || y >= mask->height) continue;
      if (!mask->at(x, y)) continue;
      if (mask_confidences[mi] > best_conf) {
        best_conf = mask_confidences[mi];
        labels[q] = static_cast<int>(mi);
      }
    }
  }
  return labels;
}

std::map<long, std::map<int, int>> support_matrix(const std::vector<SupportVote>& votes,
                                                  const std::vector<const BinaryMask*>& masks) {
  std::map<long, std::map<int, int>> counts;
  for (const SupportVote& vote : votes) {
    for (size_t mi = 0; mi < masks.size(); ++mi) {
      const BinaryMask* mask = masks[mi];
      if (!mask) continue;
      const int x = static_cast<int>(std::lround(vote.u));
      const int y = static_cast<int>(std::lround(vote.v));
      if (x < 0 || x >= mask->width || y < 0 || y >= mask->height) continue;
      if (mask->at(x, y)) ++counts[vote.tracklet_id][static_cast<int>(mi)];
    }
  }
  return counts;
}

AssignmentResult mutual_assign(const std::map<long, std::map<int, int>>& support,
                               const std::map<long, std::string>& tracklet_classes,
                               const std::vector<std::string>& mask_classes) {
  auto support_of = [&](long tid, int mi) -> int {
    auto t = support.find(tid);
    if (t == support.end()) return 0;
    auto m = t->second.find(mi);
    return m == t->second.end() ? 0 : m->second;
  };

  // Per-mask candidate: the class-compatible tracklet with the largest
  // support, ties toward the older (smaller) id.
  std::vector<long> candidate(mask_classes.size(), -1);
  for (size_t mi = 0; mi < mask_classes.size(); ++mi) {
    int best = 0;
    for (const auto& [tid, cls] : tracklet_classes) {
      if (cls != mask_classes[mi]) continue;
      const int s = support_of(tid, static_cast<int>(mi));
      if (s > best) {
        best = s;
        candidate[mi] = tid;
      }
    }
  }

  AssignmentResult result;
  std::vector<bool> mask_matched(mask_classes.size(), false);
  for (const auto& [tid, cls] : tracklet_classes) {
    int best_mask = -1;
    int best = 0;
    for (size_t mi = 0; mi < mask_classes.size(); ++mi) {
      if (candidate[mi] != tid) continue;
      const int s = support_of(tid, static_cast<int>(mi));
      if (s > best) {
        best = s;
        best_mask = static_cast<int>(mi);
      }
    }
    if (best_mask >= 0) {
      result.matches.emplace_back(tid, best_mask);
      mask_matched[best_mask] = true;
    } else {
      result.unmatched_tracklets.push_back(tid);
    }
  }
  for (size_t mi = 0; mi < mask_classes.size(); ++mi) {
    if (!mask_matched[mi]) result.unmatched_masks.push_back(static_cast<int>(mi));
  }
  return result;
}

void update_tracklets(std::vector<Tracklet>& live, const AssignmentResult& result,
                      const std::vector<InstanceMask>& masks, long frame_index,
                      bool first_of_list, long& next_global_id,
                      std::vector<UntrackedDetection>& untracked,
                      std::vector<long>* born_ids) {
  auto find_tracklet = [&](long tid) -> Tracklet* {
    for (Tracklet& t : live) {
      if (t.global_id == tid) return &t;
    }
    return nullptr;
  };
  for (const auto& [tid, mi] : result.matches) {
    if (Tracklet* t = find_tracklet(tid)) t->records.push_back({frame_index, mi});
  }
  for (long tid : result.unmatched_tracklets) {
    if (Tracklet* t = find_tracklet(tid)) t->records.push_back({frame_index, kEmptyRecord});
  }
  for (int mi : result.unmatched_masks) {
    if (first_of_list) {
      Tracklet t;
      t.global_id = next_global_id++;
      t.class_label = masks[mi].class_label;
      t.born_this_list = true;
      t.records.push_back({frame_index, mi});
      live.push_back(std::move(t));
      if (born_ids) born_ids->push_back(live.back().global_id);
    } else {
      untracked.push_back({frame_index, mi, masks[mi].class_label});
    }
  }
}

Aabb bounding_box(const PointCloud& cloud) {
  if (cloud.empty()) throw EmptyObjectError("bounding_box on empty cloud");
  Aabb box;
  box.lo = box.hi = cloud.points.front();
  for (const auto& p : cloud.points) {
    box.lo = box.lo.cwiseMin(p);
    box.hi = box.hi.cwiseMax(p);
  }
  return box;
}

double bbox_iou(const Aabb& a, const Aabb& b) {
  const Eigen::Vector3d lo = a.lo.cwiseMax(b.lo);
  const Eigen::Vector3d hi = a.hi.cwiseMin(b.hi);
  if ((hi - lo).minCoeff() <= 0.0) return 0.0;
  const double inter = (hi - lo).prod();
  const double va = (a.hi - a.lo).prod();
  const double vb = (b.hi - b.lo).prod();
  const double uni = va + vb - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

double chamfer_distance(const std::vector<Eigen::Vector3d>& a,
                        const std::vector<Eigen::Vector3d>& b) {
  if (a.empty() || b.empty()) throw EmptyObjectError("chamfer on empty cloud");
  auto directed = [](const std::vector<Eigen::Vector3d>& from,
                     const std::vector<Eigen::Vector3d>& to) {
    double sum = 0.0;
    for (const auto& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) best = std::min(best, (p - q).norm());
      sum += best;
    }
    return sum / static_cast<double>(from.size());
  };
  return 0.5 * (directed(a, b) + directed(b, a));
}

std::vector<MergeDecision> reid_bbox(
    const std::vector<std::pair<long, const PointCloud*>>& new_clouds,
    const std::vector<std::pair<long, const GlobalObject*>>& candidates, double iou_thresh) {
  struct ScoredPair {
    double iou;
    long existing_id;
    long new_id;
  };
  std::vector<ScoredPair> pairs;
  for (const auto& [new_id, cloud] : new_clouds) {
    if (!cloud || cloud->empty()) continue;
    const Aabb new_box = bounding_box(*cloud);
    for (const auto& [existing_id, object] : candidates) {
      if (object->cloud.cloud().empty()) continue;
      const double iou = bbox_iou(new_box, bounding_box(object->cloud.cloud()));
      if (iou > iou_thresh) pairs.push_back({iou, existing_id, new_id});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const ScoredPair& a, const ScoredPair& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.existing_id != b.existing_id) return a.existing_id < b.existing_id;
    return a.new_id < b.new_id;
  });
  std::set<long> used_new, used_existing;
  std::vector<MergeDecision> merges;
  for (const ScoredPair& p : pairs) {
    if (used_new.count(p.new_id) || used_existing.count(p.existing_id)) continue;
    used_new.insert(p.new_id);
    used_existing.insert(p.existing_id);
    merges.push_back({p.new_id, p.existing_id});
  }
  return merges;
}

long reid_chamfer(const std::vector<Eigen::Vector3d>& new_medians,
                  const std::string& class_label,
                  const std::vector<std::pair<long, const GlobalObject*>>& candidates,
                  double thresh) {
  if (new_medians.empty()) return -1;
  long best_id = -1;
  double best = thresh;
  for (const auto& [existing_id, object] : candidates) {
    if (object->class_label != class_label || object->medians.empty()) continue;
    std::vector<Eigen::Vector3d> historical;
    historical.reserve(object->medians.size());
    for (const auto& m : object->medians) historical.push_back(m.point);
    const double d = chamfer_distance(new_medians, historical);
    if (d < best) {
      best = d;
      best_id = existing_id;
    }
  }
  return best_id;
}

namespace {

struct ErodedFrame {
  std::vector<BinaryMask> storage;
  std::vector<const BinaryMask*> ptrs;  // nullptr when erosion emptied the mask
  std::vector<double> confidences;
  std::vector<std::string> classes;
};

ErodedFrame erode_frame(const FrameRecord& frame, int radius) {
  ErodedFrame out;
  out.storage.reserve(frame.masks.size());
  for (const InstanceMask& m : frame.masks) {
    out.storage.push_back(erode_mask(m.mask, radius));
    out.confidences.push_back(m.detection_confidence);
    out.classes.push_back(m.class_label);
  }
  for (const BinaryMask& m : out.storage) {
    out.ptrs.push_back(m.empty_mask() ? nullptr : &m);
  }
  return out;
}

// World points of the grid pixels covered by the mask, plus their median.
void accumulate_instance(Tracklet& tracklet, const BinaryMask& mask, const DepthMap& depth,
                         const Intrinsics& intrinsics, const Pose& raw_pose, long frame_index,
                         int stride) {
  const Pose world_from_cam = invert(raw_pose);
  std::vector<Eigen::Vector3d> frame_points;
  for (int y = 0; y < mask.height; y += stride) {
    for (int x = 0; x < mask.width; x += stride) {
      if (!mask.at(x, y)) continue;
      if (x >= depth.width() || y >= depth.height() || !depth.valid(x, y)) continue;
      const double z = depth.at(x, y);
      const Eigen::Vector3d cam((x - intrinsics.cx) * z / intrinsics.fx,
                                (y - intrinsics.cy) * z / intrinsics.fy, z);
      frame_points.push_back(world_from_cam.apply(cam));
    }
  }
  if (frame_points.empty()) return;
  for (const auto& p : frame_points) tracklet.block_points.append(p, frame_index);
  tracklet.block_medians.push_back({frame_index, component_median(frame_points)});
}

void fold_into_object(GlobalObject& object, const Tracklet& tracklet, long min_frame) {
  for (const TrackletRecord& r : tracklet.records) {
    if (r.frame_index < min_frame) continue;
    object.records.push_back(r);
    if (r.mask_index != kEmptyRecord) {
      if (object.first_seen < 0 || r.frame_index < object.first_seen) {
        object.first_seen = r.frame_index;
      }
      object.last_seen = std::max(object.last_seen, r.frame_index);
    }
  }
  for (size_t i = 0; i < tracklet.block_points.size(); ++i) {
    object.cloud.insert(tracklet.block_points.points[i], tracklet.block_points.frame_indices[i]);
  }
  for (const MedianPoint& m : tracklet.block_medians) object.medians.push_back(m);
}

}  // namespace

BlockIntegration integrate_block(TrackerState& state, const BlockState& block,
                                 const TrackerConfig& cfg) {
  cfg.validate();
  BlockIntegration summary;
  const auto& frames = block.list_frames;
  if (frames.empty()) return summary;
  const auto& queries = block.provider.query_points;
  const auto& tracks = block.provider.tracks;

  std::vector<Tracklet> live;
  std::vector<long> point_labels(queries.size(), 0);  // 0 = unlabeled

  // --- List head: inherit assignments from the anchor frame (or allocate
  // fresh ids; this is the only place new tracklets are born).
  const FrameRecord& head = frames.front();
  ErodedFrame head_eroded = erode_frame(head, cfg.erosion_radius);
  const std::vector<int> grid_labels =
      sample_grid_labels(head_eroded.ptrs, head_eroded.confidences, queries);

  std::map<int, long> head_mask_to_id;
  const auto known = state.mask_assignments.find(head.frame_index);
  for (size_t mi = 0; mi < head.masks.size(); ++mi) {
    if (!head_eroded.ptrs[mi]) continue;
    Tracklet t;
    t.class_label = head.masks[mi].class_label;
    if (known != state.mask_assignments.end() && known->second.count(static_cast<int>(mi))) {
      t.global_id = known->second.at(static_cast<int>(mi));
    } else {
      t.global_id = state.registry.next_global_id++;
      t.born_this_list = true;
      t.records.push_back({head.frame_index, static_cast<int>(mi)});
    }
    head_mask_to_id[static_cast<int>(mi)] = t.global_id;
    state.mask_assignments[head.frame_index][static_cast<int>(mi)] = t.global_id;
    live.push_back(std::move(t));
  }

  auto tracklet_by_id = [&live](long tid) -> Tracklet* {
    for (Tracklet& t : live) {
      if (t.global_id == tid) return &t;
    }
    return nullptr;
  };

  for (size_t q = 0; q < queries.size(); ++q) {
    if (grid_labels[q] == kBackground) continue;
    if (q < tracks.size() && !track_kept(tracks[q].points.front(), cfg.track_conf_thresh)) {
      continue;
    }
    const auto it = head_mask_to_id.find(grid_labels[q]);
    if (it == head_mask_to_id.end()) continue;
    point_labels[q] = it->second;
    tracklet_by_id(it->second)->point_ids.push_back(static_cast<int>(q));
  }

  // When the list head is itself a block member (block 0) its instances
  // contribute geometry immediately.
  if (block.anchor_count == 0) {
    for (const auto& [mi, tid] : head_mask_to_id) {
      accumulate_instance(*tracklet_by_id(tid), head_eroded.storage[mi],
                          block.provider.predicted_depths.front(), head.intrinsics,
                          block.aligned.front(), head.frame_index, cfg.grid_stride);
    }
  }

  // --- Remaining frames: propagate, vote, assign.
  for (size_t j = 1; j < frames.size(); ++j) {
    const FrameRecord& frame = frames[j];
    ErodedFrame eroded = erode_frame(frame, cfg.erosion_radius);

    std::vector<SupportVote> votes;
    for (size_t q = 0; q < queries.size(); ++q) {
      if (point_labels[q] == 0 || q >= tracks.size()) continue;
      const TrackPoint& tp = tracks[q].points[j];
      if (!track_kept(tp, cfg.track_conf_thresh)) continue;
      votes.push_back({point_labels[q], tp.u, tp.v});
    }
    const auto support = support_matrix(votes, eroded.ptrs);

    std::map<long, std::string> tracklet_classes;
    for (const Tracklet& t : live) tracklet_classes[t.global_id] = t.class_label;

    AssignmentResult result = mutual_assign(support, tracklet_classes, eroded.classes);
    // Masks emptied by erosion are dropped, never matched or recorded.
    std::erase_if(result.unmatched_masks, [&](int mi) { return eroded.ptrs[mi] == nullptr; });

    update_tracklets(live, result, frame.masks, frame.frame_index, /*first_of_list=*/false,
                     state.registry.next_global_id, state.registry.untracked);

    for (const auto& [tid, mi] : result.matches) {
      state.mask_assignments[frame.frame_index][mi] = tid;
      if (static_cast<int>(j) >= block.anchor_count) {
        accumulate_instance(*tracklet_by_id(tid), eroded.storage[mi],
                            block.provider.predicted_depths[j], frame.intrinsics,
                            block.aligned[j], frame.frame_index, cfg.grid_stride);
      }
    }
  }

  // --- Fold the block into the registry.
  const long first_member_frame = frames[block.anchor_count].frame_index;
  std::set<long> continuing_ids;
  std::vector<Tracklet*> born;
  for (Tracklet& t : live) {
    if (t.born_this_list) {
      born.push_back(&t);
      continue;
    }
    continuing_ids.insert(t.global_id);
    GlobalObject& object = state.registry.objects.at(t.global_id);
    fold_into_object(object, t, first_member_frame);
  }

  // Re-identification targets: objects not already carried by a live
  // tracklet in this block.
  std::vector<std::pair<long, const GlobalObject*>> targets;
  for (const auto& [id, object] : state.registry.objects) {
    if (!continuing_ids.count(id)) targets.emplace_back(id, &object);
  }

  std::vector<std::pair<long, const PointCloud*>> born_clouds;
  for (Tracklet* t : born) {
    if (t->block_points.empty()) continue;
    born_clouds.emplace_back(t->global_id, &t->block_points);
  }
  // Class agreement is enforced before the IoU stage sees a pair.
  std::vector<MergeDecision> merges;
  {
    std::map<std::string, std::vector<std::pair<long, const PointCloud*>>> by_class_new;
    for (const auto& [id, cloud] : born_clouds) {
      const Tracklet* t = nullptr;
      for (Tracklet* b : born) {
        if (b->global_id == id) t = b;
      }
      by_class_new[t->class_label].emplace_back(id, cloud);
    }
    for (auto& [cls, news] : by_class_new) {
      std::vector<std::pair<long, const GlobalObject*>> class_targets;
      for (const auto& [id, object] : targets) {
        if (object->class_label == cls) class_targets.emplace_back(id, object);
      }
      for (const MergeDecision& m : reid_bbox(news, class_targets, cfg.bbox_iou_thresh)) {
        merges.push_back(m);
      }
    }
  }

  std::set<long> merged_new, merged_targets;
  for (const MergeDecision& m : merges) {
    merged_new.insert(m.new_id);
    merged_targets.insert(m.existing_id);
  }

  // Median-cloud re-identification for the tracklets the IoU stage left
  // unmatched.
  for (Tracklet* t : born) {
    if (t->block_points.empty() || merged_new.count(t->global_id)) continue;
    std::vector<Eigen::Vector3d> medians;
    for (const auto& m : t->block_medians) medians.push_back(m.point);
    std::vector<std::pair<long, const GlobalObject*>> remaining;
    for (const auto& [id, object] : targets) {
      if (!merged_targets.count(id)) remaining.emplace_back(id, object);
    }
    const long match = reid_chamfer(medians, t->class_label, remaining, cfg.chamfer_thresh);
    if (match >= 0) {
      merges.push_back({t->global_id, match});
      merged_new.insert(t->global_id);
      merged_targets.insert(match);
    }
  }

  auto rewrite_assignments = [&state](long from, long to) {
    for (auto& [frame, masks] : state.mask_assignments) {
      for (auto& [mi, id] : masks) {
        if (id == from) id = to;
      }
    }
  };

  for (const MergeDecision& m : merges) {
    Tracklet* t = nullptr;
    for (Tracklet* b : born) {
      if (b->global_id == m.new_id) t = b;
    }
    GlobalObject& object = state.registry.objects.at(m.existing_id);
    fold_into_object(object, *t, std::numeric_limits<long>::min());
    rewrite_assignments(m.new_id, m.existing_id);
    continuing_ids.insert(m.existing_id);
    SCENEMAP_LOG_DEBUG("block ", block.block_index, ": re-identified tracklet ", m.new_id,
                       " as object ", m.existing_id);
  }

  // Brand-new objects.
  for (Tracklet* t : born) {
    if (merged_new.count(t->global_id)) continue;
    if (t->block_points.empty()) {
      // Nothing observable in 3D; drop the identity entirely.
      rewrite_assignments(t->global_id, 0);
      for (auto& [frame, masks] : state.mask_assignments) {
        std::erase_if(masks, [](const auto& kv) { return kv.second == 0; });
      }
      SCENEMAP_LOG_DEBUG("block ", block.block_index, ": dropping pointless tracklet ",
                         t->global_id);
      continue;
    }
    GlobalObject object;
    object.global_id = t->global_id;
    object.class_label = t->class_label;
    object.cloud.set_voxel_size(cfg.object_voxel_size);
    object.born_block = block.block_index;
    fold_into_object(object, *t, std::numeric_limits<long>::min());
    state.registry.objects.emplace(object.global_id, std::move(object));
    summary.appeared_ids.push_back(t->global_id);
    continuing_ids.insert(t->global_id);
  }

  // Detected = received a mask in a block-member frame.
  std::set<long> detected;
  for (Tracklet& t : live) {
    long id = t.global_id;
    for (const MergeDecision& m : merges) {
      if (m.new_id == id) id = m.existing_id;
    }
    if (!state.registry.objects.count(id)) continue;
    for (const TrackletRecord& r : t.records) {
      if (r.frame_index >= first_member_frame && r.mask_index != kEmptyRecord) {
        detected.insert(id);
        break;
      }
    }
  }
  for (long id : detected) {
    state.registry.objects.at(id).last_detected_block = block.block_index;
    summary.detected_ids.push_back(id);
  }
  summary.untracked_count = static_cast<int>(state.registry.untracked.size());

  // Keep assignments only for frames that can anchor the next list.
  std::set<long> keep_frames;
  for (int pos : block.keyframe_positions) {
    keep_frames.insert(block.block_frame(pos).frame_index);
  }
  std::erase_if(state.mask_assignments,
                [&](const auto& kv) { return !keep_frames.count(kv.first); });

  return summary;
}

}  // namespace scenemap
