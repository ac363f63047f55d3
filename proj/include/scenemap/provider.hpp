#pragma once

#include <memory>
#include <string>
#include <vector>

#include "scenemap/geometry.hpp"
#include "scenemap/stream.hpp"

namespace scenemap {

struct TrackPoint {
  double u = 0.0;
  double v = 0.0;
  double confidence = 0.0;
};

/// One tracked query point: its location and confidence in every frame of
/// the frame list it was inferred on.
struct TrackTrajectory {
  std::vector<TrackPoint> points;
};

struct ProviderOutput {
  std::vector<DepthMap> predicted_depths;   // one per list frame
  std::vector<Pose> extrinsics;             // relative to the first list frame
  std::vector<Eigen::Vector2d> query_points;
  std::vector<TrackTrajectory> tracks;      // one per query point

  // Throws InternalError when list lengths disagree or extrinsics[0]
  // deviates from identity beyond 1e-6.
  void validate(size_t frame_count) const;
};

/// Geometry inference contract: depth, per-list relative poses and point
/// tracks for a frame list. The first frame of the list is the reference
/// (its pose is identity).
class GeometryProvider {
 public:
  virtual ~GeometryProvider() = default;
  virtual ProviderOutput infer(const std::vector<FrameRecord>& frames,
                               const std::vector<Eigen::Vector2d>& query_points) = 0;
};

/// Uniform pixel grid at multiples of stride, row-major order.
std::vector<Eigen::Vector2d> grid_query_points(int width, int height, int stride);

/// Serves predictions stored alongside the stream: per-frame depth rasters
/// and poses from the manifest, point tracks from per-list JSON files under
/// tracks_dir keyed by the list's first frame index.
class FileProvider : public GeometryProvider {
 public:
  FileProvider(std::string stream_root, std::string tracks_dir);

  ProviderOutput infer(const std::vector<FrameRecord>& frames,
                       const std::vector<Eigen::Vector2d>& query_points) override;

  static std::string tracks_file_name(long first_frame_index);

 private:
  std::string stream_root_;
  std::string tracks_dir_;
};

/// Writes one list's tracks into the per-first-frame JSON file, appending an
/// entry when the file already holds lists with the same first frame.
void append_tracks_entry(const std::string& tracks_dir, const std::vector<long>& frame_indices,
                         const std::vector<Eigen::Vector2d>& query_points,
                         const std::vector<TrackTrajectory>& tracks);

}  // namespace scenemap
