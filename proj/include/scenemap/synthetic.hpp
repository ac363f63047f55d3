#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "scenemap/geometry.hpp"
#include "scenemap/provider.hpp"
#include "scenemap/stream.hpp"

namespace scenemap {

struct SceneObject {
  std::string class_label = "box";
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d size = Eigen::Vector3d::Ones();  // full extents
  int present_from_block = 0;
  int present_until_block = -1;  // inclusive; -1 = forever
};

struct ScenePlane {
  int axis = 2;        // 0=x, 1=y, 2=z
  double value = 8.0;  // world coordinate along axis
};

struct CameraPath {
  enum class Kind { Static, Line, Orbit, Oscillate };
  Kind kind = Kind::Static;
  Eigen::Vector3d start = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();  // meters per frame (line)
  Eigen::Vector3d center = Eigen::Vector3d(0, 0, 4);   // orbit target
  double radius = 2.0;
  double angular_step = 0.02;  // radians per frame
  Eigen::Vector3d axis_dir = Eigen::Vector3d(1, 0, 0);  // oscillate direction
  double amplitude = 1.0;
  double period_frames = 100.0;
  std::optional<Eigen::Vector3d> look_at;  // rotation via look-at; identity otherwise
};

/// Deterministic analytic indoor scene: axis-aligned background planes plus
/// boxes that can appear or disappear at block boundaries. Everything the
/// engine consumes (depths, poses, masks, tracks) is computable in closed
/// form, which makes the scene its own ground truth.
struct SceneSpec {
  std::string name = "scene";
  std::uint64_t seed = 0;
  int width = 64;
  int height = 48;
  std::optional<Intrinsics> intrinsics;  // defaults derived from width/height
  int frame_count = 30;
  double fps = 10.0;
  CameraPath camera;
  std::vector<ScenePlane> planes;
  std::vector<SceneObject> objects;
  int block_size = 10;
  int keyframe_count = 3;
  int grid_stride = 8;
  double pred_scale = 1.0;  // stored predicted depth = pred_scale * true depth
  double sensor_noise_sigma = 0.0;
  double pred_noise_sigma = 0.0;
  double pose_trans_noise_sigma = 0.0;
  double pose_rot_noise_sigma = 0.0;
  bool emit_sensor_depth = true;
  bool emit_tracks = true;
  bool occlusion_aware_tracks = true;
  double occluded_track_confidence = 0.05;
  double mask_confidence = 0.9;
  std::vector<double> feature_scores;  // explicit per-frame scores; jittered 1.0 otherwise

  void validate() const;
  static SceneSpec from_json(const nlohmann::json& doc);
  static SceneSpec from_file(const std::string& path);
};

struct SceneEvent {
  int block_index = 0;
  std::string type;  // "insert" | "remove"
  int object_index = 0;
};

class SyntheticScene {
 public:
  explicit SyntheticScene(SceneSpec spec);

  const SceneSpec& spec() const { return spec_; }
  const Intrinsics& intrinsics() const { return intrinsics_; }

  int block_of_frame(long frame_index) const;
  bool object_present(int object_index, long frame_index) const;
  std::vector<SceneEvent> events() const;

  Pose true_pose(long frame_index) const;  // camera-from-world
  double timestamp(long frame_index) const { return frame_index / spec_.fps; }

  /// Nearest-hit depth; hit_ids (when non-null) receives -1 for background
  /// planes / no hit and the object index otherwise.
  DepthMap render_depth(long frame_index, std::vector<int>* hit_ids = nullptr) const;
  std::vector<InstanceMask> render_masks(long frame_index) const;

  DepthMap sensor_depth(long frame_index) const;     // true depth + seeded noise
  DepthMap predicted_depth(long frame_index) const;  // pred_scale * true + seeded noise
  Pose predicted_pose(long frame_index) const;       // provider-native frame
  double feature_score(long frame_index) const;

  /// In-memory frame record (no file paths); sensor depth attached when the
  /// spec emits it.
  FrameRecord make_frame(long frame_index) const;

  std::vector<TrackTrajectory> tracks(const std::vector<long>& frame_indices,
                                      const std::vector<Eigen::Vector2d>& query_points) const;

 private:
  double cast_ray(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir, long frame_index,
                  int* hit_id) const;

  SceneSpec spec_;
  Intrinsics intrinsics_;
};

/// Analytic stand-in for the geometry model: exact scaled depths and poses,
/// exact projected tracks with confidences reflecting occlusion.
class SyntheticProvider : public GeometryProvider {
 public:
  explicit SyntheticProvider(std::shared_ptr<const SyntheticScene> scene)
      : scene_(std::move(scene)) {}

  ProviderOutput infer(const std::vector<FrameRecord>& frames,
                       const std::vector<Eigen::Vector2d>& query_points) override;

 private:
  std::shared_ptr<const SyntheticScene> scene_;
};

struct SynthOutputs {
  std::string manifest_path;
  std::string gt_trajectory_path;
  std::string gt_inventory_path;
  std::string run_config_path;
  int frame_count = 0;
  int block_count = 0;
};

/// Writes the full on-disk stream: manifest, depth rasters, per-list track
/// files, ground-truth sidecars and a ready-to-run pipeline config.
/// Deterministic for a fixed spec (seed included).
SynthOutputs synth_generate(const SceneSpec& spec, const std::string& out_dir);

}  // namespace scenemap
