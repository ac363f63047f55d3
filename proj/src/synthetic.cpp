#include "scenemap/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include <Eigen/Geometry>
#include <nlohmann/json.hpp>

#include "scenemap/block_aligner.hpp"
#include "scenemap/errors.hpp"

namespace scenemap {

using nlohmann::json;

namespace {

constexpr double kRayEps = 1e-9;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::mt19937_64 frame_rng(std::uint64_t seed, long frame_index, std::uint64_t channel) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(frame_index) +
                                                      (channel << 40))));
}

Eigen::Vector3d vec3_from_json(const json& arr) {
  if (!arr.is_array() || arr.size() != 3) throw InvalidSpecError("expected a 3-vector");
  return Eigen::Vector3d(arr[0].get<double>(), arr[1].get<double>(), arr[2].get<double>());
}

Eigen::Matrix3d look_at_rotation(const Eigen::Vector3d& position, const Eigen::Vector3d& target) {
  const Eigen::Vector3d forward = (target - position).normalized();
  const Eigen::Vector3d world_down(0.0, 1.0, 0.0);
  Eigen::Vector3d right = world_down.cross(forward);
  if (right.norm() < 1e-9) throw InvalidSpecError("camera looks straight along the vertical");
  right.normalize();
  const Eigen::Vector3d down = forward.cross(right);
  Eigen::Matrix3d rotation;
  rotation.row(0) = right;
  rotation.row(1) = down;
  rotation.row(2) = forward;
  return rotation;
}

}  // namespace

void SceneSpec::validate() const {
  if (width < 4 || height < 4) throw InvalidSpecError("image must be at least 4x4");
  if (frame_count < 1) throw InvalidSpecError("frame_count must be >= 1");
  if (!(fps > 0.0)) throw InvalidSpecError("fps must be positive");
  if (block_size < 2) throw InvalidSpecError("block_size must be >= 2");
  if (keyframe_count < 1 || keyframe_count >= block_size) {
    throw InvalidSpecError("need 0 < keyframe_count < block_size");
  }
  if (grid_stride < 1) throw InvalidSpecError("grid_stride must be >= 1");
  if (!(pred_scale > 0.0)) throw InvalidSpecError("pred_scale must be positive");
  if (sensor_noise_sigma < 0.0 || pred_noise_sigma < 0.0 || pose_trans_noise_sigma < 0.0 ||
      pose_rot_noise_sigma < 0.0) {
    throw InvalidSpecError("noise sigmas must be nonnegative");
  }
  if (planes.empty() && objects.empty()) throw InvalidSpecError("scene has no geometry");
  for (const auto& plane : planes) {
    if (plane.axis < 0 || plane.axis > 2) throw InvalidSpecError("plane axis must be 0..2");
  }
  for (const auto& object : objects) {
    if (!(object.size.minCoeff() > 0.0)) throw InvalidSpecError("object size must be positive");
    if (object.present_from_block < 0) throw InvalidSpecError("present_from_block must be >= 0");
  }
  if (!feature_scores.empty() && static_cast<int>(feature_scores.size()) != frame_count) {
    throw InvalidSpecError("feature_scores length must equal frame_count");
  }
  if (intrinsics) intrinsics->validate();
}

SceneSpec SceneSpec::from_json(const json& doc) {
  SceneSpec spec;
  try {
    spec.name = doc.value("name", spec.name);
    spec.seed = doc.value("seed", spec.seed);
    spec.width = doc.value("width", spec.width);
    spec.height = doc.value("height", spec.height);
    spec.frame_count = doc.value("frame_count", spec.frame_count);
    spec.fps = doc.value("fps", spec.fps);
    spec.block_size = doc.value("block_size", spec.block_size);
    spec.keyframe_count = doc.value("keyframe_count", spec.keyframe_count);
    spec.grid_stride = doc.value("grid_stride", spec.grid_stride);
    spec.pred_scale = doc.value("pred_scale", spec.pred_scale);
    spec.sensor_noise_sigma = doc.value("sensor_noise_sigma", spec.sensor_noise_sigma);
    spec.pred_noise_sigma = doc.value("pred_noise_sigma", spec.pred_noise_sigma);
    spec.pose_trans_noise_sigma = doc.value("pose_trans_noise_sigma", spec.pose_trans_noise_sigma);
    spec.pose_rot_noise_sigma = doc.value("pose_rot_noise_sigma", spec.pose_rot_noise_sigma);
    spec.emit_sensor_depth = doc.value("emit_sensor_depth", spec.emit_sensor_depth);
    spec.emit_tracks = doc.value("emit_tracks", spec.emit_tracks);
    spec.occlusion_aware_tracks =
        doc.value("occlusion_aware_tracks", spec.occlusion_aware_tracks);
    spec.occluded_track_confidence =
        doc.value("occluded_track_confidence", spec.occluded_track_confidence);
    spec.mask_confidence = doc.value("mask_confidence", spec.mask_confidence);
    if (doc.contains("feature_scores") && !doc["feature_scores"].is_null()) {
      spec.feature_scores = doc["feature_scores"].get<std::vector<double>>();
    }
    if (doc.contains("intrinsics")) {
      const json& k = doc["intrinsics"];
      Intrinsics intr;
      intr.fx = k.at("fx").get<double>();
      intr.fy = k.at("fy").get<double>();
      intr.cx = k.at("cx").get<double>();
      intr.cy = k.at("cy").get<double>();
      intr.width = spec.width;
      intr.height = spec.height;
      spec.intrinsics = intr;
    }
    if (doc.contains("camera")) {
      const json& cam = doc["camera"];
      const std::string kind = cam.value("kind", std::string("static"));
      if (kind == "static") spec.camera.kind = CameraPath::Kind::Static;
      else if (kind == "line") spec.camera.kind = CameraPath::Kind::Line;
      else if (kind == "orbit") spec.camera.kind = CameraPath::Kind::Orbit;
      else if (kind == "oscillate") spec.camera.kind = CameraPath::Kind::Oscillate;
      else throw InvalidSpecError("unknown camera kind: " + kind);
      if (cam.contains("start")) spec.camera.start = vec3_from_json(cam["start"]);
      if (cam.contains("velocity")) spec.camera.velocity = vec3_from_json(cam["velocity"]);
      if (cam.contains("center")) spec.camera.center = vec3_from_json(cam["center"]);
      spec.camera.radius = cam.value("radius", spec.camera.radius);
      spec.camera.angular_step = cam.value("angular_step", spec.camera.angular_step);
      if (cam.contains("axis_dir")) spec.camera.axis_dir = vec3_from_json(cam["axis_dir"]);
      spec.camera.amplitude = cam.value("amplitude", spec.camera.amplitude);
      spec.camera.period_frames = cam.value("period_frames", spec.camera.period_frames);
      if (cam.contains("look_at") && !cam["look_at"].is_null()) {
        spec.camera.look_at = vec3_from_json(cam["look_at"]);
      }
    }
    for (const json& p : doc.value("planes", json::array())) {
      ScenePlane plane;
      plane.axis = p.at("axis").get<int>();
      plane.value = p.at("value").get<double>();
      spec.planes.push_back(plane);
    }
    for (const json& o : doc.value("objects", json::array())) {
      SceneObject object;
      object.class_label = o.value("class", object.class_label);
      object.center = vec3_from_json(o.at("center"));
      object.size = vec3_from_json(o.at("size"));
      object.present_from_block = o.value("present_from_block", 0);
      object.present_until_block = o.value("present_until_block", -1);
      spec.objects.push_back(object);
    }
  } catch (const json::exception& e) {
    throw InvalidSpecError(e.what());
  }
  spec.validate();
  return spec;
}

SceneSpec SceneSpec::from_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw MissingFileError(path);
  json doc;
  try {
    is >> doc;
  } catch (const json::exception& e) {
    throw InvalidSpecError(std::string("cannot parse ") + path + ": " + e.what());
  }
  return from_json(doc);
}

SyntheticScene::SyntheticScene(SceneSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  if (spec_.intrinsics) {
    intrinsics_ = *spec_.intrinsics;
  } else {
    intrinsics_.fx = 0.8 * spec_.width;
    intrinsics_.fy = 0.8 * spec_.width;
    intrinsics_.cx = spec_.width / 2.0;
    intrinsics_.cy = spec_.height / 2.0;
  }
  intrinsics_.width = spec_.width;
  intrinsics_.height = spec_.height;
  intrinsics_.validate();
}

int SyntheticScene::block_of_frame(long frame_index) const {
  const int n = spec_.block_size;
  const long full = spec_.frame_count / n;
  const long rem = spec_.frame_count % n;
  long block = frame_index / n;
  // A trailing single frame is merged into the final full block.
  if (rem == 1 && full >= 1 && block >= full) block = full - 1;
  return static_cast<int>(block);
}

bool SyntheticScene::object_present(int object_index, long frame_index) const {
  const SceneObject& object = spec_.objects[object_index];
  const int block = block_of_frame(frame_index);
  if (block < object.present_from_block) return false;
  if (object.present_until_block >= 0 && block > object.present_until_block) return false;
  return true;
}

std::vector<SceneEvent> SyntheticScene::events() const {
  std::vector<SceneEvent> out;
  for (size_t i = 0; i < spec_.objects.size(); ++i) {
    const SceneObject& object = spec_.objects[i];
    if (object.present_from_block > 0) {
      out.push_back({object.present_from_block, "insert", static_cast<int>(i)});
    }
    if (object.present_until_block >= 0) {
      out.push_back({object.present_until_block + 1, "remove", static_cast<int>(i)});
    }
  }
  std::sort(out.begin(), out.end(), [](const SceneEvent& a, const SceneEvent& b) {
    if (a.block_index != b.block_index) return a.block_index < b.block_index;
    return a.object_index < b.object_index;
  });
  return out;
}

Pose SyntheticScene::true_pose(long frame_index) const {
  const CameraPath& cam = spec_.camera;
  Eigen::Vector3d position = cam.start;
  std::optional<Eigen::Vector3d> look_at = cam.look_at;
  switch (cam.kind) {
    case CameraPath::Kind::Static:
      break;
    case CameraPath::Kind::Line:
      position = cam.start + cam.velocity * static_cast<double>(frame_index);
      break;
    case CameraPath::Kind::Orbit: {
      const double theta = cam.angular_step * static_cast<double>(frame_index);
      position = cam.center +
                 cam.radius * Eigen::Vector3d(std::sin(theta), 0.0, -std::cos(theta));
      if (!look_at) look_at = cam.center;
      break;
    }
    case CameraPath::Kind::Oscillate: {
      const double phase = 2.0 * M_PI * static_cast<double>(frame_index) / cam.period_frames;
      position = cam.start + cam.axis_dir * (cam.amplitude * std::sin(phase));
      break;
    }
  }
  const Eigen::Matrix3d rotation =
      look_at ? look_at_rotation(position, *look_at) : Eigen::Matrix3d::Identity();
  return Pose(rotation, -(rotation * position));
}

double SyntheticScene::cast_ray(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                                long frame_index, int* hit_id) const {
  double best = std::numeric_limits<double>::infinity();
  int best_id = -1;

  for (const ScenePlane& plane : spec_.planes) {
    const double d = dir[plane.axis];
    if (std::abs(d) < 1e-12) continue;
    const double s = (plane.value - origin[plane.axis]) / d;
    if (s > kRayEps && s < best) {
      best = s;
      best_id = -1;
    }
  }

  for (size_t i = 0; i < spec_.objects.size(); ++i) {
    if (!object_present(static_cast<int>(i), frame_index)) continue;
    const SceneObject& object = spec_.objects[i];
    const Eigen::Vector3d lo = object.center - object.size / 2.0;
    const Eigen::Vector3d hi = object.center + object.size / 2.0;
    double tmin = kRayEps;
    double tmax = std::numeric_limits<double>::infinity();
    bool miss = false;
    for (int a = 0; a < 3 && !miss; ++a) {
      if (std::abs(dir[a]) < 1e-12) {
        if (origin[a] < lo[a] || origin[a] > hi[a]) miss = true;
        continue;
      }
      double t1 = (lo[a] - origin[a]) / dir[a];
      double t2 = (hi[a] - origin[a]) / dir[a];
      if (t1 > t2) std::swap(t1, t2);
      tmin = std::max(tmin, t1);
      tmax = std::min(tmax, t2);
      if (tmin > tmax) miss = true;
    }
    if (!miss && tmin < best) {
      best = tmin;
      best_id = static_cast<int>(i);
    }
  }

  if (hit_id) *hit_id = best_id;
  return std::isinf(best) ? -1.0 : best;
}

DepthMap SyntheticScene::render_depth(long frame_index, std::vector<int>* hit_ids) const {
  const Pose pose = true_pose(frame_index);
  const Eigen::Vector3d origin = pose.camera_center();
  const Eigen::Matrix3d world_from_cam = pose.rotation().transpose();
  DepthMap depth(spec_.width, spec_.height);
  if (hit_ids) hit_ids->assign(static_cast<size_t>(spec_.width) * spec_.height, -1);
  for (int y = 0; y < spec_.height; ++y) {
    for (int x = 0; x < spec_.width; ++x) {
      const Eigen::Vector3d dir_cam((x - intrinsics_.cx) / intrinsics_.fx,
                                    (y - intrinsics_.cy) / intrinsics_.fy, 1.0);
      int id = -1;
      // dir has unit z in camera coordinates, so the ray parameter equals
      // the camera-frame depth of the hit.
      const double s = cast_ray(origin, world_from_cam * dir_cam, frame_index, &id);
      if (s > 0.0) {
        depth.at(x, y) = static_cast<float>(s);
        if (hit_ids) (*hit_ids)[static_cast<size_t>(y) * spec_.width + x] = id;
      }
    }
  }
  return depth;
}

std::vector<InstanceMask> SyntheticScene::render_masks(long frame_index) const {
  std::vector<int> hit_ids;
  render_depth(frame_index, &hit_ids);
  std::vector<InstanceMask> masks;
  for (size_t i = 0; i < spec_.objects.size(); ++i) {
    if (!object_present(static_cast<int>(i), frame_index)) continue;
    BinaryMask mask(spec_.width, spec_.height);
    size_t set = 0;
    for (size_t p = 0; p < hit_ids.size(); ++p) {
      if (hit_ids[p] == static_cast<int>(i)) {
        mask.bits[p] = 1;
        ++set;
      }
    }
    if (set == 0) continue;  // occluded or out of view this frame
    InstanceMask instance;
    instance.class_label = spec_.objects[i].class_label;
    instance.detection_confidence = spec_.mask_confidence;
    instance.mask = std::move(mask);
    masks.push_back(std::move(instance));
  }
  return masks;
}

DepthMap SyntheticScene::sensor_depth(long frame_index) const {
  DepthMap depth = render_depth(frame_index);
  if (spec_.sensor_noise_sigma > 0.0) {
    auto rng = frame_rng(spec_.seed, frame_index, 1);
    std::normal_distribution<float> noise(0.0f, static_cast<float>(spec_.sensor_noise_sigma));
    for (float& v : depth.values()) {
      if (std::isfinite(v)) v = std::max(1e-3f, v + noise(rng));
    }
  }
  return depth;
}

DepthMap SyntheticScene::predicted_depth(long frame_index) const {
  DepthMap depth = render_depth(frame_index);
  const float scale = static_cast<float>(spec_.pred_scale);
  for (float& v : depth.values()) v *= scale;
  if (spec_.pred_noise_sigma > 0.0) {
    auto rng = frame_rng(spec_.seed, frame_index, 2);
    std::normal_distribution<float> noise(0.0f, static_cast<float>(spec_.pred_noise_sigma));
    for (float& v : depth.values()) {
      if (std::isfinite(v)) v = std::max(1e-3f, v + noise(rng));
    }
  }
  return depth;
}

Pose SyntheticScene::predicted_pose(long frame_index) const {
  const Pose truth = true_pose(frame_index);
  Eigen::Matrix3d rotation = truth.rotation();
  Eigen::Vector3d translation = truth.translation() * spec_.pred_scale;
  if (spec_.pose_rot_noise_sigma > 0.0 || spec_.pose_trans_noise_sigma > 0.0) {
    auto rng = frame_rng(spec_.seed, frame_index, 3);
    std::normal_distribution<double> gauss(0.0, 1.0);
    if (spec_.pose_rot_noise_sigma > 0.0) {
      Eigen::Vector3d axis(gauss(rng), gauss(rng), gauss(rng));
      if (axis.norm() > 1e-12) {
        const double angle = gauss(rng) * spec_.pose_rot_noise_sigma;
        rotation = Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix() * rotation;
      }
    }
    if (spec_.pose_trans_noise_sigma > 0.0) {
      translation += spec_.pose_trans_noise_sigma *
                     Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
    }
  }
  return Pose(rotation, translation);
}

double SyntheticScene::feature_score(long frame_index) const {
  if (!spec_.feature_scores.empty()) return spec_.feature_scores[frame_index];
  auto rng = frame_rng(spec_.seed, frame_index, 4);
  std::uniform_real_distribution<double> jitter(0.0, 0.01);
  return 1.0 + jitter(rng);
}

FrameRecord SyntheticScene::make_frame(long frame_index) const {
  FrameRecord record;
  record.frame_index = frame_index;
  record.timestamp = timestamp(frame_index);
  record.intrinsics = intrinsics_;
  record.feature_score = feature_score(frame_index);
  record.masks = render_masks(frame_index);
  if (spec_.emit_sensor_depth) record.sensor_depth = sensor_depth(frame_index);
  return record;
}

std::vector<TrackTrajectory> SyntheticScene::tracks(
    const std::vector<long>& frame_indices, const std::vector<Eigen::Vector2d>& query_points) const {
  std::vector<TrackTrajectory> out(query_points.size());
  if (frame_indices.empty()) return out;

  const long first = frame_indices.front();
  const DepthMap first_depth = render_depth(first);
  const Pose first_pose = true_pose(first);
  const Pose first_world_from_cam = invert(first_pose);

  std::vector<Pose> poses;
  std::vector<DepthMap> depths;
  poses.reserve(frame_indices.size());
  depths.reserve(frame_indices.size());
  for (long f : frame_indices) {
    poses.push_back(true_pose(f));
    depths.push_back(spec_.occlusion_aware_tracks ? render_depth(f) : DepthMap());
  }

  for (size_t q = 0; q < query_points.size(); ++q) {
    TrackTrajectory& traj = out[q];
    traj.points.resize(frame_indices.size());
    const int x = static_cast<int>(std::lround(query_points[q].x()));
    const int y = static_cast<int>(std::lround(query_points[q].y()));
    if (x < 0 || x >= spec_.width || y < 0 || y >= spec_.height || !first_depth.valid(x, y)) {
      continue;  // all confidences stay 0
    }
    const double z = first_depth.at(x, y);
    const Eigen::Vector3d cam_point((x - intrinsics_.cx) * z / intrinsics_.fx,
                                    (y - intrinsics_.cy) * z / intrinsics_.fy, z);
    const Eigen::Vector3d world = first_world_from_cam.apply(cam_point);

    for (size_t j = 0; j < frame_indices.size(); ++j) {
      const Projection proj = project_point(world, intrinsics_, poses[j]);
      TrackPoint& tp = traj.points[j];
      tp.u = proj.u;
      tp.v = proj.v;
      if (!proj.in_bounds) {
        tp.confidence = 0.0;
        continue;
      }
      tp.confidence = 1.0;
      if (spec_.occlusion_aware_tracks) {
        const int px = static_cast<int>(std::lround(proj.u));
        const int py = static_cast<int>(std::lround(proj.v));
        if (px >= 0 && px < spec_.width && py >= 0 && py < spec_.height &&
            depths[j].valid(px, py)) {
          const double scene_z = depths[j].at(px, py);
          if (proj.z - scene_z > std::max(0.005, 0.01 * proj.z)) {
            tp.confidence = spec_.occluded_track_confidence;
          }
        }
      }
    }
  }
  return out;
}

ProviderOutput SyntheticProvider::infer(const std::vector<FrameRecord>& frames,
                                        const std::vector<Eigen::Vector2d>& query_points) {
  if (frames.empty()) throw DataError("provider: empty frame list");
  ProviderOutput out;
  out.query_points = query_points;
  std::vector<long> indices;
  indices.reserve(frames.size());
  for (const FrameRecord& frame : frames) indices.push_back(frame.frame_index);

  std::vector<Pose> native;
  for (long f : indices) {
    out.predicted_depths.push_back(scene_->predicted_depth(f));
    native.push_back(scene_->predicted_pose(f));
  }
  const Pose to_first = invert(native.front());
  for (const Pose& pose : native) out.extrinsics.push_back(compose(pose, to_first));
  out.tracks = scene_->tracks(indices, query_points);
  out.validate(frames.size());
  return out;
}

namespace {

std::string depth_file_rel(const char* prefix, long frame_index) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "depth/%s_%06ld.dpth", prefix, frame_index);
  return buf;
}

}  // namespace

SynthOutputs synth_generate(const SceneSpec& spec, const std::string& out_dir) {
  spec.validate();
  SyntheticScene scene(spec);

  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  fs::create_directories(fs::path(out_dir) / "depth");
  fs::create_directories(fs::path(out_dir) / "tracks");

  SynthOutputs outputs;
  outputs.frame_count = spec.frame_count;
  outputs.manifest_path = (fs::path(out_dir) / "manifest.jsonl").string();
  outputs.gt_trajectory_path = (fs::path(out_dir) / "gt_trajectory.txt").string();
  outputs.gt_inventory_path = (fs::path(out_dir) / "gt_inventory.json").string();
  outputs.run_config_path = (fs::path(out_dir) / "run_config.json").string();

  std::ofstream manifest(outputs.manifest_path);
  std::ofstream gt_traj(outputs.gt_trajectory_path);
  if (!manifest || !gt_traj) throw DataError("cannot write into " + out_dir);

  char line[512];
  for (long f = 0; f < spec.frame_count; ++f) {
    FrameRecord record;
    record.frame_index = f;
    record.timestamp = scene.timestamp(f);
    record.intrinsics = scene.intrinsics();
    record.feature_score = scene.feature_score(f);
    record.masks = scene.render_masks(f);
    record.pred_pose = scene.predicted_pose(f);
    record.pred_depth_path = depth_file_rel("pred", f);
    write_depth_file(join_path(out_dir, record.pred_depth_path), scene.predicted_depth(f));
    if (spec.emit_sensor_depth) {
      record.sensor_depth_path = depth_file_rel("sensor", f);
      write_depth_file(join_path(out_dir, record.sensor_depth_path), scene.sensor_depth(f));
    }
    manifest << manifest_line(record) << '\n';

    const Pose truth = scene.true_pose(f);
    const Eigen::Vector3d center = truth.camera_center();
    const Eigen::Quaterniond q(truth.rotation().transpose());
    std::snprintf(line, sizeof(line), "%ld %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n", f,
                  center.x(), center.y(), center.z(), q.x(), q.y(), q.z(), q.w());
    gt_traj << line;
  }
  manifest.close();
  gt_traj.close();

  // Ground-truth inventory
  {
    json inventory;
    json objects = json::array();
    for (const auto& object : spec.objects) {
      objects.push_back({{"class", object.class_label},
                         {"center", {object.center.x(), object.center.y(), object.center.z()}},
                         {"size", {object.size.x(), object.size.y(), object.size.z()}},
                         {"present_from_block", object.present_from_block},
                         {"present_until_block", object.present_until_block}});
    }
    json events = json::array();
    for (const SceneEvent& event : scene.events()) {
      events.push_back(
          {{"block", event.block_index}, {"type", event.type}, {"object", event.object_index}});
    }
    inventory["objects"] = objects;
    inventory["events"] = events;
    std::ofstream os(outputs.gt_inventory_path);
    os << inventory.dump(2) << '\n';
  }

  // Track files per frame list, mirroring the block/keyframe tiling the
  // engine will form for this stream.
  std::vector<long> all_frames(spec.frame_count);
  for (long f = 0; f < spec.frame_count; ++f) all_frames[f] = f;
  std::vector<std::vector<long>> blocks;
  for (long f = 0; f < spec.frame_count;) {
    const int block = scene.block_of_frame(f);
    std::vector<long> members;
    while (f < spec.frame_count && scene.block_of_frame(f) == block) members.push_back(f++);
    blocks.push_back(std::move(members));
  }
  outputs.block_count = static_cast<int>(blocks.size());

  if (spec.emit_tracks) {
    const std::vector<Eigen::Vector2d> queries =
        grid_query_points(spec.width, spec.height, spec.grid_stride);
    const std::string tracks_dir = (fs::path(out_dir) / "tracks").string();
    std::vector<long> prev_keyframes;
    for (const auto& members : blocks) {
      std::vector<long> list = prev_keyframes;
      list.insert(list.end(), members.begin(), members.end());
      append_tracks_entry(tracks_dir, list, queries, scene.tracks(list, queries));

      std::vector<double> scores;
      scores.reserve(members.size());
      for (long f : members) scores.push_back(scene.feature_score(f));
      int k = spec.keyframe_count;
      if (k >= static_cast<int>(members.size())) k = static_cast<int>(members.size()) - 1;
      prev_keyframes.clear();
      if (k >= 1) {
        for (int pos : select_keyframes(scores, k)) prev_keyframes.push_back(members[pos]);
      }
    }
  }

  // Ready-to-run pipeline config matched to this stream.
  {
    json cfg;
    cfg["stream"] = {{"manifest", "manifest.jsonl"},
                     {"provider", "file"},
                     {"tracks_dir", "tracks"}};
    cfg["align"] = {{"block_size", spec.block_size},
                    {"keyframe_count", spec.keyframe_count},
                    {"near_thresh", 0.3},
                    {"far_thresh", 50.0},
                    {"grid_stride", 4}};
    cfg["tracker"] = {{"grid_stride", spec.grid_stride}};
    cfg["output"] = {{"dir", "out"}};
    std::ofstream os(outputs.run_config_path);
    os << cfg.dump(2) << '\n';
  }

  return outputs;
}

}  // namespace scenemap
