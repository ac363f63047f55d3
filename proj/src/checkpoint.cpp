#include "scenemap/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "scenemap/errors.hpp"

namespace scenemap {

namespace {

constexpr char kMagic[4] = {'S', 'M', 'C', 'P'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(const std::string& path) : os_(path, std::ios::binary) {
    if (!os_) throw DataError("cannot open checkpoint for writing: " + path);
  }
  void bytes(const void* data, size_t n) { os_.write(static_cast<const char*>(data), n); }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void u64(std::uint64_t v) { bytes(&v, 8); }
  void i32(std::int32_t v) { bytes(&v, 4); }
  void i64(std::int64_t v) { bytes(&v, 8); }
  void f64(double v) { bytes(&v, 8); }
  void str(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  void pose(const Pose& p) {
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) f64(p.rotation()(r, c));
    for (int r = 0; r < 3; ++r) f64(p.translation()(r));
  }
  void vec3(const Eigen::Vector3d& v) {
    f64(v.x());
    f64(v.y());
    f64(v.z());
  }
  void cloud(const PointCloud& c) {
    u64(c.points.size());
    const bool with_frames = !c.frame_indices.empty();
    u8(with_frames ? 1 : 0);
    for (size_t i = 0; i < c.points.size(); ++i) {
      vec3(c.points[i]);
      if (with_frames) i64(c.frame_indices[i]);
    }
  }
  bool good() const { return os_.good(); }

 private:
  std::ofstream os_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : is_(path, std::ios::binary) {
    if (!is_) throw MissingFileError(path);
  }
  void bytes(void* data, size_t n) {
    is_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (!is_) throw CorruptCheckpointError("truncated checkpoint");
  }
  std::uint8_t u8() {
    std::uint8_t v;
    bytes(&v, 1);
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, 8);
    return v;
  }
  std::int32_t i32() {
    std::int32_t v;
    bytes(&v, 4);
    return v;
  }
  std::int64_t i64() {
    std::int64_t v;
    bytes(&v, 8);
    return v;
  }
  double f64() {
    double v;
    bytes(&v, 8);
    return v;
  }
  std::string str() {
    const std::uint64_t n = u64();
    if (n > (1ull << 32)) throw CorruptCheckpointError("absurd string length");
    std::string s(n, '\0');
    if (n) bytes(s.data(), n);
    return s;
  }
  Pose pose() {
    Eigen::Matrix3d rotation;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) rotation(r, c) = f64();
    Eigen::Vector3d translation;
    for (int r = 0; r < 3; ++r) translation(r) = f64();
    return Pose(rotation, translation);
  }
  Eigen::Vector3d vec3() {
    const double x = f64();
    const double y = f64();
    const double z = f64();
    return Eigen::Vector3d(x, y, z);
  }
  PointCloud cloud() {
    PointCloud c;
    const std::uint64_t n = u64();
    const bool with_frames = u8() != 0;
    c.points.reserve(n);
    if (with_frames) c.frame_indices.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
      c.points.push_back(vec3());
      if (with_frames) c.frame_indices.push_back(i64());
    }
    return c;
  }

 private:
  std::ifstream is_;
};

}  // namespace

void save_checkpoint(const std::string& path, const PipelineState& state) {
  Writer w(path);
  w.bytes(kMagic, 4);
  w.u32(kVersion);
  w.u64(state.config_hash);
  w.i32(state.next_block_index);
  w.i64(state.next_frame_index);

  // map
  w.u8(state.map.has_reference ? 1 : 0);
  w.pose(state.map.reference);
  w.f64(state.map.last_block_scale);
  w.u64(state.keyframe_indices.size());
  for (long idx : state.keyframe_indices) w.i64(idx);
  w.u64(state.map.trajectory.size());
  for (const TrajectoryEntry& t : state.map.trajectory) {
    w.i64(t.frame_index);
    w.f64(t.timestamp);
    w.pose(t.raw);
    w.pose(t.smoothed);
  }
  w.f64(state.map.cloud.voxel_size());
  w.cloud(state.map.cloud.cloud());

  // tracker
  w.i64(state.tracker.registry.next_global_id);
  w.u64(state.tracker.registry.objects.size());
  for (const auto& [id, object] : state.tracker.registry.objects) {
    w.i64(id);
    w.str(object.class_label);
    w.u8(static_cast<std::uint8_t>(object.state));
    w.f64(object.confidence);
    w.i32(object.born_block);
    w.i32(object.last_detected_block);
    w.i64(object.first_seen);
    w.i64(object.last_seen);
    w.f64(object.cloud.voxel_size());
    w.cloud(object.cloud.cloud());
    w.u64(object.medians.size());
    for (const MedianPoint& m : object.medians) {
      w.i64(m.frame_index);
      w.vec3(m.point);
    }
    w.u64(object.records.size());
    for (const TrackletRecord& r : object.records) {
      w.i64(r.frame_index);
      w.i32(r.mask_index);
    }
  }
  w.u64(state.tracker.registry.untracked.size());
  for (const UntrackedDetection& u : state.tracker.registry.untracked) {
    w.i64(u.frame_index);
    w.i32(u.mask_index);
    w.str(u.class_label);
  }
  w.u64(state.tracker.mask_assignments.size());
  for (const auto& [frame, masks] : state.tracker.mask_assignments) {
    w.i64(frame);
    w.u64(masks.size());
    for (const auto& [mi, id] : masks) {
      w.i32(mi);
      w.i64(id);
    }
  }

  // events + report
  w.u64(state.events.size());
  for (const ChangeEvent& e : state.events) {
    w.i32(e.block_index);
    w.i64(e.frame_index);
    w.i64(e.global_id);
    w.u8(static_cast<std::uint8_t>(e.type));
    w.f64(e.confidence_after);
  }
  w.str(state.report_json);
  if (!w.good()) throw DataError("short checkpoint write: " + path);
}

PipelineState load_checkpoint(const std::string& path) {
  Reader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw CorruptCheckpointError("bad magic");
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw CorruptCheckpointError("unsupported version " + std::to_string(version));
  }

  PipelineState state;
  state.config_hash = r.u64();
  state.next_block_index = r.i32();
  state.next_frame_index = r.i64();

  state.map.has_reference = r.u8() != 0;
  state.map.reference = r.pose();
  state.map.last_block_scale = r.f64();
  const std::uint64_t n_keyframes = r.u64();
  for (std::uint64_t i = 0; i < n_keyframes; ++i) state.keyframe_indices.push_back(r.i64());
  const std::uint64_t n_traj = r.u64();
  for (std::uint64_t i = 0; i < n_traj; ++i) {
    TrajectoryEntry t;
    t.frame_index = r.i64();
    t.timestamp = r.f64();
    t.raw = r.pose();
    t.smoothed = r.pose();
    state.map.trajectory.push_back(t);
  }
  state.map.cloud.set_voxel_size(r.f64());
  state.map.cloud.cloud() = r.cloud();
  state.map.cloud.rebuild_index();

  state.tracker.registry.next_global_id = r.i64();
  const std::uint64_t n_objects = r.u64();
  for (std::uint64_t i = 0; i < n_objects; ++i) {
    GlobalObject object;
    object.global_id = r.i64();
    object.class_label = r.str();
    object.state = static_cast<LifeState>(r.u8());
    object.confidence = r.f64();
    object.born_block = r.i32();
    object.last_detected_block = r.i32();
    object.first_seen = r.i64();
    object.last_seen = r.i64();
    object.cloud.set_voxel_size(r.f64());
    object.cloud.cloud() = r.cloud();
    object.cloud.rebuild_index();
    const std::uint64_t n_medians = r.u64();
    for (std::uint64_t m = 0; m < n_medians; ++m) {
      MedianPoint mp;
      mp.frame_index = r.i64();
      mp.point = r.vec3();
      object.medians.push_back(mp);
    }
    const std::uint64_t n_records = r.u64();
    for (std::uint64_t m = 0; m < n_records; ++m) {
      TrackletRecord rec;
      rec.frame_index = r.i64();
      rec.mask_index = r.i32();
      object.records.push_back(rec);
    }
    const long id = object.global_id;
    state.tracker.registry.objects.emplace(id, std::move(object));
  }
  const std::uint64_t n_untracked = r.u64();
  for (std::uint64_t i = 0; i < n_untracked; ++i) {
    UntrackedDetection u;
    u.frame_index = r.i64();
    u.mask_index = r.i32();
    u.class_label = r.str();
    state.tracker.registry.untracked.push_back(std::move(u));
  }
  const std::uint64_t n_assign = r.u64();
  for (std::uint64_t i = 0; i < n_assign; ++i) {
    const long frame = r.i64();
    const std::uint64_t n_masks = r.u64();
    for (std::uint64_t m = 0; m < n_masks; ++m) {
      const int mi = r.i32();
      state.tracker.mask_assignments[frame][mi] = r.i64();
    }
  }

  const std::uint64_t n_events = r.u64();
  for (std::uint64_t i = 0; i < n_events; ++i) {
    ChangeEvent e;
    e.block_index = r.i32();
    e.frame_index = r.i64();
    e.global_id = r.i64();
    e.type = static_cast<ChangeEventType>(r.u8());
    e.confidence_after = r.f64();
    state.events.push_back(e);
  }
  state.report_json = r.str();
  return state;
}

CheckpointSummary inspect_checkpoint(const std::string& path) {
  const PipelineState state = load_checkpoint(path);
  CheckpointSummary summary;
  summary.config_hash = state.config_hash;
  summary.next_block_index = state.next_block_index;
  summary.next_frame_index = state.next_frame_index;
  summary.trajectory_size = state.map.trajectory.size();
  summary.map_points = state.map.cloud.size();
  summary.object_count = state.tracker.registry.objects.size();
  summary.event_count = state.events.size();
  return summary;
}

}  // namespace scenemap
