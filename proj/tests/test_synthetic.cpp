#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "scenemap/block_aligner.hpp"
#include "scenemap/errors.hpp"
#include "scenemap/provider.hpp"
#include "scenemap/synthetic.hpp"

using namespace scenemap;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* tag) {
  fs::path dir = fs::temp_directory_path() / (std::string("scenemap_synth_") + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

SceneSpec wall_scene() {
  SceneSpec spec;
  spec.width = 32;
  spec.height = 24;
  spec.frame_count = 12;
  spec.block_size = 4;
  spec.keyframe_count = 2;
  spec.grid_stride = 4;
  spec.planes.push_back({2, 4.0});  // wall at z = 4
  return spec;
}

std::string slurp(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("static camera over a wall: constant depth, identity relative poses") {
  SceneSpec spec = wall_scene();
  auto scene = std::make_shared<SyntheticScene>(spec);

  const DepthMap depth = scene->render_depth(0);
  // principal ray hits the wall head-on at 4 m
  const int cx = static_cast<int>(scene->intrinsics().cx);
  const int cy = static_cast<int>(scene->intrinsics().cy);
  CHECK(depth.at(cx, cy) == doctest::Approx(4.0));

  SyntheticProvider provider(scene);
  std::vector<FrameRecord> frames;
  for (long f = 0; f < 4; ++f) frames.push_back(scene->make_frame(f));
  const ProviderOutput out = provider.infer(frames, {});
  for (const Pose& pose : out.extrinsics) {
    CHECK(pose.rotation().isApprox(Eigen::Matrix3d::Identity(), 1e-12));
    CHECK(pose.translation().norm() < 1e-12);
  }
  for (const DepthMap& d : out.predicted_depths) {
    CHECK(d.at(cx, cy) == doctest::Approx(4.0));
  }
}

TEST_CASE("translating camera yields the expected camera-from-world translations") {
  SceneSpec spec = wall_scene();
  spec.camera.kind = CameraPath::Kind::Line;
  spec.camera.velocity = Eigen::Vector3d(0.1, 0.0, 0.0);
  auto scene = std::make_shared<SyntheticScene>(spec);

  // camera center at (0.1 j, 0, 0) with identity rotation means t = -c
  for (long j = 0; j < 5; ++j) {
    const Pose pose = scene->true_pose(j);
    CHECK((pose.translation() - Eigen::Vector3d(-0.1 * j, 0.0, 0.0)).norm() < 1e-12);
  }

  SyntheticProvider provider(scene);
  std::vector<FrameRecord> frames;
  for (long f = 0; f < 4; ++f) frames.push_back(scene->make_frame(f));
  const ProviderOutput out = provider.infer(frames, {});
  for (long j = 0; j < 4; ++j) {
    CHECK((out.extrinsics[j].translation() - Eigen::Vector3d(-0.1 * j, 0.0, 0.0)).norm() < 1e-9);
  }
}

TEST_CASE("scene self-consistency: unprojected true depth lies on scene geometry") {
  SceneSpec spec = wall_scene();
  spec.camera.kind = CameraPath::Kind::Line;
  spec.camera.velocity = Eigen::Vector3d(0.05, 0.01, 0.0);
  spec.objects.push_back({"box", Eigen::Vector3d(0.3, 0.0, 2.5), Eigen::Vector3d(0.8, 0.8, 0.8),
                          0, -1});
  SyntheticScene scene(spec);

  for (long f : {0L, 5L, 11L}) {
    const DepthMap depth = scene.render_depth(f);
    const PointCloud cloud = unproject(depth, scene.intrinsics(), scene.true_pose(f), 3);
    for (const auto& p : cloud.points) {
      const bool on_wall = std::abs(p.z() - 4.0) < 1e-6;
      const Eigen::Vector3d rel = p - Eigen::Vector3d(0.3, 0.0, 2.5);
      const bool on_box = rel.cwiseAbs().maxCoeff() < 0.4 + 1e-6;
      CHECK((on_wall || on_box));
    }
  }
}

TEST_CASE("masks are exact silhouettes of visible objects") {
  SceneSpec spec = wall_scene();
  spec.objects.push_back({"box", Eigen::Vector3d(0.0, 0.0, 2.0), Eigen::Vector3d(0.5, 0.5, 0.5),
                          0, 1});
  SyntheticScene scene(spec);

  const auto masks = scene.render_masks(0);
  REQUIRE(masks.size() == 1);
  CHECK(masks[0].class_label == "box");
  CHECK(masks[0].mask.count() > 0);

  // removed after block 1 -> frames of block 2 (index >= 8) have no mask
  CHECK(scene.render_masks(8).empty());
  const std::vector<SceneEvent> events = scene.events();
  REQUIRE(events.size() == 1);
  CHECK(events[0].type == "remove");
  CHECK(events[0].block_index == 2);
}

TEST_CASE("pred_scale scales depths and pose translations consistently") {
  SceneSpec spec = wall_scene();
  spec.camera.kind = CameraPath::Kind::Line;
  spec.camera.velocity = Eigen::Vector3d(0.1, 0.0, 0.0);
  spec.pred_scale = 2.0;
  SyntheticScene scene(spec);

  const DepthMap pred = scene.predicted_depth(0);
  const DepthMap sensor = scene.sensor_depth(0);
  for (size_t i = 0; i < pred.values().size(); ++i) {
    if (std::isfinite(sensor.values()[i])) {
      CHECK(pred.values()[i] == doctest::Approx(2.0 * sensor.values()[i]));
    }
  }
  CHECK((scene.predicted_pose(3).translation() -
         2.0 * scene.true_pose(3).translation()).norm() < 1e-12);
}

TEST_CASE("tracks project exactly and lose confidence when occluded") {
  SceneSpec spec = wall_scene();
  spec.frame_count = 8;
  spec.block_size = 4;
  // box appears in block 1 right in front of the wall center
  spec.objects.push_back({"box", Eigen::Vector3d(0.0, 0.0, 2.0), Eigen::Vector3d(1.0, 1.0, 0.5),
                          1, -1});
  SyntheticScene scene(spec);

  const int cx = static_cast<int>(scene.intrinsics().cx);
  const int cy = static_cast<int>(scene.intrinsics().cy);
  const std::vector<Eigen::Vector2d> queries = {{static_cast<double>(cx),
                                                 static_cast<double>(cy)}};
  const auto tracks = scene.tracks({0, 1, 4, 5}, queries);
  REQUIRE(tracks.size() == 1);
  REQUIRE(tracks[0].points.size() == 4);
  // static camera: the wall point projects back to the query pixel
  CHECK(tracks[0].points[0].u == doctest::Approx(cx));
  CHECK(tracks[0].points[0].v == doctest::Approx(cy));
  CHECK(tracks[0].points[0].confidence == doctest::Approx(1.0));
  CHECK(tracks[0].points[1].confidence == doctest::Approx(1.0));
  // once the box occludes the wall, confidence drops
  CHECK(tracks[0].points[2].confidence == doctest::Approx(spec.occluded_track_confidence));
  CHECK(tracks[0].points[3].confidence == doctest::Approx(spec.occluded_track_confidence));
}

TEST_CASE("synth_generate is deterministic and the file provider round-trips") {
  SceneSpec spec = wall_scene();
  spec.seed = 99;
  spec.sensor_noise_sigma = 0.01;
  spec.pred_noise_sigma = 0.005;
  spec.objects.push_back({"chair", Eigen::Vector3d(0.2, 0.1, 2.2),
                          Eigen::Vector3d(0.6, 0.6, 0.6), 0, -1});

  const fs::path dir_a = temp_dir("det_a");
  const fs::path dir_b = temp_dir("det_b");
  const SynthOutputs a = synth_generate(spec, dir_a.string());
  const SynthOutputs b = synth_generate(spec, dir_b.string());
  CHECK(a.frame_count == 12);
  CHECK(a.block_count == 3);

  // byte-identical outputs for the same spec and seed
  for (const char* name : {"manifest.jsonl", "gt_trajectory.txt", "gt_inventory.json"}) {
    CHECK(slurp(dir_a / name) == slurp(dir_b / name));
  }
  CHECK(slurp(dir_a / "depth" / "sensor_000003.dpth") ==
        slurp(dir_b / "depth" / "sensor_000003.dpth"));
  CHECK(slurp(dir_a / "tracks" / "tracks_000000.json") ==
        slurp(dir_b / "tracks" / "tracks_000000.json"));

  // file provider reproduces the synthetic provider's outputs
  StreamReader reader(a.manifest_path);
  std::vector<FrameRecord> frames;
  while (auto r = reader.next()) frames.push_back(std::move(*r));
  REQUIRE(frames.size() == 12);

  auto scene = std::make_shared<SyntheticScene>(spec);
  SyntheticProvider synthetic(scene);
  FileProvider file_backed(dir_a.string(), (dir_a / "tracks").string());

  const auto queries = grid_query_points(spec.width, spec.height, spec.grid_stride);
  std::vector<FrameRecord> block0(frames.begin(), frames.begin() + 4);
  const ProviderOutput from_memory = synthetic.infer(block0, queries);
  const ProviderOutput from_files = file_backed.infer(block0, queries);

  REQUIRE(from_files.predicted_depths.size() == 4);
  REQUIRE(from_files.tracks.size() == queries.size());
  for (size_t j = 0; j < 4; ++j) {
    CHECK((from_files.extrinsics[j].translation() -
           from_memory.extrinsics[j].translation()).norm() < 1e-9);
    for (size_t i = 0; i < from_files.predicted_depths[j].values().size(); ++i) {
      const float fv = from_files.predicted_depths[j].values()[i];
      const float mv = from_memory.predicted_depths[j].values()[i];
      if (std::isfinite(mv)) CHECK(fv == mv);
    }
  }
  for (size_t q = 0; q < queries.size(); ++q) {
    for (size_t j = 0; j < 4; ++j) {
      CHECK(from_files.tracks[q].points[j].confidence ==
            doctest::Approx(from_memory.tracks[q].points[j].confidence));
    }
  }
}

TEST_CASE("file provider reports missing predictions") {
  const fs::path dir = temp_dir("missing_pred");
  FrameRecord r;
  r.frame_index = 0;
  r.timestamp = 0.0;
  r.intrinsics = {10.0, 10.0, 8.0, 6.0, 16, 12};
  {
    std::ofstream os(dir / "manifest.jsonl");
    os << manifest_line(r) << '\n';
  }
  StreamReader reader((dir / "manifest.jsonl").string());
  std::vector<FrameRecord> frames;
  frames.push_back(std::move(*reader.next()));
  FileProvider provider(dir.string(), (dir / "tracks").string());
  CHECK_THROWS_AS(provider.infer(frames, {}), PredictionMissingError);
}

TEST_CASE("scene spec validation") {
  SceneSpec spec;  // no geometry
  CHECK_THROWS_AS(spec.validate(), InvalidSpecError);
  spec.planes.push_back({2, 4.0});
  spec.keyframe_count = 99;
  CHECK_THROWS_AS(spec.validate(), InvalidSpecError);
}
