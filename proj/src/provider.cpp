#include "scenemap/provider.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "scenemap/errors.hpp"

namespace scenemap {

using nlohmann::json;

void ProviderOutput::validate(size_t frame_count) const {
  if (predicted_depths.size() != frame_count || extrinsics.size() != frame_count) {
    throw InternalError("provider output length mismatch");
  }
  if (tracks.size() != query_points.size()) {
    throw InternalError("provider tracks/query length mismatch");
  }
  for (const auto& t : tracks) {
    if (t.points.size() != frame_count) throw InternalError("track trajectory length mismatch");
  }
  if (!extrinsics.empty()) {
    const Pose& first = extrinsics.front();
    if ((first.rotation() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-6 ||
        first.translation().cwiseAbs().maxCoeff() > 1e-6) {
      throw InternalError("provider extrinsics[0] must be identity");
    }
  }
}

std::vector<Eigen::Vector2d> grid_query_points(int width, int height, int stride) {
  if (stride < 1) throw ConfigError("grid stride must be >= 1");
  std::vector<Eigen::Vector2d> points;
  for (int y = 0; y < height; y += stride)
    for (int x = 0; x < width; x += stride) points.emplace_back(x, y);
  return points;
}

FileProvider::FileProvider(std::string stream_root, std::string tracks_dir)
    : stream_root_(std::move(stream_root)), tracks_dir_(std::move(tracks_dir)) {}

std::string FileProvider::tracks_file_name(long first_frame_index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "tracks_%06ld.json", first_frame_index);
  return buf;
}

ProviderOutput FileProvider::infer(const std::vector<FrameRecord>& frames,
                                   const std::vector<Eigen::Vector2d>& query_points) {
  if (frames.empty()) throw DataError("provider: empty frame list");
  ProviderOutput out;
  out.query_points = query_points;

  std::vector<Pose> native;
  for (const FrameRecord& frame : frames) {
    if (frame.pred_depth_path.empty()) {
      throw PredictionMissingError("frame " + std::to_string(frame.frame_index) +
                                   " has no stored depth prediction");
    }
    if (!frame.pred_pose) {
      throw PredictionMissingError("frame " + std::to_string(frame.frame_index) +
                                   " has no stored pose prediction");
    }
    out.predicted_depths.push_back(read_depth_file(join_path(stream_root_, frame.pred_depth_path)));
    native.push_back(*frame.pred_pose);
  }

  // Stored poses live in the provider's own global frame; re-express them
  // relative to the list's first frame.
  const Pose to_first = invert(native.front());
  for (const Pose& pose : native) out.extrinsics.push_back(compose(pose, to_first));

  if (!query_points.empty()) {
    const std::string path =
        join_path(tracks_dir_, tracks_file_name(frames.front().frame_index));
    std::ifstream is(path);
    if (!is) {
      throw PredictionMissingError("no tracks file for list starting at frame " +
                                   std::to_string(frames.front().frame_index));
    }
    json doc;
    try {
      is >> doc;
    } catch (const json::exception& e) {
      throw DataError("bad tracks file " + path + ": " + e.what());
    }

    std::vector<long> wanted;
    for (const auto& f : frames) wanted.push_back(f.frame_index);

    const json* match = nullptr;
    for (const json& entry : doc.at("entries")) {
      std::vector<long> indices = entry.at("frame_indices").get<std::vector<long>>();
      if (indices == wanted) {
        match = &entry;
        break;
      }
    }
    if (!match) {
      throw PredictionMissingError("tracks file " + path + " has no entry for the requested list");
    }
    const json& queries = match->at("queries");
    if (queries.size() != query_points.size()) {
      throw PredictionMissingError("tracks file " + path + " query set mismatch");
    }
    for (size_t i = 0; i < query_points.size(); ++i) {
      if (queries[i][0].get<double>() != query_points[i].x() ||
          queries[i][1].get<double>() != query_points[i].y()) {
        throw PredictionMissingError("tracks file " + path + " query set mismatch");
      }
    }
    for (const json& traj : match->at("tracks")) {
      TrackTrajectory t;
      for (const json& p : traj) {
        t.points.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
      }
      out.tracks.push_back(std::move(t));
    }
  }

  out.validate(frames.size());
  return out;
}

void append_tracks_entry(const std::string& tracks_dir, const std::vector<long>& frame_indices,
                         const std::vector<Eigen::Vector2d>& query_points,
                         const std::vector<TrackTrajectory>& tracks) {
  std::filesystem::create_directories(tracks_dir);
  const std::string path =
      join_path(tracks_dir, FileProvider::tracks_file_name(frame_indices.front()));

  json doc;
  {
    std::ifstream is(path);
    if (is) {
      is >> doc;
    } else {
      doc = {{"first_frame_index", frame_indices.front()}, {"entries", json::array()}};
    }
  }

  json entry;
  entry["frame_indices"] = frame_indices;
  json queries = json::array();
  for (const auto& q : query_points) queries.push_back({q.x(), q.y()});
  entry["queries"] = queries;
  json all = json::array();
  for (const auto& traj : tracks) {
    json pts = json::array();
    for (const auto& p : traj.points) pts.push_back({p.u, p.v, p.confidence});
    all.push_back(pts);
  }
  entry["tracks"] = all;
  doc["entries"].push_back(entry);

  std::ofstream os(path);
  if (!os) throw DataError("cannot open for writing: " + path);
  os << doc.dump() << '\n';
}

}  // namespace scenemap
