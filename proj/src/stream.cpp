#include "scenemap/stream.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "scenemap/errors.hpp"

namespace scenemap {

using nlohmann::json;

size_t BinaryMask::count() const {
  return static_cast<size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

std::string rle_encode(const BinaryMask& mask) {
  std::ostringstream os;
  std::uint8_t current = 0;
  size_t run = 0;
  bool first = true;
  auto flush = [&] {
    if (!first) os << ' ';
    os << run;
    first = false;
  };
  for (std::uint8_t bit : mask.bits) {
    if (bit == current) {
      ++run;
    } else {
      flush();
      current = bit;
      run = 1;
    }
  }
  flush();
  return os.str();
}

BinaryMask rle_decode(const std::string& rle, int width, int height) {
  BinaryMask mask(width, height);
  const size_t total = mask.bits.size();
  std::istringstream is(rle);
  size_t pos = 0;
  std::uint8_t value = 0;
  unsigned long long run = 0;
  while (is >> run) {
    if (pos + run > total) throw DataError("rle: runs exceed mask size");
    std::fill(mask.bits.begin() + pos, mask.bits.begin() + pos + run, value);
    pos += run;
    value = static_cast<std::uint8_t>(1 - value);
  }
  if (!is.eof()) throw DataError("rle: non-numeric token");
  if (pos != total) throw DataError("rle: runs do not cover mask");
  return mask;
}

namespace {

constexpr char kDepthMagic[4] = {'D', 'P', 'T', 'H'};

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char buf[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(buf), 4);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char buf[4];
  is.read(reinterpret_cast<char*>(buf), 4);
  return static_cast<std::uint32_t>(buf[0]) | (static_cast<std::uint32_t>(buf[1]) << 8) |
         (static_cast<std::uint32_t>(buf[2]) << 16) | (static_cast<std::uint32_t>(buf[3]) << 24);
}

}  // namespace

void write_depth_file(const std::string& path, const DepthMap& depth) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path);
  os.write(kDepthMagic, 4);
  write_u32(os, static_cast<std::uint32_t>(depth.width()));
  write_u32(os, static_cast<std::uint32_t>(depth.height()));
  write_u32(os, 0);
  static_assert(sizeof(float) == 4);
  os.write(reinterpret_cast<const char*>(depth.values().data()),
           static_cast<std::streamsize>(depth.values().size() * sizeof(float)));
  if (!os) throw DataError("short write: " + path);
}

DepthMap read_depth_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingFileError(path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kDepthMagic, 4) != 0) {
    throw DataError("bad depth file magic: " + path);
  }
  const std::uint32_t width = read_u32(is);
  const std::uint32_t height = read_u32(is);
  read_u32(is);  // reserved
  if (!is) throw DataError("truncated depth header: " + path);
  DepthMap depth(static_cast<int>(width), static_cast<int>(height));
  is.read(reinterpret_cast<char*>(depth.values().data()),
          static_cast<std::streamsize>(depth.values().size() * sizeof(float)));
  if (!is) throw DataError("truncated depth payload: " + path);
  depth.validate();
  return depth;
}

std::string join_path(const std::string& dir, const std::string& rel) {
  if (rel.empty()) return rel;
  std::filesystem::path p(rel);
  if (p.is_absolute()) return rel;
  return (std::filesystem::path(dir) / p).string();
}

namespace {

json pose_to_json(const Pose& pose) {
  json arr = json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) arr.push_back(pose.rotation()(r, c));
  for (int r = 0; r < 3; ++r) arr.push_back(pose.translation()(r));
  return arr;
}

Pose pose_from_json(const json& arr) {
  if (!arr.is_array() || arr.size() != 12) throw MalformedManifestError("pose must hold 12 reals");
  Eigen::Matrix3d rotation;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rotation(r, c) = arr[r * 3 + c].get<double>();
  Eigen::Vector3d translation(arr[9].get<double>(), arr[10].get<double>(), arr[11].get<double>());
  return Pose(rotation, translation);
}

}  // namespace

FrameRecord parse_manifest_line(const std::string& line, const std::string& root,
                                bool load_sensor_depth) {
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::exception& e) {
    throw MalformedManifestError(e.what());
  }
  FrameRecord record;
  try {
    record.frame_index = doc.at("frame_index").get<long>();
    record.timestamp = doc.at("timestamp").get<double>();
    const json& intr = doc.at("intrinsics");
    record.intrinsics.fx = intr.at("fx").get<double>();
    record.intrinsics.fy = intr.at("fy").get<double>();
    record.intrinsics.cx = intr.at("cx").get<double>();
    record.intrinsics.cy = intr.at("cy").get<double>();
    record.intrinsics.width = intr.at("width").get<int>();
    record.intrinsics.height = intr.at("height").get<int>();
    record.intrinsics.validate();

    if (doc.contains("depth_sensor") && !doc["depth_sensor"].is_null()) {
      record.sensor_depth_path = doc["depth_sensor"].get<std::string>();
    }
    if (doc.contains("depth_pred") && !doc["depth_pred"].is_null()) {
      record.pred_depth_path = doc["depth_pred"].get<std::string>();
    }
    if (doc.contains("pose") && !doc["pose"].is_null()) {
      record.pred_pose = pose_from_json(doc["pose"]);
    }
    if (doc.contains("feature_score") && !doc["feature_score"].is_null()) {
      record.feature_score = doc["feature_score"].get<double>();
    }
    if (doc.contains("rgb") && !doc["rgb"].is_null()) {
      record.rgb_path = doc["rgb"].get<std::string>();
    }
    if (doc.contains("masks")) {
      for (const json& m : doc["masks"]) {
        InstanceMask mask;
        mask.class_label = m.at("class").get<std::string>();
        mask.detection_confidence = m.at("conf").get<double>();
        mask.mask = rle_decode(m.at("rle").get<std::string>(), record.intrinsics.width,
                               record.intrinsics.height);
        if (mask.mask.empty_mask()) {
          throw MalformedManifestError("mask with no set bits in frame " +
                                       std::to_string(record.frame_index));
        }
        record.masks.push_back(std::move(mask));
      }
    }
  } catch (const json::exception& e) {
    throw MalformedManifestError(e.what());
  }

  if (load_sensor_depth && !record.sensor_depth_path.empty()) {
    record.sensor_depth = read_depth_file(join_path(root, record.sensor_depth_path));
    if (record.sensor_depth->width() != record.intrinsics.width ||
        record.sensor_depth->height() != record.intrinsics.height) {
      throw DataError("sensor depth size mismatch in frame " +
                      std::to_string(record.frame_index));
    }
  }
  return record;
}

std::string manifest_line(const FrameRecord& record) {
  json doc;
  doc["frame_index"] = record.frame_index;
  doc["timestamp"] = record.timestamp;
  doc["intrinsics"] = {{"fx", record.intrinsics.fx}, {"fy", record.intrinsics.fy},
                       {"cx", record.intrinsics.cx}, {"cy", record.intrinsics.cy},
                       {"width", record.intrinsics.width}, {"height", record.intrinsics.height}};
  doc["depth_sensor"] = record.sensor_depth_path.empty() ? json(nullptr)
                                                         : json(record.sensor_depth_path);
  doc["depth_pred"] = record.pred_depth_path.empty() ? json(nullptr) : json(record.pred_depth_path);
  doc["pose"] = record.pred_pose ? pose_to_json(*record.pred_pose) : json(nullptr);
  doc["feature_score"] = record.feature_score ? json(*record.feature_score) : json(nullptr);
  doc["rgb"] = record.rgb_path.empty() ? json(nullptr) : json(record.rgb_path);
  json masks = json::array();
  for (const auto& m : record.masks) {
    masks.push_back({{"class", m.class_label}, {"rle", rle_encode(m.mask)},
                     {"conf", m.detection_confidence}});
  }
  doc["masks"] = masks;
  return doc.dump();
}

StreamReader::StreamReader(const std::string& manifest_path) : manifest_path_(manifest_path) {
  root_ = std::filesystem::path(manifest_path).parent_path().string();
  if (root_.empty()) root_ = ".";
  file_.open(manifest_path);
  if (!file_) throw MissingFileError(manifest_path);

  // Index line offsets by frame_index so iteration order is independent of
  // on-disk line order. Payloads stay on disk until next().
  std::string line;
  std::streampos pos = file_.tellg();
  while (std::getline(file_, line)) {
    if (line.find_first_not_of(" \t\r\n") != std::string::npos) {
      json doc;
      try {
        doc = json::parse(line);
        offsets_.emplace_back(doc.at("frame_index").get<long>(), pos);
      } catch (const json::exception& e) {
        throw MalformedManifestError(e.what());
      }
    }
    pos = file_.tellg();
  }
  std::stable_sort(offsets_.begin(), offsets_.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  for (size_t i = 1; i < offsets_.size(); ++i) {
    if (offsets_[i].first == offsets_[i - 1].first) {
      throw NonMonotoneIndexError("duplicate frame_index " + std::to_string(offsets_[i].first));
    }
  }
  file_.clear();
}

std::optional<FrameRecord> StreamReader::next() {
  if (cursor_ >= offsets_.size()) return std::nullopt;
  file_.clear();
  file_.seekg(offsets_[cursor_].second);
  std::string line;
  if (!std::getline(file_, line)) throw MalformedManifestError("cannot re-read manifest line");
  FrameRecord record = parse_manifest_line(line, root_);
  if (record.frame_index != offsets_[cursor_].first) {
    throw MalformedManifestError("manifest changed during iteration");
  }
  ++cursor_;
  return record;
}

void StreamReader::seek_to_frame(long frame_index) {
  cursor_ = 0;
  while (cursor_ < offsets_.size() && offsets_[cursor_].first < frame_index) ++cursor_;
}

double fallback_feature_score(const DepthMap& image) {
  std::vector<double> responses;
  for (int y = 1; y + 1 < image.height(); ++y) {
    for (int x = 1; x + 1 < image.width(); ++x) {
      if (!image.valid(x, y) || !image.valid(x - 1, y) || !image.valid(x + 1, y) ||
          !image.valid(x, y - 1) || !image.valid(x, y + 1)) {
        continue;
      }
      const double lap = image.at(x - 1, y) + image.at(x + 1, y) + image.at(x, y - 1) +
                         image.at(x, y + 1) - 4.0 * image.at(x, y);
      responses.push_back(lap);
    }
  }
  if (responses.size() < 2) return 0.0;
  const double mean =
      std::accumulate(responses.begin(), responses.end(), 0.0) / responses.size();
  double var = 0.0;
  for (double r : responses) var += (r - mean) * (r - mean);
  return var / responses.size();
}

}  // namespace scenemap
