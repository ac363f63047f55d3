#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "scenemap/geometry.hpp"

namespace scenemap {

/// Row-major binary image, one byte per pixel (0 or 1).
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(int w, int h) : width(w), height(h), bits(static_cast<size_t>(w) * h, 0) {}

  std::uint8_t at(int x, int y) const { return bits[static_cast<size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return bits[static_cast<size_t>(y) * width + x]; }
  size_t count() const;
  bool empty_mask() const { return count() == 0; }
};

// Alternating run lengths of 0s and 1s over the row-major bitmap, starting
// with a 0-run, as space-separated decimal integers.
std::string rle_encode(const BinaryMask& mask);
BinaryMask rle_decode(const std::string& rle, int width, int height);

struct InstanceMask {
  std::string class_label;
  BinaryMask mask;
  double detection_confidence = 1.0;
};

struct FrameRecord {
  long frame_index = -1;
  double timestamp = 0.0;
  Intrinsics intrinsics;
  std::optional<DepthMap> sensor_depth;
  std::optional<double> feature_score;
  std::vector<InstanceMask> masks;
  // Paths are resolved against the stream root; empty means absent.
  std::string sensor_depth_path;
  std::string pred_depth_path;
  std::optional<Pose> pred_pose;  // provider-native frame
  std::string rgb_path;
};

// Depth raster file: 16-byte header (magic "DPTH", u32 width, u32 height,
// u32 reserved, little-endian) followed by row-major float32 values.
void write_depth_file(const std::string& path, const DepthMap& depth);
DepthMap read_depth_file(const std::string& path);

/// Lazily yields FrameRecords from a JSON-lines manifest in frame_index
/// order regardless of on-disk line order. Depth rasters are loaded per
/// yielded record, never all at once.
class StreamReader {
 public:
  explicit StreamReader(const std::string& manifest_path);

  // nullopt at end of stream.
  std::optional<FrameRecord> next();

  const std::string& root() const { return root_; }
  size_t frame_count() const { return offsets_.size(); }
  void reset() { cursor_ = 0; }

  // Skips records with frame_index below the bound without loading payloads.
  void seek_to_frame(long frame_index);

 private:
  std::string manifest_path_;
  std::string root_;
  std::ifstream file_;
  std::vector<std::pair<long, std::streampos>> offsets_;  // sorted by frame_index
  size_t cursor_ = 0;
};

FrameRecord parse_manifest_line(const std::string& line, const std::string& root,
                                bool load_sensor_depth = true);
std::string manifest_line(const FrameRecord& record);

/// Sharpness proxy: population variance of the 3x3 Laplacian response.
/// Pixels whose 5-point stencil touches an invalid value are skipped.
double fallback_feature_score(const DepthMap& image);

std::string join_path(const std::string& dir, const std::string& rel);

}  // namespace scenemap
