#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace scenemap {

struct PlyVertex {
  float x = 0.0f;
  float y = 0.0f;
  float z = 0.0f;
  std::uint8_t r = 200;
  std::uint8_t g = 200;
  std::uint8_t b = 200;
  std::uint32_t object_id = 0;  // 0 = background
};

// Binary little-endian PLY with per-vertex x,y,z float, red/green/blue uchar
// and object_id uint.
void write_ply(const std::string& path, const std::vector<PlyVertex>& vertices);

/// Reads binary little-endian PLY. Understands float/double positions and
/// optional uchar colors / uint object ids in any property order; other
/// properties are skipped.
std::vector<PlyVertex> read_ply(const std::string& path);

std::vector<Eigen::Vector3d> ply_positions(const std::vector<PlyVertex>& vertices);

}  // namespace scenemap
