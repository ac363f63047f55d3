#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "scenemap/errors.hpp"
#include "scenemap/stream.hpp"

using namespace scenemap;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* tag) {
  fs::path dir = fs::temp_directory_path() / (std::string("scenemap_test_") + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

FrameRecord sample_record(long index) {
  FrameRecord r;
  r.frame_index = index;
  r.timestamp = 0.1 * index;
  r.intrinsics = {50.0, 50.0, 16.0, 12.0, 32, 24};
  r.feature_score = 1.0 + index;
  InstanceMask m;
  m.class_label = "chair";
  m.detection_confidence = 0.8;
  m.mask = BinaryMask(32, 24);
  m.mask.at(5, 5) = 1;
  m.mask.at(6, 5) = 1;
  r.masks.push_back(m);
  return r;
}

}  // namespace

TEST_CASE("rle round trip is a bijection on random images") {
  std::mt19937_64 rng(37);
  std::bernoulli_distribution bit(0.3);
  for (int trial = 0; trial < 30; ++trial) {
    BinaryMask mask(17, 9);
    for (auto& b : mask.bits) b = bit(rng) ? 1 : 0;
    const std::string rle = rle_encode(mask);
    const BinaryMask decoded = rle_decode(rle, 17, 9);
    CHECK(decoded.bits == mask.bits);
    // canonical form re-encodes identically
    CHECK(rle_encode(decoded) == rle);
  }
}

TEST_CASE("rle starts with the zero run") {
  BinaryMask mask(4, 1);
  mask.bits = {1, 1, 0, 1};
  CHECK(rle_encode(mask) == "0 2 1 1");
  BinaryMask all_zero(3, 1);
  CHECK(rle_encode(all_zero) == "3");
  CHECK_THROWS_AS(rle_decode("2 5", 2, 2), DataError);
  CHECK_THROWS_AS(rle_decode("1 1", 2, 2), DataError);
}

TEST_CASE("depth file round trip preserves bits") {
  const fs::path dir = temp_dir("depth");
  DepthMap d(7, 5);
  d.at(0, 0) = 1.25f;
  d.at(3, 2) = 0.333f;
  d.at(6, 4) = 9.75f;
  const std::string path = (dir / "d.dpth").string();
  write_depth_file(path, d);
  const DepthMap back = read_depth_file(path);
  REQUIRE(back.width() == 7);
  REQUIRE(back.height() == 5);
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 7; ++x) {
      if (d.valid(x, y)) {
        CHECK(back.at(x, y) == d.at(x, y));
      } else {
        CHECK_FALSE(back.valid(x, y));
      }
    }
  }
  CHECK_THROWS_AS(read_depth_file((dir / "missing.dpth").string()), MissingFileError);
}

TEST_CASE("manifest line round trip preserves every field") {
  FrameRecord r = sample_record(3);
  const std::string line = manifest_line(r);
  const FrameRecord back = parse_manifest_line(line, ".", false);
  CHECK(back.frame_index == r.frame_index);
  CHECK(back.timestamp == r.timestamp);
  CHECK(back.intrinsics.fx == r.intrinsics.fx);
  CHECK(back.intrinsics.width == r.intrinsics.width);
  CHECK(back.feature_score == r.feature_score);
  REQUIRE(back.masks.size() == 1);
  CHECK(back.masks[0].class_label == "chair");
  CHECK(back.masks[0].detection_confidence == 0.8);
  CHECK(back.masks[0].mask.bits == r.masks[0].mask.bits);
  CHECK(manifest_line(back) == line);  // byte-stable
}

TEST_CASE("stream iterates in frame_index order for any on-disk permutation") {
  const fs::path dir = temp_dir("stream");
  std::vector<long> order = {4, 0, 2, 1, 3};
  {
    std::ofstream os(dir / "manifest.jsonl");
    for (long i : order) os << manifest_line(sample_record(i)) << '\n';
  }
  StreamReader reader((dir / "manifest.jsonl").string());
  CHECK(reader.frame_count() == 5);
  long expected = 0;
  while (auto r = reader.next()) {
    CHECK(r->frame_index == expected);
    ++expected;
  }
  CHECK(expected == 5);
}

TEST_CASE("stream errors") {
  const fs::path dir = temp_dir("stream_err");
  CHECK_THROWS_AS(StreamReader((dir / "nope.jsonl").string()), MissingFileError);

  {
    std::ofstream os(dir / "dup.jsonl");
    os << manifest_line(sample_record(1)) << '\n';
    os << manifest_line(sample_record(1)) << '\n';
  }
  CHECK_THROWS_AS(StreamReader((dir / "dup.jsonl").string()), NonMonotoneIndexError);

  {
    std::ofstream os(dir / "bad.jsonl");
    os << "{not json\n";
  }
  CHECK_THROWS_AS(StreamReader((dir / "bad.jsonl").string()), MalformedManifestError);

  // referenced depth file does not exist
  {
    FrameRecord r = sample_record(0);
    r.sensor_depth_path = "depth/gone.dpth";
    std::ofstream os(dir / "missing_depth.jsonl");
    os << manifest_line(r) << '\n';
  }
  StreamReader reader((dir / "missing_depth.jsonl").string());
  try {
    reader.next();
    FAIL("expected MissingFileError");
  } catch (const MissingFileError& e) {
    CHECK(std::string(e.what()).find("gone.dpth") != std::string::npos);
  }
}

TEST_CASE("fallback feature score") {
  DepthMap flat(16, 16, 2.0f);
  CHECK(fallback_feature_score(flat) == 0.0);

  // checkerboard vs its box-blurred copy
  DepthMap sharp(16, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) sharp.at(x, y) = ((x + y) % 2 == 0) ? 1.0f : 2.0f;

  DepthMap blurred(16, 16);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      double sum = 0.0;
      int count = 0;
      for (int dy = -2; dy <= 2; ++dy) {
        for (int dx = -2; dx <= 2; ++dx) {
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || nx >= 16 || ny < 0 || ny >= 16) continue;
          sum += sharp.at(nx, ny);
          ++count;
        }
      }
      blurred.at(x, y) = static_cast<float>(sum / count);
    }
  }
  CHECK(fallback_feature_score(sharp) > fallback_feature_score(blurred));

  // invariance to a constant offset
  DepthMap offset = sharp;
  for (auto& v : offset.values()) v += 5.0f;
  CHECK(fallback_feature_score(offset) ==
        doctest::Approx(fallback_feature_score(sharp)).epsilon(1e-9));
}
