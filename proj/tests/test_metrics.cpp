#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>
#include <filesystem>
#include <random>

#include "scenemap/errors.hpp"
#include "scenemap/metrics.hpp"
#include "scenemap/ply_io.hpp"

using namespace scenemap;

namespace {

Trajectory make_traj(const std::vector<Eigen::Vector3d>& centers, double t0 = 0.0,
                     double dt = 0.1) {
  Trajectory traj;
  for (size_t i = 0; i < centers.size(); ++i) {
    const Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
    traj.push_back({t0 + dt * i, Pose(R, -(R * centers[i]))});
  }
  return traj;
}

// Independent absolute-orientation oracle: Horn's closed-form quaternion
// method for the rotation, regression scale, direct RMSE.
double horn_rmse(const std::vector<Eigen::Vector3d>& src, const std::vector<Eigen::Vector3d>& dst,
                 bool with_scale) {
  const size_t n = src.size();
  Eigen::Vector3d mu_s = Eigen::Vector3d::Zero(), mu_d = Eigen::Vector3d::Zero();
  for (size_t i = 0; i < n; ++i) {
    mu_s += src[i];
    mu_d += dst[i];
  }
  mu_s /= n;
  mu_d /= n;

  Eigen::Matrix3d M = Eigen::Matrix3d::Zero();
  double var_src = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d x = src[i] - mu_s;
    const Eigen::Vector3d y = dst[i] - mu_d;
    M += x * y.transpose();  // note: src-dst order, Horn's S matrix
    var_src += x.squaredNorm();
  }

  Eigen::Matrix4d N;
  const double sxx = M(0, 0), sxy = M(0, 1), sxz = M(0, 2);
  const double syx = M(1, 0), syy = M(1, 1), syz = M(1, 2);
  const double szx = M(2, 0), szy = M(2, 1), szz = M(2, 2);
  N << sxx + syy + szz, syz - szy, szx - sxz, sxy - syx,
       syz - szy, sxx - syy - szz, sxy + syx, szx + sxz,
       szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy,
       sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz;

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(N);
  const Eigen::Vector4d q = eig.eigenvectors().col(3);  // largest eigenvalue
  const Eigen::Quaterniond quat(q(0), q(1), q(2), q(3));
  const Eigen::Matrix3d R = quat.normalized().toRotationMatrix();

  double scale = 1.0;
  if (with_scale) {
    double num = 0.0;
    for (size_t i = 0; i < n; ++i) {
      num += (dst[i] - mu_d).dot(R * (src[i] - mu_s));
    }
    scale = num / var_src;
  }
  const Eigen::Vector3d t = mu_d - scale * (R * mu_s);
  double sum = 0.0;
  for (size_t i = 0; i < n; ++i) sum += (dst[i] - (scale * (R * src[i]) + t)).squaredNorm();
  return std::sqrt(sum / n);
}

std::vector<Eigen::Vector3d> random_cloud(std::mt19937_64& rng, size_t count, double extent) {
  std::uniform_real_distribution<double> u(-extent, extent);
  std::vector<Eigen::Vector3d> cloud;
  for (size_t i = 0; i < count; ++i) cloud.emplace_back(u(rng), u(rng), u(rng));
  return cloud;
}

}  // namespace

TEST_CASE("association") {
  SUBCASE("identical timestamps match 1:1") {
    const auto est = make_traj({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}});
    const auto matches = associate(est, est, 0.02);
    REQUIRE(matches.size() == 3);
    for (size_t i = 0; i < 3; ++i) CHECK(matches[i] == std::pair<size_t, size_t>{i, i});
  }
  SUBCASE("offset beyond the window yields no matches") {
    const auto est = make_traj({{0, 0, 0}, {1, 0, 0}}, 0.0);
    const auto gt = make_traj({{0, 0, 0}, {1, 0, 0}}, 0.04);
    CHECK_THROWS_AS(associate(est, gt, 0.02), NoMatchesError);
  }
  SUBCASE("small jitter still matches fully") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> jitter(-0.005, 0.005);
    Trajectory est = make_traj(std::vector<Eigen::Vector3d>(20, Eigen::Vector3d::Zero()));
    Trajectory gt = est;
    for (auto& s : gt) s.timestamp += jitter(rng);
    CHECK(associate(est, gt, 0.02).size() == 20);
  }
}

TEST_CASE("umeyama alignment") {
  std::mt19937_64 rng(7);
  const auto src = random_cloud(rng, 20, 2.0);

  SUBCASE("identity on equal clouds") {
    const Similarity s = align_umeyama(src, src, true);
    CHECK(s.scale == doctest::Approx(1.0));
    CHECK(s.rotation.isApprox(Eigen::Matrix3d::Identity(), 1e-12));
    CHECK(s.translation.norm() < 1e-12);
  }
  SUBCASE("recovers a constructed similarity") {
    const Eigen::Matrix3d R =
        Eigen::AngleAxisd(M_PI / 2.0, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    const Eigen::Vector3d t(0.5, -1.0, 2.0);
    std::vector<Eigen::Vector3d> dst;
    for (const auto& p : src) dst.push_back(2.0 * (R * p) + t);
    const Similarity s = align_umeyama(src, dst, true);
    CHECK(s.scale == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(s.rotation.isApprox(R, 1e-9));
    CHECK((s.translation - t).norm() < 1e-9);
    for (size_t i = 0; i < src.size(); ++i) CHECK((s.apply(src[i]) - dst[i]).norm() < 1e-9);
  }
  SUBCASE("degenerate sources are rejected") {
    const std::vector<Eigen::Vector3d> two = {{0, 0, 0}, {1, 0, 0}};
    CHECK_THROWS_AS(align_umeyama(two, two, false), DegenerateConfigurationError);
    const std::vector<Eigen::Vector3d> collinear = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
    CHECK_THROWS_AS(align_umeyama(collinear, collinear, false),
                    DegenerateConfigurationError);
  }
}

TEST_CASE("ate rmse") {
  SUBCASE("zero on identical trajectories") {
    const auto est = make_traj({{0, 0, 0}, {1, 0, 0}, {2, 0.5, 0}, {3, 0.2, 0.7}});
    CHECK(ate_rmse(est, est, 0.02, false) < 1e-12);
  }
  SUBCASE("alignment absorbs a constant offset") {
    const auto gt = make_traj({{0, 0, 0}, {1, 0, 0}, {2, 0.5, 0}, {3, 0.2, 0.7}});
    std::vector<Eigen::Vector3d> shifted;
    for (const auto& s : gt) shifted.push_back(s.pose.camera_center() + Eigen::Vector3d(5, 6, 7));
    const auto est = make_traj(shifted);
    CHECK(ate_rmse(est, gt, 0.02, false) < 1e-9);
  }
  SUBCASE("three-pose toy equals the independent oracle") {
    const auto gt = make_traj({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}});
    const auto est = make_traj({{0, 0, 0}, {1, 0, 0.3}, {2, 0, 0}});
    const double ours = ate_rmse(est, gt, 0.02, false);
    std::vector<Eigen::Vector3d> src, dst;
    for (const auto& s : est) src.push_back(s.pose.camera_center());
    for (const auto& s : gt) dst.push_back(s.pose.camera_center());
    const double oracle = horn_rmse(src, dst, false);
    CHECK(ours == doctest::Approx(oracle).epsilon(1e-12));
  }
  SUBCASE("matches the oracle on random instances") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
      const size_t n = 50 + 45 * trial;  // up to 455
      const auto gt_centers = random_cloud(rng, n, 3.0);
      std::vector<Eigen::Vector3d> est_centers = gt_centers;
      std::normal_distribution<double> noise(0.0, 0.05);
      for (auto& c : est_centers) c += Eigen::Vector3d(noise(rng), noise(rng), noise(rng));

      const auto gt = make_traj(gt_centers);
      const auto est = make_traj(est_centers);
      for (bool with_scale : {false, true}) {
        const double ours = ate_rmse(est, gt, 0.02, with_scale);
        const double oracle = horn_rmse(est_centers, gt_centers, with_scale);
        CHECK(std::abs(ours - oracle) < 1e-12);
      }
    }
  }
  SUBCASE("invariant under rigid and similarity transforms of the estimate") {
    std::mt19937_64 rng(13);
    const auto gt_centers = random_cloud(rng, 40, 2.0);
    std::vector<Eigen::Vector3d> est_centers = gt_centers;
    std::normal_distribution<double> noise(0.0, 0.1);
    for (auto& c : est_centers) c += Eigen::Vector3d(noise(rng), noise(rng), noise(rng));
    const auto gt = make_traj(gt_centers);
    const double base_rigid = ate_rmse(make_traj(est_centers), gt, 0.02, false);
    const double base_sim = ate_rmse(make_traj(est_centers), gt, 0.02, true);

    Eigen::Quaterniond q(0.2, -0.4, 0.1, 0.86);
    q.normalize();
    const Eigen::Matrix3d R = q.toRotationMatrix();
    const Eigen::Vector3d t(10, -3, 2);
    std::vector<Eigen::Vector3d> rigid, similar;
    for (const auto& c : est_centers) {
      rigid.push_back(R * c + t);
      similar.push_back(3.0 * (R * c) + t);
    }
    CHECK(std::abs(ate_rmse(make_traj(rigid), gt, 0.02, false) - base_rigid) < 1e-9);
    CHECK(std::abs(ate_rmse(make_traj(similar), gt, 0.02, true) - base_sim) < 1e-9);
  }
}

TEST_CASE("kd-tree nearest neighbors match brute force") {
  std::mt19937_64 rng(17);
  const auto cloud = random_cloud(rng, 400, 5.0);
  const KdTree tree(cloud);
  const auto queries = random_cloud(rng, 100, 6.0);
  for (const auto& q : queries) {
    double brute = std::numeric_limits<double>::infinity();
    for (const auto& p : cloud) brute = std::min(brute, (p - q).norm());
    CHECK(tree.nearest_distance(q) == doctest::Approx(brute).epsilon(1e-12));
  }
}

TEST_CASE("reconstruction metrics") {
  SUBCASE("identical clouds give zeros") {
    std::mt19937_64 rng(19);
    const auto cloud = random_cloud(rng, 100, 2.0);
    const ReconMetrics m = recon_metrics(cloud, cloud);
    CHECK(m.accuracy == 0.0);
    CHECK(m.completion == 0.0);
    CHECK(m.chamfer == 0.0);
  }
  SUBCASE("hand example: one extra point at distance 1") {
    const std::vector<Eigen::Vector3d> gt = {{0, 0, 0}};
    const std::vector<Eigen::Vector3d> pred = {{0, 0, 0}, {1, 0, 0}};
    const ReconMetrics m = recon_metrics(pred, gt);
    CHECK(m.accuracy == doctest::Approx(0.5));
    CHECK(m.completion == doctest::Approx(0.0));
    CHECK(m.chamfer == doctest::Approx(0.25));
  }
  SUBCASE("matches the exhaustive oracle on clouds up to 500 points") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 5; ++trial) {
      const auto pred = random_cloud(rng, 300 + 40 * trial, 2.0);
      const auto gt = random_cloud(rng, 250 + 50 * trial, 2.0);
      const ReconMetrics m = recon_metrics(pred, gt);

      auto directed = [](const std::vector<Eigen::Vector3d>& from,
                         const std::vector<Eigen::Vector3d>& to) {
        double sum = 0.0;
        for (const auto& p : from) {
          double best = std::numeric_limits<double>::infinity();
          for (const auto& q : to) best = std::min(best, (p - q).norm());
          sum += best;
        }
        return sum / from.size();
      };
      CHECK(std::abs(m.accuracy - directed(pred, gt)) < 1e-12);
      CHECK(std::abs(m.completion - directed(gt, pred)) < 1e-12);
      CHECK(std::abs(m.chamfer - 0.5 * (m.accuracy + m.completion)) < 1e-15);
      // duality
      const ReconMetrics swapped = recon_metrics(gt, pred);
      CHECK(m.accuracy == doctest::Approx(swapped.completion).epsilon(1e-15));
    }
  }
  SUBCASE("empty clouds are rejected") {
    CHECK_THROWS_AS(recon_metrics({}, {{0, 0, 0}}), EmptyCloudError);
  }
}

TEST_CASE("tum file round trip") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "scenemap_tum";
  fs::create_directories(dir);
  const std::string path = (dir / "traj.tum").string();

  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(-1, 1);
  std::string text;
  Trajectory original;
  for (int i = 0; i < 10; ++i) {
    Eigen::Quaterniond q(u(rng), u(rng), u(rng), u(rng));
    q.normalize();
    const Eigen::Matrix3d R = q.toRotationMatrix();
    const Eigen::Vector3d c(u(rng), u(rng), u(rng));
    const Pose pose(R, -(R * c));
    original.push_back({0.1 * i, pose});
    write_tum_line(text, 0.1 * i, pose);
  }
  {
    std::ofstream os(path);
    os << "# comment line\n" << text;
  }
  const Trajectory back = read_tum(path);
  REQUIRE(back.size() == original.size());
  for (size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].timestamp == doctest::Approx(original[i].timestamp));
    CHECK((back[i].pose.camera_center() - original[i].pose.camera_center()).norm() < 1e-6);
    CHECK((back[i].pose.rotation() - original[i].pose.rotation()).cwiseAbs().maxCoeff() < 1e-6);
  }
  CHECK_THROWS_AS(read_tum((dir / "missing.tum").string()), MissingFileError);
}

TEST_CASE("ply round trip preserves the point multiset") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "scenemap_ply";
  fs::create_directories(dir);
  const std::string path = (dir / "cloud.ply").string();

  std::vector<PlyVertex> vertices;
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<float> u(-10.0f, 10.0f);
  for (int i = 0; i < 257; ++i) {
    PlyVertex v;
    v.x = u(rng);
    v.y = u(rng);
    v.z = u(rng);
    v.r = static_cast<std::uint8_t>(i % 256);
    v.g = 7;
    v.b = 9;
    v.object_id = static_cast<std::uint32_t>(i % 5);
    vertices.push_back(v);
  }
  write_ply(path, vertices);
  const auto back = read_ply(path);
  REQUIRE(back.size() == vertices.size());
  for (size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].x == vertices[i].x);
    CHECK(back[i].y == vertices[i].y);
    CHECK(back[i].z == vertices[i].z);
    CHECK(back[i].r == vertices[i].r);
    CHECK(back[i].object_id == vertices[i].object_id);
  }
}
