#include <random>
#include <map>
#include <set>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "fploc/features.hpp"
#include "fploc/plan_gen.hpp"

using namespace fploc;

namespace {

struct Frame {
  LidarScan scan;
  SegmentedScan seg;
};

Frame square_frame(const Pose6& pose, double noise = 0.02) {
  Scene scene{plans::square_room(8.3, 7.1)};
  scene.ceiling_z = 2.5;
  SensorModel s = SensorModel::os1_64();
  s.range_noise_sigma = noise;
  Frame f{simulate_scan(scene, pose, s, 3), {}};
  SegmentationConfig cfg;
  cfg.ceiling_z = 2.5;
  f.seg = segment_scan(f.scan, cfg);
  return f;
}

double nearest_wall(const FloorPlan& plan, const Vec2& p) { return brute_force_nearest(p, plan, 1).front().distance; }

FeaturePoint fp(Vec2 p, FeatureKind k, int index) {
  FeaturePoint f;
  f.position = p;
  f.kind = k;
  f.index = index;
  return f;
}

}  // namespace

TEST_CASE("smoothness of collinear points") {
  std::vector<Vec3> line;
  for (int i = 0; i < 30; ++i) line.emplace_back(3.0, -1.5 + 0.1 * i, 0.2);
  const auto c = compute_smoothness(line, 5);
  for (int i = 0; i < 30; ++i) {
    if (i < 5 || i >= 25) {
      CHECK(std::isnan(c[i]));
    } else {
      CHECK(c[i] == doctest::Approx(0.0).epsilon(1e-12));
    }
  }
  CHECK(std::all_of(compute_smoothness(std::vector<Vec3>(line.begin(), line.begin() + 10), 5).begin(),
                    compute_smoothness(std::vector<Vec3>(line.begin(), line.begin() + 10), 5).end(),
                    [](double v) { return std::isnan(v); }));
}

TEST_CASE("smoothness is invalid at range discontinuities and index gaps") {
  std::vector<Vec3> pts;
  std::vector<int> idx;
  for (int i = 0; i < 40; ++i) {
    const double az = -0.4 + 0.02 * i;
    const double r = i < 20 ? 3.0 : 5.0;  // a door edge
    pts.emplace_back(r * std::cos(az), r * std::sin(az), 0);
    idx.push_back(i < 30 ? i : i + 3);
  }
  const auto c = compute_smoothness(pts, idx, 5, 0.1);
  // Windows of 5 on each side: the jump sits between 19 and 20, the gap between 29 and 30.
  for (int i = 15; i < 25; ++i) CHECK(std::isnan(c[i]));
  for (int i = 25; i < 35; ++i) CHECK(std::isnan(c[i]));
  CHECK(std::isfinite(c[8]));
  CHECK(std::isfinite(c[14]));

  RingPoints ring{0, pts, idx};
  FeatureConfig cfg;
  for (const auto& f : extract_features({ring}, 1024, cfg)) {
    if (f.kind == FeatureKind::kCorner) CHECK(std::isfinite(f.smoothness));
    CHECK((f.index < 15 || f.index > 37));
  }
}

TEST_CASE("corners at the four junctions of a square room") {
  const Pose6 pose{3.1, 2.9, 1.6, 0, 0, 0.2};
  const Frame f = square_frame(pose, 0.0);
  const auto rings = wall_rings(f.scan, f.seg);
  const auto feats = extract_features(rings, 1024, FeatureConfig{});
  const std::vector<Vec2> corners = {Vec2(0, 0), Vec2(8.3, 0), Vec2(8.3, 7.1), Vec2(0, 7.1)};
  int rings_checked = 0;
  for (const auto& ring : rings) {
    if (ring.points.size() < 1024) continue;  // rings that see wall at every azimuth
    ++rings_checked;
    for (const Vec2& c : corners) {
      const Vec2 d = c - Vec2(pose.x, pose.y);
      const double az = wrap_positive(std::atan2(d.y(), d.x()) - pose.yaw);
      const int step = static_cast<int>(std::lround(az / kTwoPi * 1024)) % 1024;
      bool found = false;
      for (const auto& ft : feats) {
        if (ft.ring != ring.ring || ft.kind != FeatureKind::kCorner) continue;
        const int diff = std::abs(ft.index - step);
        found = found || std::min(diff, 1024 - diff) <= 2;
      }
      CHECK(found);
    }
  }
  CHECK(rings_checked >= 20);
}

TEST_CASE("a single flat wall yields only surface points") {
  std::vector<Vec3> pts;
  std::vector<int> idx;
  // +-70 degrees; past that the grazing spacing alone pushes c over the corner threshold.
  for (int k = -200; k <= 200; ++k) {
    const double az = kTwoPi * k / 1024;
    pts.emplace_back(2.0, 2.0 * std::tan(az), 0.3);
    idx.push_back((k + 1024) % 1024);
  }
  // Keep azimuth order.
  std::vector<int> order(pts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = int(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return idx[a] < idx[b]; });
  RingPoints ring;
  for (int i : order) {
    ring.points.push_back(pts[i]);
    ring.index.push_back(idx[i]);
  }
  const auto feats = extract_features({ring}, 1024, FeatureConfig{});
  std::set<int> sectors;
  for (const auto& f : feats) {
    CHECK(f.kind == FeatureKind::kSurface);
    sectors.insert(f.index * 6 / 1024);
  }
  CHECK(sectors.size() >= 3);
}

TEST_CASE("feature caps") {
  const Frame f = square_frame(Pose6{4, 3, 1.6, 0.02, -0.01, 1.0});
  const FeatureConfig cfg;
  const auto feats = extract_features(wall_rings(f.scan, f.seg), 1024, cfg);
  CHECK(feats.size() <= 64u * 6 * (2 + 4));
  std::map<int, int> corners;
  std::set<std::pair<int, int>> seen;
  for (const auto& ft : feats) {
    corners[ft.ring] += ft.kind == FeatureKind::kCorner;
    CHECK(seen.insert({ft.ring, ft.index}).second);
  }
  for (const auto& [ring, n] : corners) CHECK(n <= cfg.sectors * cfg.n_corner);
}

TEST_CASE("projection") {
  FeatureConfig cfg;
  std::vector<Feature3> f3;
  for (int i = 0; i < 20; ++i) f3.push_back({Vec3(1.0 + 0.1 * i, -0.5 * i, 0.3 * i - 1), FeatureKind::kSurface, 0, i});
  const FeatureSet level = project_features(f3, VerticalState{}, cfg, false);
  for (std::size_t i = 0; i < f3.size(); ++i) CHECK(level.points[i].position == f3[i].point.head<2>());

  // A vertical wall x = 3 seen by a sensor pitched 10 degrees.
  const double pitch = 10 * kPi / 180;
  const Eigen::Matrix3d to_sensor = leveling_rotation(0, pitch).transpose();
  std::vector<Feature3> wall;
  for (int i = 0; i < 50; ++i) {
    wall.push_back({to_sensor * Vec3(3.0, -2.0 + 0.08 * i, -1.0 + 0.05 * i), FeatureKind::kSurface, 0, i});
  }
  VerticalState vs;
  vs.pitch = pitch;
  for (const auto& p : project_features(wall, vs, cfg, false).points) CHECK(std::abs(p.position.x() - 3.0) < 1e-3);
}

TEST_CASE("projected wall features lie on the plan walls") {
  const Pose6 pose{5.2, 3.3, 1.55, 0.04, -0.03, -0.6};
  const Frame f = square_frame(pose);
  const FeatureSet set = frame_features(f.scan, f.seg, FeatureConfig{});
  const FloorPlan plan = plans::square_room(8.3, 7.1);
  const PlanarPose planar = pose.planar();
  // Sectors without a real corner still yield their two sharpest points, which under
  // 2 cm noise are the noisiest ones; only surface points get the tight bound.
  std::size_t close = 0, surface = 0;
  double sum2 = 0;
  for (const auto& p : set.points) {
    const double d = nearest_wall(plan, planar.apply(p.position));
    if (p.kind == FeatureKind::kSurface) {
      ++surface;
      close += d < 0.05;
    }
    sum2 += d * d;
  }
  REQUIRE(surface > 200);
  CHECK(double(close) / surface > 0.99);
  CHECK(std::sqrt(sum2 / set.points.size()) <= 2 * 0.02);
}

TEST_CASE("grouping rules") {
  FeatureConfig cfg;
  FeatureSet line;
  line.points.push_back(fp(Vec2(0, 0), FeatureKind::kCorner, 0));
  for (int i = 1; i <= 10; ++i) line.points.push_back(fp(Vec2(0.2 * i, 0.1 * i), FeatureKind::kSurface, i));
  line.points.push_back(fp(Vec2(2.4, 1.2), FeatureKind::kCorner, 11));
  group_surface_points(line, cfg);
  CHECK(line.group_count() == 1);
  for (const auto& p : line.points) CHECK(p.group == (p.kind == FeatureKind::kCorner ? kUngrouped : 0));

  FeatureSet arc;
  for (int i = 0; i < 20; ++i) {
    const double a = kPi / 2 * i / 19;
    arc.points.push_back(fp(Vec2(std::cos(a), std::sin(a)), FeatureKind::kSurface, i));
  }
  group_surface_points(arc, cfg);
  CHECK(arc.group_count() == 0);

  FeatureSet two;
  two.points.push_back(fp(Vec2(0, 0), FeatureKind::kSurface, 3));
  two.points.push_back(fp(Vec2(0.1, 0), FeatureKind::kSurface, 4));
  group_surface_points(two, cfg);
  CHECK(two.group_count() == 0);
}

TEST_CASE("groups on a real scan are straight") {
  const Frame f = square_frame(Pose6{4.4, 2.8, 1.6, -0.02, 0.03, 2.2});
  const FeatureConfig cfg;
  const FeatureSet set = frame_features(f.scan, f.seg, cfg);
  REQUIRE(set.group_count() > 4);
  for (int g = 0; g < set.group_count(); ++g) {
    std::vector<Vec2> pts;
    for (const auto& p : set.points) {
      if (p.group == g) pts.push_back(p.position);
    }
    REQUIRE(pts.size() >= 1);
    if (pts.size() < 3) continue;
    Vec2 mean = Vec2::Zero();
    for (const auto& p : pts) mean += p;
    mean /= double(pts.size());
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
    const Vec2 normal_dir = es.eigenvectors().col(0), line_dir = es.eigenvectors().col(1);
    double lo = 1e9, hi = -1e9, worst = 0;
    for (const auto& p : pts) {
      lo = std::min(lo, line_dir.dot(p - mean));
      hi = std::max(hi, line_dir.dot(p - mean));
      worst = std::max(worst, std::abs(normal_dir.dot(p - mean)));
    }
    CHECK(worst <= cfg.rho * (hi - lo) + 0.05);
  }
}

TEST_CASE("merging duplicates") {
  FeatureSet set;
  set.points.push_back(fp(Vec2(1.001, 2.001), FeatureKind::kSurface, 0));
  set.points.push_back(fp(Vec2(1.003, 2.002), FeatureKind::kCorner, 1));
  set.points.push_back(fp(Vec2(5, 5), FeatureKind::kSurface, 2));
  set.points[0].group = 4;
  set.points[2].group = 7;
  merge_duplicates(set, 0.03);
  REQUIRE(set.points.size() == 2);
  CHECK(set.count(FeatureKind::kCorner) == 1);
  CHECK(set.group_count() == 1);
}

TEST_CASE("deterministic features and csv") {
  const Frame f = square_frame(Pose6{3, 3, 1.6, 0, 0, 0});
  const FeatureSet a = frame_features(f.scan, f.seg, FeatureConfig{});
  const FeatureSet b = frame_features(f.scan, f.seg, FeatureConfig{});
  CHECK(features_csv(a) == features_csv(b));
  CHECK(features_csv(a).rfind("x,y,kind,group,ring\n", 0) == 0);
}

TEST_CASE("feature config validation") {
  FeatureConfig c;
  c.window = 1;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.sectors = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}
