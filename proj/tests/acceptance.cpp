// Acceptance suite: one PASS/FAIL line per criterion. Optional arguments select criteria
// by number, e.g. `fploc_acceptance 1 4`. Exit status is nonzero if a gated criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "fploc/metrics.hpp"
#include "fploc/plan_gen.hpp"
#include "fploc/registration.hpp"

using namespace fploc;

namespace {

constexpr double kDeg = kPi / 180.0;

// Loops through room_with_pillars that keep at least 0.85 m from every wall and pillar.
const std::vector<Vec2> kSmallLoop = {{2.5, 2}, {11.8, 2}, {11.8, 6.05}, {2.5, 6.05}};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto i = static_cast<std::size_t>(pos);
  if (i + 1 >= v.size()) return v.back();
  return v[i] + (pos - static_cast<double>(i)) * (v[i + 1] - v[i]);
}

// Corners joined by straight runs, each corner replaced by a quadratic Bezier that starts
// `cut` before it and ends `cut` after it. Closed paths repeat `laps` times and end where they began.
std::vector<Waypoint> rounded_path(const std::vector<Vec2>& corners, double cut, bool closed, int laps = 1) {
  const int n = static_cast<int>(corners.size());
  std::vector<Waypoint> w;
  auto heading = [](const Vec2& d) { return std::atan2(d.y(), d.x()); };
  if (!closed) w.push_back({corners[0], heading(corners[1] - corners[0])});
  for (int lap = 0; lap < laps; ++lap) {
    for (int i = closed ? 0 : 1; i < (closed ? n : n - 1); ++i) {
      const Vec2 a = corners[(i + n - 1) % n], b = corners[i], d = corners[(i + 1) % n];
      const Vec2 p0 = b - cut * (b - a).normalized(), p2 = b + cut * (d - b).normalized();
      for (int k = 0; k <= 16; ++k) {
        const double t = k / 16.0;
        const Vec2 p = (1 - t) * (1 - t) * p0 + 2 * (1 - t) * t * b + t * t * p2;
        w.push_back({p, heading(2 * (1 - t) * (b - p0) + 2 * t * (p2 - b))});
      }
    }
  }
  if (closed) {
    w.push_back(w.front());
  } else {
    w.push_back({corners[n - 1], heading(corners[n - 1] - corners[n - 2])});
  }
  return w;
}

// ---------------------------------------------------------------------------------------------

Outcome annf_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<std::pair<std::string, FloorPlan>> suite = {
      {"room_with_pillars", plans::room_with_pillars()},
      {"corridor_maze", plans::corridor_maze(6, 5, 2.4, 7)},
      {"mixed_arcs", plans::mixed_arcs(3)},
  };
  bool pass = true;
  std::string detail;
  for (const auto& [name, plan] : suite) {
    const bool sized = plan.size() >= 50 && plan.size() <= 500;
    const OracleSamples samples = make_oracle_samples(plan, 1000000, 17);
    double prev1 = 0, prev12 = 0;
    bool monotone = true;
    ValidationReport at7;
    for (int depth = 3; depth <= 8; ++depth) {
      const ValidationReport r = validate_annf(Annf::build(plan, Annf::kDefaultRootLength, depth), samples);
      monotone = monotone && r.hit_first >= prev1 && r.hit_first_or_second >= prev12;
      prev1 = r.hit_first;
      prev12 = r.hit_first_or_second;
      if (depth == 7) at7 = r;
    }
    const bool ok = sized && monotone && at7.hit_first >= 0.90 && at7.hit_first_or_second >= 0.95;
    pass = pass && ok;
    detail += fmt("%s |E|=%zu d7 leaf %.1f cm hit1 %.4f hit12 %.4f%s; ", name.c_str(), plan.size(),
                  at7.leaf_length_cm, at7.hit_first, at7.hit_first_or_second, monotone ? "" : " NOT MONOTONE");
  }
  const double elapsed = seconds_since(t0);
  pass = pass && elapsed < 300;
  return {pass, detail + fmt("suite %.0f s", elapsed)};
}

Outcome lookup_scaling() {
  const FloorPlan small = plans::random_segments(10, 6.0, 5);
  const FloorPlan large = plans::random_segments(1000, 60.0, 5);
  const Annf a_small = Annf::build(small, Annf::kDefaultRootLength, 7);
  const Annf a_large = Annf::build(large, Annf::kDefaultRootLength, 7);
  const OracleSamples q_small = make_oracle_samples(small, 200000, 9);
  const OracleSamples q_large = make_oracle_samples(large, 200000, 9);
  const double ns_small = time_lookups_ns(a_small, q_small.points, 0.5);
  const double ns_large = time_lookups_ns(a_large, q_large.points, 0.5);

  auto brute_ns = [](const FloorPlan& plan, const std::vector<Vec2>& q) {
    const std::size_t n = std::min<std::size_t>(q.size(), plan.size() > 100 ? 5000 : 200000);
    double sink = 0;
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < n; ++i) sink += brute_force_nearest(q[i], plan, 1)[0].distance;
    const double ns = seconds_since(t0) * 1e9 / static_cast<double>(n);
    return sink >= 0 ? ns : -ns;
  };
  const double bf_small = brute_ns(small, q_small.points);
  const double bf_large = brute_ns(large, q_large.points);
  const double lookup_ratio = ns_large / ns_small;
  const double brute_ratio = bf_large / bf_small;
  return {lookup_ratio <= 2.0 && brute_ratio >= 20.0,
          fmt("lookup %.1f ns (10 el) vs %.1f ns (1000 el), ratio %.2f; brute force %.0f vs %.0f ns, ratio %.0f",
              ns_small, ns_large, lookup_ratio, bf_small, bf_large, brute_ratio)};
}

Outcome geometry_oracle() {
  std::mt19937_64 rng(23);
  std::vector<GeometricElement> pool;
  for (const FloorPlan& plan : {plans::mixed_arcs(3), plans::random_segments(40, 10.0, 4)}) {
    pool.insert(pool.end(), plan.elements().begin(), plan.elements().end());
  }
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0;
  int under = 0;
  for (int i = 0; i < 10000; ++i) {
    const GeometricElement& e = pool[pick(rng)];
    const Bounds b = element_bounds(e);
    const Vec2 q(b.min.x() - 2 + (b.width() + 4) * u(rng), b.min.y() - 2 + (b.height() + 4) * u(rng));
    const double exact = brute_force_nearest(q, FloorPlan(std::vector<GeometricElement>{e}), 1)[0].distance;
    double dense = std::numeric_limits<double>::infinity();
    for (const Vec2& p : sample_points(e, 0.001)) dense = std::min(dense, (p - q).norm());
    worst = std::max(worst, std::abs(dense - exact));
    under += exact > dense + 1e-9;
  }
  return {worst <= 0.001 && under == 0,
          fmt("10^4 cases, max |exact - dense| %.3g mm, exact above dense in %d", worst * 1000, under)};
}

Outcome plane_segmentation() {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const FloorPlan plan = plans::room_with_pillars();
  const Bounds b = plan.bounds();
  SensorModel sensor = SensorModel::os1_64();
  sensor.range_noise_sigma = 0.02;
  SegmentationConfig cfg;
  cfg.ceiling_z = 3.0;
  std::vector<double> grav, tz;
  double clutter = 0;
  int failed = 0;
  for (int i = 0; i < 100; ++i) {
    Vec2 xy;
    do {
      xy = Vec2(b.min.x() + 1 + (b.width() - 2) * (0.5 + 0.5 * u(rng)), b.min.y() + 1 + (b.height() - 2) * (0.5 + 0.5 * u(rng)));
    } while (brute_force_nearest(xy, plan, 1)[0].distance < 0.8);
    Scene scene{plan};
    scene.ceiling_z = 3.0;
    add_random_clutter(scene, 60, 1000 + i, {xy}, 0.6);
    const Pose6 truth{xy.x(), xy.y(), 1.6 + 0.2 * u(rng), 5 * kDeg * u(rng), 5 * kDeg * u(rng), kPi * u(rng)};
    const LidarScan scan = simulate_scan(scene, truth, sensor, 2000 + i);
    clutter += clutter_fraction(scan);
    try {
      const VerticalState v = segment_scan(scan, cfg).vertical_state;
      const Vec3 true_gravity = truth.rotation().transpose() * Vec3(0, 0, -1);
      grav.push_back(std::acos(std::clamp(v.gravity.normalized().dot(true_gravity), -1.0, 1.0)) / kDeg);
      tz.push_back(std::abs(v.t_z - truth.z) * 100);
    } catch (const DegenerateFit&) {
      ++failed;
      grav.push_back(180.0);
      tz.push_back(1e3);
    }
  }
  clutter /= 100;
  const double g95 = percentile(grav, 0.95), z95 = percentile(tz, 0.95);
  const bool scenario = clutter >= 0.15 && clutter <= 0.25;
  return {scenario && g95 <= 0.5 && z95 <= 2.0,
          fmt("100 scans, mean clutter %.1f%%, p95 gravity %.3f deg, p95 t_z %.2f cm, failed fits %d",
              clutter * 100, g95, z95, failed)};
}

Outcome jacobian_check() {
  const FloorPlan plan = plans::mixed_arcs(3);
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(-1, 1);
  std::uniform_int_distribution<ElementId> pick(0, static_cast<ElementId>(plan.size() - 1));
  const Bounds b = plan.bounds();
  const double h = 1e-6;
  int checked = 0, excluded = 0;
  double worst = 0;
  while (checked < 1000) {
    const PlanarPose pose{b.min.x() + b.width() * (0.5 + 0.5 * u(rng)), b.min.y() + b.height() * (0.5 + 0.5 * u(rng)),
                          kPi * u(rng)};
    const Vec2 p(4 * u(rng), 4 * u(rng));
    const ElementId id = pick(rng);
    const bool support = checked % 3 == 0;
    const PointResidual r = element_residual(p, pose, plan, id, support);
    const Vec2 w = pose.apply(p);
    bool singular = r.distance < 1e-3;
    if (const auto* c = std::get_if<Circle>(&plan.element(id))) singular = singular || (w - c->center).norm() < 1e-3;
    if (const auto* a = std::get_if<Arc>(&plan.element(id))) {
      // The foot jumps between endpoints on the bisector of the missing sector.
      const Vec2 e1 = a->center + a->radius * Vec2(std::cos(a->theta_start), std::sin(a->theta_start));
      const Vec2 e2 = a->center + a->radius * Vec2(std::cos(a->theta_end), std::sin(a->theta_end));
      singular = singular || (w - a->center).norm() < 1e-3 || std::abs((w - e1).norm() - (w - e2).norm()) < 1e-3;
    }
    if (singular) {
      ++excluded;
      continue;
    }
    Eigen::RowVector3d fd;
    for (int k = 0; k < 3; ++k) {
      PlanarPose lo = pose, hi = pose;
      (k == 0 ? lo.x : k == 1 ? lo.y : lo.yaw) -= h;
      (k == 0 ? hi.x : k == 1 ? hi.y : hi.yaw) += h;
      fd[k] = (element_residual(p, hi, plan, id, support).distance - element_residual(p, lo, plan, id, support).distance) /
              (2 * h);
    }
    worst = std::max(worst, (fd - r.jacobian).cwiseAbs().maxCoeff());
    ++checked;
  }
  return {worst < 1e-5, fmt("1000 configurations (%d singular excluded), max |analytic - FD| %.2e", excluded, worst)};
}

Outcome convergence_basin() {
  const FloorPlan plan = plans::square_room(8.3, 7.1);
  const PlanMap map(plan, Annf::build(plan));
  Scene scene{plan};
  scene.ceiling_z = 2.5;
  SensorModel sensor = SensorModel::os1_64();
  sensor.range_noise_sigma = 0.02;
  SegmentationConfig seg;
  seg.ceiling_z = 2.5;
  std::mt19937_64 rng(53);
  std::uniform_real_distribution<double> u(-1, 1);
  int good = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Pose6 truth{4.15 + 2.6 * u(rng), 3.55 + 2.2 * u(rng), 1.5 + 0.2 * u(rng), 0.03 * u(rng), 0.03 * u(rng),
                      kPi * u(rng)};
    const LidarScan scan = simulate_scan(scene, truth, sensor, 3000 + trial);
    const FeatureSet set = frame_features(scan, segment_scan(scan, seg), FeatureConfig{});
    const PlanarPose t = truth.planar();
    const PlanarPose init{t.x + 0.2 * u(rng), t.y + 0.2 * u(rng), t.yaw + 5 * kDeg * u(rng)};
    const RegistrationResult r = single_frame_register(set, map, init, RegistrationConfig{});
    good += r.ok && (r.pose.translation() - t.translation()).norm() <= 0.03 &&
            std::abs(wrap_angle(r.pose.yaw - t.yaw)) <= 0.5 * kDeg;
  }
  return {good >= 190, fmt("%d/200 trials within 3 cm / 0.5 deg (need 190)", good)};
}

struct RunResult {
  std::vector<TimedPose> truth, windowed, single;
  double pipeline_ms = 0.0;  // windowed tracker, per frame
};

RunResult run_trajectory(const FloorPlan& plan, const std::vector<Waypoint>& path, double speed, std::uint64_t seed) {
  Scene scene{plan};
  scene.ceiling_z = 3.0;
  MotionProfile motion;
  motion.speed = speed;
  motion.speed_variation = 0.3;
  motion.roll_amplitude = 0.02;
  motion.pitch_amplitude = 0.02;
  motion.z_amplitude = 0.03;
  SensorModel sensor = SensorModel::os1_64();
  sensor.range_noise_sigma = 0.02;
  RunResult out;
  out.truth = plan_trajectory(path, motion, sensor.scan_rate);
  const PlanMap map(plan, Annf::build(plan));
  TrackerConfig windowed;
  windowed.segmentation.ceiling_z = scene.ceiling_z;
  TrackerConfig single = windowed;
  single.windowed = false;
  Tracker tw(map, windowed, out.truth[0].pose), ts(map, single, out.truth[0].pose);
  double ms = 0;
  for (std::size_t i = 0; i < out.truth.size(); ++i) {
    const LidarScan scan = simulate_scan(scene, out.truth[i].pose, sensor, frame_seed(seed, i), out.truth[i].timestamp);
    const auto t0 = std::chrono::steady_clock::now();
    tw.process(scan);
    ms += seconds_since(t0) * 1e3;
    ts.process(scan);
  }
  out.windowed = tw.finish();
  out.single = ts.finish();
  out.pipeline_ms = ms / static_cast<double>(out.truth.size());
  return out;
}

double ate(const std::vector<TimedPose>& est, const std::vector<TimedPose>& truth) {
  return ate_cm(associate(est, truth, 1e-6));
}

std::vector<double> frame_ms;  // filled by the trajectory runs, read by the throughput report

Outcome windowed_improvement() {
  struct Case {
    const char* name;
    FloorPlan plan;
    std::vector<Waypoint> path;
    double speed;
  };
  const std::vector<Case> cases = {
      {"small", plans::room_with_pillars(), rounded_path(kSmallLoop, 1.0, true), 0.3},
      {"large", plans::room_with_pillars(), rounded_path({{1.6, 2.0}, {15.2, 2.0}, {15.2, 10.4}, {1.6, 10.4}}, 1.0, true),
       0.7},
      {"no-loop", plans::mixed_arcs(3),
       rounded_path({{1.2, 1.2}, {1.2, 10.0}, {8.4, 10.0}, {8.4, 17.1}, {12.6, 17.1}}, 0.6, false), 0.5},
  };
  bool pass = true;
  std::string detail;
  std::uint64_t seed = 61;
  for (const auto& c : cases) {
    const RunResult r = run_trajectory(c.plan, c.path, c.speed, seed++);
    const double aw = ate(r.windowed, r.truth), as = ate(r.single, r.truth);
    pass = pass && aw <= as && aw <= 10.0;
    frame_ms.push_back(r.pipeline_ms);
    detail += fmt("%s %.1f m @ %.1f m/s: windowed %.3f cm, single %.3f cm; ", c.name, path_length(c.path), c.speed, aw, as);
  }
  detail.resize(detail.size() - 2);
  return {pass, detail};
}

Outcome drift_free() {
  const std::vector<Waypoint> path = rounded_path(kSmallLoop, 1.0, true, 2);
  const RunResult r = run_trajectory(plans::room_with_pillars(), path, 0.5, 71);
  frame_ms.push_back(r.pipeline_ms);
  // Lap boundary: the frame in the middle half of the run that comes closest to the start.
  const std::size_t n = r.truth.size();
  std::size_t split = n / 4;
  for (std::size_t i = n / 4; i < 3 * n / 4; ++i) {
    if ((r.truth[i].pose.translation() - r.truth[0].pose.translation()).head<2>().norm() <
        (r.truth[split].pose.translation() - r.truth[0].pose.translation()).head<2>().norm()) {
      split = i;
    }
  }
  auto slice = [](const std::vector<TimedPose>& t, std::size_t a, std::size_t b) {
    return std::vector<TimedPose>(t.begin() + static_cast<std::ptrdiff_t>(a), t.begin() + static_cast<std::ptrdiff_t>(b));
  };
  const double rate = SensorModel::os1_64().scan_rate;
  const auto tail = static_cast<std::size_t>(2.0 * rate);
  const double gap1 = ate(slice(r.windowed, split - tail, split), slice(r.truth, split - tail, split));
  const double gap2 = ate(slice(r.windowed, n - tail, n), slice(r.truth, n - tail, n));
  const double lap1 = ate(slice(r.windowed, 0, split), slice(r.truth, 0, split));
  const double lap2 = ate(slice(r.windowed, split, n), slice(r.truth, split, n));
  return {gap2 <= 1.5 * gap1 && lap2 <= 1.5 * lap1,
          fmt("final gap lap1 %.3f cm, lap2 %.3f cm (ratio %.2f); ATE lap1 %.3f cm, lap2 %.3f cm (ratio %.2f)", gap1,
              gap2, gap2 / gap1, lap1, lap2, lap2 / lap1)};
}

Outcome metrics_cases() {
  auto line = [](const std::vector<Vec3>& xyz) {
    Trajectory t;
    for (std::size_t i = 0; i < xyz.size(); ++i) t.push_back({0.1 * static_cast<double>(i), Pose6{xyz[i].x(), xyz[i].y(), xyz[i].z(), 0, 0, 0}});
    return t;
  };
  const Trajectory ref = line({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}});
  const auto slip = associate(line({{0, 0, 0}, {1.01, 0, 0}, {2.01, 0, 0}}), ref, 1e-3);
  const auto offset = associate(line({{0.03, 0.04, 0}, {1.03, 0.04, 0}, {2.03, 0.04, 0}}), ref, 1e-3);
  double err = std::abs(rpe_cm(slip) - 0.5);
  err = std::max(err, std::abs(ate_cm(slip) - 2.0 / 3.0));
  err = std::max(err, std::abs(ate_cm(offset) - 5.0));
  err = std::max(err, std::abs(rpe_cm(offset)));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  Trajectory r, e, moved;
  const Pose6 g{5.0, -3.0, 0.5, 0.1, -0.2, 1.3};
  for (int i = 0; i < 50; ++i) {
    const Pose6 p{0.3 * i, std::sin(0.2 * i), 1.6, 0.05 * u(rng), 0.05 * u(rng), 0.1 * i};
    const Pose6 q{p.x + 0.02 * u(rng), p.y + 0.02 * u(rng), p.z, p.roll, p.pitch, p.yaw + 0.01 * u(rng)};
    r.push_back({0.1 * i, p});
    e.push_back({0.1 * i, q});
    moved.push_back({0.1 * i, Pose6::from_rotation(g.rotation() * q.translation() + g.translation(), g.rotation() * q.rotation())});
  }
  const double a = rpe_cm(associate(e, r, 1e-3)), b = rpe_cm(associate(moved, r, 1e-3));
  const double rel = std::abs(a - b) / a;
  return {err <= 1e-12 && rel <= 1e-9, fmt("hand-computed cases max error %.1e, RPE change under rigid offset %.1e (relative)", err, rel)};
}

Outcome throughput() {
  if (frame_ms.empty()) return {false, "no trajectory run in this invocation (run criterion 7 or 8)"};
  const double worst = *std::max_element(frame_ms.begin(), frame_ms.end());
  const double hz = 1000.0 / worst;
  return {hz > 10.0, fmt("windowed pipeline %.1f ms/frame in the slowest run = %.1f Hz (target > 10 Hz, 64 rings x 1024)", worst, hz)};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
    bool gated;
  };
  const std::vector<Criterion> all = {
      {1, "annf oracle suite", annf_oracle, true},
      {2, "lookup scale independence", lookup_scaling, true},
      {3, "geometry oracle", geometry_oracle, true},
      {4, "plane segmentation", plane_segmentation, true},
      {5, "registration jacobian", jacobian_check, true},
      {6, "convergence basin", convergence_basin, true},
      {7, "windowed improvement", windowed_improvement, true},
      {8, "drift-freeness", drift_free, true},
      {9, "metrics", metrics_cases, true},
      {10, "throughput (soft)", throughput, false},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failures = 0;
  for (const auto& c : all) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const char* verdict = o.pass ? "PASS" : (c.gated ? "FAIL" : "BELOW TARGET (not gated)");
    std::printf("[%s] %d %s: %s (%.1f s)\n", verdict, c.id, c.name, o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
    failures += !o.pass && c.gated;
  }
  return failures == 0 ? 0 : 1;
}
