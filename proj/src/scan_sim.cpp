#include "fploc/scan_sim.hpp"

#include <algorithm>
#include <random>

namespace fploc {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMinRange = 1e-6;

// Smallest s > kMinRange with |o + s*h - c| = r, h not necessarily unit.
// Calls accept(s) on candidates in ascending order and returns the first accepted.
template <class Accept>
double ray_circle(const Vec2& o, const Vec2& h, const Vec2& c, double r, Accept accept) {
  const Vec2 oc = o - c;
  const double a = h.squaredNorm();
  const double b = 2.0 * oc.dot(h);
  const double cc = oc.squaredNorm() - r * r;
  const double disc = b * b - 4.0 * a * cc;
  if (disc < 0.0 || a == 0.0) return kInf;
  const double sq = std::sqrt(disc);
  // Numerically stable roots.
  const double q = -0.5 * (b + (b >= 0.0 ? sq : -sq));
  double s0 = q / a, s1 = q != 0.0 ? cc / q : s0;
  if (s0 > s1) std::swap(s0, s1);
  if (s0 > kMinRange && accept(s0)) return s0;
  if (s1 > kMinRange && accept(s1)) return s1;
  return kInf;
}

double ray_segment(const Vec2& o, const Vec2& h, const Segment& seg) {
  const Vec2 e = seg.p2 - seg.p1;
  const double denom = h.x() * e.y() - h.y() * e.x();
  if (std::abs(denom) < 1e-15) return kInf;
  const Vec2 w = seg.p1 - o;
  const double s = (w.x() * e.y() - w.y() * e.x()) / denom;
  const double u = (w.x() * h.y() - w.y() * h.x()) / denom;
  if (s > kMinRange && u >= 0.0 && u <= 1.0) return s;
  return kInf;
}

double ray_element(const Vec2& o, const Vec2& h, const GeometricElement& e) {
  return std::visit(overloaded{
                        [&](const Segment& s) { return ray_segment(o, h, s); },
                        [&](const Circle& c) { return ray_circle(o, h, c.center, c.radius, [](double) { return true; }); },
                        [&](const Arc& a) {
                          return ray_circle(o, h, a.center, a.radius, [&](double s) {
                            const Vec2 p = o + s * h - a.center;
                            return a.contains_angle(std::atan2(p.y(), p.x()));
                          });
                        },
                    },
                    e);
}

double ray_box(const Vec3& o, const Vec3& d, const Box& b) {
  double t0 = -kInf, t1 = kInf;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(d[i]) < 1e-15) {
      if (o[i] < b.min[i] || o[i] > b.max[i]) return kInf;
      continue;
    }
    double a = (b.min[i] - o[i]) / d[i];
    double c = (b.max[i] - o[i]) / d[i];
    if (a > c) std::swap(a, c);
    t0 = std::max(t0, a);
    t1 = std::min(t1, c);
    if (t0 > t1) return kInf;
  }
  if (t0 > kMinRange) return t0;
  // Sensor inside the box: the box is not an obstacle for this ray.
  return kInf;
}

double ray_cylinder(const Vec3& o, const Vec3& d, const Cylinder& c) {
  double best = kInf;
  const Vec2 o2 = o.head<2>(), h = d.head<2>();
  const double side = ray_circle(o2, h, c.center, c.radius, [&](double s) {
    const double z = o.z() + s * d.z();
    return z >= c.z_min && z <= c.z_max;
  });
  best = std::min(best, side);
  if (std::abs(d.z()) > 1e-15) {
    for (double zc : {c.z_min, c.z_max}) {
      const double s = (zc - o.z()) / d.z();
      if (s > kMinRange && (o2 + s * h - c.center).squaredNorm() <= c.radius * c.radius) best = std::min(best, s);
    }
  }
  return best;
}

// Angular interval [lo, lo + width] (rad, lo in [0, 2pi)) that may contain rays
// hitting the element from `o`; width >= 2pi means every direction.
struct AngularSpan {
  double lo = 0.0;
  double width = kTwoPi;
};

AngularSpan circle_span(const Vec2& o, const Vec2& c, double r) {
  const Vec2 v = c - o;
  const double d = v.norm();
  if (d <= r * 1.000001) return {};
  const double half = std::asin(std::min(1.0, r / d));
  return {wrap_positive(std::atan2(v.y(), v.x()) - half), 2.0 * half};
}

AngularSpan element_span(const Vec2& o, const GeometricElement& e) {
  return std::visit(overloaded{
                        [&](const Segment& s) -> AngularSpan {
                          const Vec2 a = s.p1 - o, b = s.p2 - o;
                          const double cross = a.x() * b.y() - a.y() * b.x();
                          if (std::abs(cross) < 1e-12) return {};
                          const double aa = std::atan2(a.y(), a.x());
                          const double ab = std::atan2(b.y(), b.x());
                          // Counter-clockwise from the first to the second endpoint when cross > 0.
                          return cross > 0 ? AngularSpan{wrap_positive(aa), wrap_positive(ab - aa)}
                                           : AngularSpan{wrap_positive(ab), wrap_positive(aa - ab)};
                        },
                        [&](const Circle& c) { return circle_span(o, c.center, c.radius); },
                        [&](const Arc& a) { return circle_span(o, a.center, a.radius); },
                    },
                    e);
}

// Elements bucketed by the azimuth bins their span touches.
class AzimuthBins {
 public:
  AzimuthBins(const FloorPlan& plan, const Vec2& o, int bins) : bins_(bins), lists_(bins) {
    const double bw = kTwoPi / bins;
    for (ElementId id = 0; id < plan.size(); ++id) {
      const AngularSpan sp = element_span(o, plan.element(id));
      if (sp.width >= kTwoPi - 2.0 * bw) {
        for (auto& l : lists_) l.push_back(id);
        continue;
      }
      const int first = static_cast<int>(std::floor(sp.lo / bw)) - 1;
      const int last = static_cast<int>(std::floor((sp.lo + sp.width) / bw)) + 1;
      for (int b = first; b <= last; ++b) lists_[((b % bins_) + bins_) % bins_].push_back(id);
    }
  }
  const std::vector<ElementId>& at(double azimuth) const {
    const int b = static_cast<int>(wrap_positive(azimuth) / kTwoPi * bins_);
    return lists_[std::min(b, bins_ - 1)];
  }

 private:
  int bins_;
  std::vector<std::vector<ElementId>> lists_;
};

}  // namespace

void SensorModel::validate() const {
  if (n_rings() < 2) throw ValidationError("sensor needs at least 2 rings");
  for (std::size_t i = 1; i < elevation_angles.size(); ++i) {
    if (!(elevation_angles[i] > elevation_angles[i - 1])) throw ValidationError("elevation angles must be strictly ascending");
  }
  if (azimuth_steps < 1) throw ValidationError("azimuth_steps must be positive");
  if (!(max_range > 0.0)) throw ValidationError("max_range must be positive");
  if (!(range_noise_sigma >= 0.0)) throw ValidationError("range noise sigma must be non-negative");
  if (!(scan_rate > 0.0)) throw ValidationError("scan_rate must be positive");
}

SensorModel SensorModel::uniform(int rings, double vertical_fov_deg, int azimuth_steps) {
  SensorModel m;
  const double half = vertical_fov_deg * kPi / 360.0;
  for (int i = 0; i < rings; ++i) m.elevation_angles.push_back(-half + 2.0 * half * i / (rings - 1));
  m.azimuth_steps = azimuth_steps;
  m.validate();
  return m;
}

SensorModel SensorModel::os1_64() { return uniform(64, 33.2, 1024); }

void Scene::validate() const {
  if (!(ceiling_z > ground_z)) throw ValidationError("ceiling must be above ground");
}

std::size_t LidarScan::return_count() const {
  std::size_t n = 0;
  for (const auto& ring : rings) {
    for (const auto& r : ring) n += r.hit();
  }
  return n;
}

LidarScan simulate_scan(const Scene& scene, const Pose6& pose, const SensorModel& sensor, std::uint64_t seed,
                        double timestamp) {
  sensor.validate();
  scene.validate();
  if (!(pose.z > scene.ground_z && pose.z < scene.ceiling_z)) {
    throw ValidationError("sensor pose outside the scene volume");
  }
  const Eigen::Matrix3d rot = pose.rotation();
  const Vec3 o = pose.translation();
  const Vec2 o2 = o.head<2>();
  const AzimuthBins bins(scene.plan, o2, std::max(64, sensor.azimuth_steps));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  LidarScan scan;
  scan.timestamp = timestamp;
  scan.ring_elevation = sensor.elevation_angles;
  scan.rings.resize(sensor.n_rings());
  for (int r = 0; r < sensor.n_rings(); ++r) {
    const double el = sensor.elevation_angles[r];
    auto& ring = scan.rings[r];
    ring.resize(sensor.azimuth_steps);
    for (int k = 0; k < sensor.azimuth_steps; ++k) {
      const double az = kTwoPi * k / sensor.azimuth_steps;
      const Vec3 ds(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
      const Vec3 d = rot * ds;

      double best = kInf;
      Surface surface = Surface::kUnknown;
      auto consider = [&](double t, Surface s) {
        if (t < best) {
          best = t;
          surface = s;
        }
      };
      if (d.z() > 0.0) consider((scene.ceiling_z - o.z()) / d.z(), Surface::kCeiling);
      if (d.z() < 0.0) consider((scene.ground_z - o.z()) / d.z(), Surface::kGround);
      const Vec2 h = d.head<2>();
      if (h.squaredNorm() > 1e-18) {
        for (ElementId id : bins.at(std::atan2(h.y(), h.x()))) {
          consider(ray_element(o2, h, scene.plan.element(id)), Surface::kWall);
        }
      }
      for (const auto& b : scene.boxes) consider(ray_box(o, d, b), Surface::kClutter);
      for (const auto& c : scene.cylinders) consider(ray_cylinder(o, d, c), Surface::kClutter);

      // Draw noise for every beam so the stream stays aligned across hits and misses.
      const double n = noise(rng);
      RayReturn& ret = ring[k];
      ret.azimuth = az;
      if (best <= sensor.max_range) {
        const double range = std::max(kMinRange, best + sensor.range_noise_sigma * n);
        ret.range = range;
        ret.point = ds * range;
        ret.surface = surface;
      }
    }
  }
  return scan;
}

double path_length(const std::vector<Waypoint>& waypoints) {
  double len = 0.0;
  for (std::size_t i = 1; i < waypoints.size(); ++i) len += (waypoints[i].position - waypoints[i - 1].position).norm();
  return len;
}

std::vector<TimedPose> plan_trajectory(const std::vector<Waypoint>& waypoints, const MotionProfile& motion,
                                       double scan_rate) {
  if (waypoints.empty()) throw ValidationError("trajectory needs at least one waypoint");
  if (!(motion.speed > 0.0)) throw ValidationError("speed must be positive");
  if (!(scan_rate > 0.0)) throw ValidationError("scan rate must be positive");
  if (motion.speed_variation < 0.0 || motion.speed_variation >= 1.0) {
    throw ValidationError("speed_variation must be in [0, 1)");
  }

  std::vector<double> cumulative{0.0};
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    cumulative.push_back(cumulative.back() + (waypoints[i].position - waypoints[i - 1].position).norm());
  }
  const double total = cumulative.back();

  // Arc length travelled after t seconds under the modulated speed.
  const double w = kTwoPi / motion.speed_period_s;
  auto travelled = [&](double t) {
    return motion.speed * (t + motion.speed_variation * (1.0 - std::cos(w * t)) / w);
  };

  auto pose_at_arclength = [&](double s) {
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), s);
    std::size_t seg = it == cumulative.begin() ? 0 : static_cast<std::size_t>(it - cumulative.begin()) - 1;
    if (seg + 1 >= waypoints.size()) {
      return std::pair<Vec2, double>{waypoints.back().position, waypoints.back().yaw};
    }
    const double len = cumulative[seg + 1] - cumulative[seg];
    const double u = len > 0.0 ? (s - cumulative[seg]) / len : 1.0;
    const auto& a = waypoints[seg];
    const auto& b = waypoints[seg + 1];
    return std::pair<Vec2, double>{a.position + u * (b.position - a.position),
                                   wrap_angle(a.yaw + u * wrap_angle(b.yaw - a.yaw))};
  };

  std::vector<TimedPose> out;
  const double dt = 1.0 / scan_rate;
  double end_time = -1.0;
  for (std::size_t k = 0;; ++k) {
    const double t = k * dt;
    const double s = travelled(t);
    if (s > total + 1e-12) {
      if (end_time < 0.0) end_time = t;
      if (t - end_time >= motion.dwell_s - 1e-12 || motion.dwell_s <= 0.0) break;
    }
    const auto [p, yaw] = pose_at_arclength(std::min(s, total));
    Pose6 pose;
    pose.x = p.x();
    pose.y = p.y();
    pose.yaw = yaw;
    const double wp = kTwoPi / motion.perturbation_period_s;
    pose.z = motion.sensor_height + motion.z_amplitude * std::sin(wp * t * 0.8 + 0.5);
    pose.roll = motion.roll_amplitude * std::sin(wp * t);
    pose.pitch = motion.pitch_amplitude * std::sin(wp * t * 0.7 + 1.0);
    out.push_back({t, pose});
    if (k > 100000000) throw ValidationError("trajectory too long");
  }
  return out;
}

std::uint64_t frame_seed(std::uint64_t seed, std::size_t index) {
  // splitmix64 finalizer over (seed, index).
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::vector<SimulatedFrame> simulate_trajectory(const Scene& scene, const std::vector<Waypoint>& waypoints,
                                                const MotionProfile& motion, const SensorModel& sensor,
                                                std::uint64_t seed) {
  std::vector<SimulatedFrame> frames;
  const auto poses = plan_trajectory(waypoints, motion, sensor.scan_rate);
  frames.reserve(poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    frames.push_back({poses[i], simulate_scan(scene, poses[i].pose, sensor, frame_seed(seed, i), poses[i].timestamp)});
  }
  return frames;
}

void add_random_clutter(Scene& scene, int count, std::uint64_t seed, const std::vector<Vec2>& clear_points,
                        double keep_out) {
  std::mt19937_64 rng(seed);
  const Bounds& b = scene.plan.bounds();
  std::uniform_real_distribution<double> ux(b.min.x() + 0.5, b.max.x() - 0.5);
  std::uniform_real_distribution<double> uy(b.min.y() + 0.5, b.max.y() - 0.5);
  std::uniform_real_distribution<double> usize(0.3, 1.2);
  std::uniform_real_distribution<double> uheight(0.4, 1.8);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double room = scene.ceiling_z - scene.ground_z;
  int added = 0, attempts = 0;
  while (added < count && attempts < count * 100) {
    ++attempts;
    const Vec2 c(ux(rng), uy(rng));
    const double sx = usize(rng), sy = usize(rng);
    const double reach = std::hypot(sx, sy) / 2.0;
    const bool clear = std::all_of(clear_points.begin(), clear_points.end(),
                                   [&](const Vec2& p) { return (p - c).norm() > keep_out + reach; });
    if (!clear) continue;
    Box box;
    box.min = Vec3(c.x() - sx / 2, c.y() - sy / 2, scene.ground_z);
    box.max = Vec3(c.x() + sx / 2, c.y() + sy / 2, scene.ground_z + std::min(uheight(rng), 0.8 * room));
    if (u01(rng) < 0.25) {
      // Hanging fixture below the ceiling.
      const double depth = 0.15 + 0.35 * u01(rng);
      box.min.z() = scene.ceiling_z - depth;
      box.max.z() = scene.ceiling_z - 0.02;
    }
    scene.boxes.push_back(box);
    ++added;
  }
}

double clutter_fraction(const LidarScan& scan) {
  std::size_t hits = 0, clutter = 0;
  for (const auto& ring : scan.rings) {
    for (const auto& r : ring) {
      if (!r.hit()) continue;
      ++hits;
      clutter += r.surface == Surface::kClutter;
    }
  }
  return hits ? static_cast<double>(clutter) / hits : 0.0;
}

}  // namespace fploc
