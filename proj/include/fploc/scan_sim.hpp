#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "fploc/floorplan.hpp"

namespace fploc {

struct SensorModel {
  std::vector<double> elevation_angles;  // rad, strictly ascending, one per ring
  int azimuth_steps = 1024;
  double max_range = 100.0;
  double range_noise_sigma = 0.02;
  double scan_rate = 10.0;

  int n_rings() const { return static_cast<int>(elevation_angles.size()); }
  void validate() const;

  /// Evenly spaced rings over [-fov/2, fov/2].
  static SensorModel uniform(int rings, double vertical_fov_deg, int azimuth_steps);
  /// 64 rings over +-16.6 degrees, 1024 azimuth steps, 10 Hz.
  static SensorModel os1_64();
};

struct Box {
  Vec3 min;
  Vec3 max;
};

/// Vertical cylinder.
struct Cylinder {
  Vec2 center;
  double radius = 0.0;
  double z_min = 0.0;
  double z_max = 0.0;
};

/// Floor plan extruded between a horizontal ground and ceiling, plus clutter.
struct Scene {
  FloorPlan plan;
  double ceiling_z = 3.0;
  double ground_z = 0.0;
  std::vector<Box> boxes;
  std::vector<Cylinder> cylinders;

  void validate() const;
};

/// Surface a simulated ray hit; scans read from files carry kUnknown.
enum class Surface : std::uint8_t { kUnknown, kWall, kCeiling, kGround, kClutter };

struct RayReturn {
  double azimuth = 0.0;  // sensor frame, rad
  double range = std::numeric_limits<double>::quiet_NaN();  // NaN marks a miss
  Vec3 point = Vec3::Constant(std::numeric_limits<double>::quiet_NaN());
  Surface surface = Surface::kUnknown;

  bool hit() const { return std::isfinite(range); }
};

/// One full rotation. rings[r] is ordered by azimuth; ring_elevation[r] is the beam
/// elevation in the sensor frame.
struct LidarScan {
  double timestamp = 0.0;
  std::vector<double> ring_elevation;
  std::vector<std::vector<RayReturn>> rings;

  std::size_t return_count() const;
};

/// Ray-casts every (ring, azimuth) beam from `pose`. Throws ValidationError if the
/// sensor is not strictly between ground and ceiling.
LidarScan simulate_scan(const Scene& scene, const Pose6& pose, const SensorModel& sensor, std::uint64_t seed,
                        double timestamp = 0.0);

struct Waypoint {
  Vec2 position;
  double yaw = 0.0;
};

struct MotionProfile {
  double speed = 0.5;               // mean speed along the path, m/s
  double speed_variation = 0.0;     // relative amplitude of a sinusoidal speed modulation
  double speed_period_s = 8.0;
  double sensor_height = 1.6;       // nominal t_z above ground
  double roll_amplitude = 0.0;      // rad
  double pitch_amplitude = 0.0;     // rad
  double z_amplitude = 0.0;         // m
  double perturbation_period_s = 4.0;
  double dwell_s = 0.0;             // extra stationary time at the last waypoint
};

/// Ground-truth poses at the sensor rate along the piecewise-linear waypoint path.
std::vector<TimedPose> plan_trajectory(const std::vector<Waypoint>& waypoints, const MotionProfile& motion,
                                       double scan_rate);

double path_length(const std::vector<Waypoint>& waypoints);

struct SimulatedFrame {
  TimedPose truth;
  LidarScan scan;
};

/// Materializes every scan; use plan_trajectory + simulate_scan to stream long runs.
std::vector<SimulatedFrame> simulate_trajectory(const Scene& scene, const std::vector<Waypoint>& waypoints,
                                                const MotionProfile& motion, const SensorModel& sensor,
                                                std::uint64_t seed);

/// Seed used for frame `index` of a sequence simulated with `seed`.
std::uint64_t frame_seed(std::uint64_t seed, std::size_t index);

/// Adds `count` boxes (furniture-like, standing on the ground or hanging below the
/// ceiling) at seeded positions inside the plan bounds, keeping `keep_out` radius
/// clear around each of `clear_points`.
void add_random_clutter(Scene& scene, int count, std::uint64_t seed, const std::vector<Vec2>& clear_points,
                        double keep_out);

/// Fraction of returns in a simulated scan that hit clutter.
double clutter_fraction(const LidarScan& scan);

}  // namespace fploc
