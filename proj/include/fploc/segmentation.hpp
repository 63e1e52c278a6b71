#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fploc/scan_sim.hpp"

namespace fploc {

/// Plane n . p = offset in the sensor frame.
struct PlaneFit {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;
  std::size_t inlier_count = 0;
  double rms_residual = 0.0;

  double signed_distance(const Vec3& p) const { return normal.dot(p) - offset; }
};

/// z = a x + b y + c
struct HeightPlane {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

struct VerticalState {
  double t_z = 0.0;
  double roll = 0.0;
  double pitch = 0.0;
  Vec3 gravity = -Vec3::UnitZ();  // sensor frame
};

struct SegmentationConfig {
  int top_rings = 4;                 // K_r
  double top_range_fraction = 0.25;
  double huber_delta = 0.05;         // m
  double tau_plane = 0.08;           // m
  int max_iterations = 20;
  std::optional<double> ceiling_z;   // absolute height needs it; otherwise t_z is -distance to ceiling
  std::size_t min_ceiling_inliers = 30;
  double max_beyond_fraction = 0.05;  // returns farther than 3 delta past the plane
  double max_tilt = 15.0 * kPi / 180.0;  // rad, ceiling normal from the sensor z axis

  void validate() const;
};

enum class PointClass : std::uint8_t { kMiss, kCeiling, kGround, kWall };

struct SegmentedScan {
  std::vector<Vec3> ceiling_points;
  std::vector<Vec3> ground_points;
  std::vector<Vec3> wall_points;
  // labels[ring][k] classifies scan.rings[ring][k].
  std::vector<std::vector<PointClass>> labels;
  VerticalState vertical_state;
  PlaneFit ceiling;
  std::optional<PlaneFit> ground;
  bool stale = false;  // ceiling fit failed; vertical state held from the previous frame
};

/// Initial ceiling plane from the longest returns of the top `top_rings` rings.
/// Throws DegenerateFit with fewer than 3 selected points.
HeightPlane ceiling_init(const LidarScan& scan, int top_rings, double top_range_fraction = 0.25,
                         double max_tilt = 15.0 * kPi / 180.0);
/// Same as ceiling_init on the vertically mirrored scan; the result is in mirrored coordinates.
HeightPlane ground_init(const LidarScan& scan, int top_rings, double top_range_fraction = 0.25,
                        double max_tilt = 15.0 * kPi / 180.0);

/// IRLS with Huber weights on the orthogonal residual, starting at `init`. Residuals
/// beyond 3 delta get zero weight. Throws DegenerateFit when the weighted system is
/// rank deficient.
PlaneFit robust_plane_fit(const std::vector<Vec3>& points, const HeightPlane& init, const SegmentationConfig& config);

/// Roll and pitch that rotate the sensor-frame up vector `up` onto +z.
VerticalState vertical_state_from_ceiling(const PlaneFit& ceiling, std::optional<double> ceiling_z);

/// Throws DegenerateFit when the ceiling cannot be fitted.
SegmentedScan segment_scan(const LidarScan& scan, const SegmentationConfig& config);

/// As segment_scan, but a failed ceiling fit reuses `previous` (plane and vertical
/// state) and marks the result stale. Rethrows when there is no previous frame.
SegmentedScan segment_scan(const LidarScan& scan, const SegmentationConfig& config, const SegmentedScan* previous);

}  // namespace fploc
