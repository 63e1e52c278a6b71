#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fploc/segmentation.hpp"

namespace fploc {

enum class FeatureKind : std::uint8_t { kCorner, kSurface };

inline constexpr int kUngrouped = -1;

struct FeatureConfig {
  int window = 5;               // neighbours per side
  double c_corner = 0.01;
  double c_surface = 0.01;
  int sectors = 6;
  int n_corner = 2;             // per ring and sector
  int n_surface = 4;
  int min_corner_separation = 5;  // azimuth steps
  double range_jump = 0.1;      // relative range step marking a discontinuity
  double merge_eps = 0.03;      // m
  double rho = 0.05;            // max minor/major principal std ratio of a group
  int min_run = 3;

  void validate() const;
};

/// Wall points of one ring in azimuth order; index[i] is the azimuth step of points[i].
struct RingPoints {
  int ring = 0;
  std::vector<Vec3> points;
  std::vector<int> index;
};

/// Per-point smoothness; NaN where the window is not azimuth-contiguous, crosses a
/// range discontinuity, or runs off the ring end. Without `index` the points are
/// taken as contiguous.
std::vector<double> compute_smoothness(const std::vector<Vec3>& points, int window, double range_jump = 0.1);
std::vector<double> compute_smoothness(const std::vector<Vec3>& points, const std::vector<int>& index, int window,
                                       double range_jump = 0.1);

struct Feature3 {
  Vec3 point;
  FeatureKind kind = FeatureKind::kSurface;
  int ring = 0;
  int index = 0;
  double smoothness = 0.0;
};

struct FeaturePoint {
  Vec2 position;
  FeatureKind kind = FeatureKind::kSurface;
  int group = kUngrouped;
  int ring = 0;
  int index = 0;  // azimuth step within the ring
};

struct FeatureSet {
  double timestamp = 0.0;
  std::vector<FeaturePoint> points;

  std::size_t count(FeatureKind kind) const;
  int group_count() const;
};

/// Wall points grouped by ring, using the segmentation labels.
std::vector<RingPoints> wall_rings(const LidarScan& scan, const SegmentedScan& seg);

/// Corner and surface selection per ring and azimuth sector; `azimuth_steps` is the
/// number of steps in a full ring.
std::vector<Feature3> extract_features(const std::vector<RingPoints>& rings, int azimuth_steps,
                                       const FeatureConfig& config);

/// Levels the features with (roll, pitch) and drops z. With `merge`, points sharing a
/// merge_eps grid cell collapse to their centroid; corner kind wins.
FeatureSet project_features(const std::vector<Feature3>& features, const VerticalState& vs,
                            const FeatureConfig& config, bool merge = true);

/// Assigns group ids to runs of surface points between consecutive corners of the same
/// ring (azimuth order) that pass the PCA line test. Existing groups are cleared.
void group_surface_points(FeatureSet& set, const FeatureConfig& config);

/// Merges points sharing a merge_eps grid cell (see project_features); groups survive
/// through the first grouped member of a surface cell and are renumbered densely.
void merge_duplicates(FeatureSet& set, double eps);

/// Full per-frame pipeline: smoothness, selection, projection, grouping, merging.
FeatureSet frame_features(const LidarScan& scan, const SegmentedScan& seg, const FeatureConfig& config);

/// `x,y,kind,group,ring` rows with a header line.
std::string features_csv(const FeatureSet& set);

}  // namespace fploc
