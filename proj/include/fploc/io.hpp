#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fploc/metrics.hpp"
#include "fploc/scan_sim.hpp"

namespace fploc {

/// `ring,azimuth_rad,range_m,x,y,z`, one row per ray including misses (NaN range and
/// point). Values round-trip exactly.
std::string format_scan_csv(const LidarScan& scan);

/// Ring elevations are not stored; they are recovered from the hits of each ring and
/// interpolated for rings without hits. Throws FormatError on malformed content.
LidarScan parse_scan_csv(std::string_view text, double timestamp = 0.0);

struct ManifestEntry {
  double timestamp = 0.0;
  std::string scan_file;  // as written; relative paths resolve against the manifest directory
  Pose6 truth;
};

/// `timestamp_s,scan_file,gt_tx,gt_ty,gt_tz,gt_roll,gt_pitch,gt_yaw`
std::string format_manifest(const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> parse_manifest(std::string_view text);

struct Sequence {
  std::string directory;
  std::vector<ManifestEntry> entries;

  std::string scan_path(std::size_t i) const;
  LidarScan load_scan(std::size_t i) const;
  Trajectory ground_truth() const;
};

Sequence load_sequence(const std::string& manifest_path);

/// `x y yaw` per line (yaw in radians), `#` comments.
std::vector<Waypoint> parse_waypoints(std::string_view text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

/// Shortest text that parses back to the same double.
std::string format_double(double v);

struct PlotSeries {
  std::string label;
  Trajectory trajectory;
};

/// Bird's-eye SVG: plan elements in grey, one polyline per series with a fixed
/// palette, and a legend.
std::string plot_svg(const FloorPlan& plan, const std::vector<PlotSeries>& series);
/// `label,timestamp,x,y` rows for the plotted series.
std::string plot_csv(const std::vector<PlotSeries>& series);

}  // namespace fploc
