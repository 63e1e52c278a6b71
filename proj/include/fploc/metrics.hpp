#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "fploc/types.hpp"

namespace fploc {

using Trajectory = std::vector<TimedPose>;

/// Throws ValidationError unless timestamps are strictly increasing.
void check_trajectory(const Trajectory& t);

struct PosePair {
  TimedPose est;
  TimedPose ref;
};

/// Greedy nearest-timestamp matching (smallest |dt| first), each sample used at most
/// once, |dt| <= max_dt. Pairs are returned in reference time order. Throws
/// ValidationError when nothing pairs.
std::vector<PosePair> associate(const Trajectory& est, const Trajectory& ref, double max_dt);

/// Mean translational error in cm over the pairs, without alignment.
double ate_cm(const std::vector<PosePair>& pairs);

/// Mean relative translational error in cm over pair steps of `delta`.
double rpe_cm(const std::vector<PosePair>& pairs, int delta = 1);
/// Rotational variant in degrees.
double rpe_deg(const std::vector<PosePair>& pairs, int delta = 1);

/// `timestamp tx ty tz qx qy qz qw`, one line per pose; `#` lines are comments.
std::string format_trajectory(const Trajectory& t);
Trajectory parse_trajectory(std::string_view text);
Trajectory load_trajectory(const std::string& path);
void save_trajectory(const std::string& path, const Trajectory& t);

struct MetricRow {
  std::string metric;
  double value = 0.0;
  std::size_t pairs = 0;
};

/// `metric,value_cm,pairs` CSV.
std::string metrics_csv(const std::vector<MetricRow>& rows);

}  // namespace fploc
