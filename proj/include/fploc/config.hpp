#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fploc/registration.hpp"

namespace fploc {

/// Every tunable of a run. Text form: `key = value` lines, `#` comments.
struct RunConfig {
  SegmentationConfig segmentation;
  FeatureConfig features;
  RegistrationConfig registration;
  bool windowed = true;
  std::optional<std::uint64_t> seed;

  // Input paths; relative paths in a config file resolve against the file's directory.
  std::string plan;
  std::string annf;
  std::string manifest;
  std::string waypoints;

  double root_length = 6.0;
  int max_depth = 7;

  // Simulation.
  SensorModel sensor = SensorModel::os1_64();
  MotionProfile motion;
  double scene_ceiling_z = 3.0;  // used when ceiling_z_m is unset
  int clutter_boxes = 0;

  /// Throws ValidationError on an unknown key or malformed value.
  void set(const std::string& key, const std::string& value);
  /// Module validation plus existence of every non-empty input path.
  void validate() const;

  TrackerConfig tracker() const { return {segmentation, features, registration, windowed}; }

  static const std::vector<std::string>& keys();
};

/// Applies the lines of `text` on top of `base`. `base_dir` anchors relative paths.
/// Errors carry the line number.
RunConfig parse_run_config(std::string_view text, RunConfig base = {}, const std::string& base_dir = "");
RunConfig load_run_config(const std::string& path, RunConfig base = {});

/// Parses a `key=value` override and applies it.
void apply_override(RunConfig& config, const std::string& assignment);

}  // namespace fploc
