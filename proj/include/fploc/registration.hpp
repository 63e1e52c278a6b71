#pragma once

#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fploc/annf.hpp"
#include "fploc/features.hpp"

namespace fploc {

/// Floor plan with its ANNF. The ANNF may live in a different planar frame than the
/// plan: `annf_to_plan` maps ANNF coordinates into plan coordinates.
class PlanMap {
 public:
  PlanMap(FloorPlan plan, std::shared_ptr<const Annf> annf, PlanarPose annf_to_plan = {});
  PlanMap(FloorPlan plan, Annf annf);

  const FloorPlan& plan() const { return plan_; }
  const Annf& annf() const { return *annf_; }
  const PlanarPose& annf_to_plan() const { return annf_to_plan_; }

  /// ANNF candidate pair for a plan-frame point; nullopt outside the grid.
  std::optional<ElementPair> candidates(const Vec2& p) const;

  /// The same map with plan and ANNF both moved by `t` (shares the ANNF).
  PlanMap transformed(const PlanarPose& t) const;

 private:
  FloorPlan plan_;
  std::shared_ptr<const Annf> annf_;
  PlanarPose annf_to_plan_;
  PlanarPose plan_to_annf_;
  bool identity_ = true;
};

struct PointResidual {
  double distance = 0.0;
  Eigen::RowVector3d jacobian = Eigen::RowVector3d::Zero();  // d distance / d (t_x, t_y, yaw)
  ElementId element = 0;
};

/// Distance from pose * p to element `id` and its analytic jacobian. With `support`,
/// the distance is to the curve carrying the element (a segment's infinite line, an
/// arc's full circle).
PointResidual element_residual(const Vec2& p, const PlanarPose& pose, const FloorPlan& plan, ElementId id,
                               bool support = false);

/// Residual against the nearer of the two ANNF candidates; nullopt outside the grid.
std::optional<PointResidual> point_residual(const Vec2& p, const PlanarPose& pose, const PlanMap& map);

struct RegistrationConfig {
  double huber = 0.15;            // m
  int max_iterations = 30;
  double tolerance = 1e-6;
  std::size_t min_features = 30;
  double tau_key = 0.1;           // m
  double alpha = 1.1;
  double beta = 0.9;
  int window = 10;
  int window_iterations = 10;
  int max_failures = 10;          // consecutive failed frames before tracking is lost
  int min_group_votes = 3;

  void validate() const;
};

double huber_loss(double r, double delta);

struct Correspondence {
  long long element = -1;  // -1: outside the ANNF grid
  bool support = false;    // grouped point matched to the group's element via its supporting curve
};

/// Per-point element choice for `features` at `pose`: the nearer ANNF candidate, or
/// for grouped points the majority element of the group. Groups follow walls that
/// plans often split into collinear pieces, so members are matched to the supporting
/// curve of the voted element.
std::vector<Correspondence> correspondences(const FeatureSet& features, const PlanarPose& pose, const PlanMap& map,
                                       int min_group_votes = 3);

/// Huber objective of a frame at `pose` with refreshed correspondences.
double frame_objective(const FeatureSet& features, const PlanarPose& pose, const PlanMap& map,
                       const RegistrationConfig& config);

struct RegistrationResult {
  PlanarPose pose;
  double objective = 0.0;   // m^2
  int iterations = 0;
  std::size_t used = 0;     // residuals inside the grid at the final pose
  std::size_t skipped = 0;  // outside the grid
  bool converged = false;
  bool ok = false;          // false: too few features, pose held at init
};

RegistrationResult single_frame_register(const FeatureSet& features, const PlanMap& map, const PlanarPose& init,
                                         const RegistrationConfig& config);

bool is_keyframe(const Pose6& current, const Pose6& last_key, double tau_key);

struct Velocity {
  double vx = 0.0;
  double vy = 0.0;
  double omega = 0.0;
};

/// Finite-difference velocity between poses at t0 < t1; yaw difference wrapped.
Velocity velocity(const PlanarPose& p0, double t0, const PlanarPose& p1, double t1);

struct Keyframe {
  std::size_t frame = 0;
  double timestamp = 0.0;
  FeatureSet features;
  PlanarPose pose;            // current estimate
  PlanarPose single_pose;     // single-frame result
  VerticalState vertical;
  double objective = 0.0;
};

struct WindowResult {
  std::vector<PlanarPose> poses;
  double objective = 0.0;
  int iterations = 0;
  bool ok = true;
};

/// Joint refinement of all keyframe poses with velocity-difference regularizers.
WindowResult windowed_optimize(const std::vector<Keyframe>& window, const PlanMap& map,
                               const RegistrationConfig& config);
/// Objective of windowed_optimize at the given poses.
double window_objective(const std::vector<Keyframe>& window, const std::vector<PlanarPose>& poses,
                        const PlanMap& map, const RegistrationConfig& config);

struct TrackerConfig {
  SegmentationConfig segmentation;
  FeatureConfig features;
  RegistrationConfig registration;
  bool windowed = true;
};

struct FrameReport {
  std::size_t frame = 0;
  double timestamp = 0.0;
  Pose6 single_pose;
  bool keyframe = false;
  bool registered = false;
  bool stale_vertical = false;
  std::size_t feature_count = 0;
  double ms_segmentation = 0.0;
  double ms_features = 0.0;
  double ms_register = 0.0;
  double ms_window = 0.0;
};

/// Frame-by-frame tracking. Non-keyframes keep their single-frame pose; keyframes take
/// their value when they leave the window (or at finish()).
class Tracker {
 public:
  Tracker(const PlanMap& map, TrackerConfig config, const Pose6& init);

  /// Throws TrackingLost after more than max_failures consecutive failed frames.
  FrameReport process(const LidarScan& scan);
  /// Flushes the window and returns one pose per processed frame.
  std::vector<TimedPose> finish();

  /// Poses emitted so far (keyframes still in the window hold their current estimate).
  const std::vector<TimedPose>& trajectory() const { return trajectory_; }
  std::size_t keyframe_count() const { return keyframe_count_; }

 private:
  void emit(const Keyframe& k);
  Pose6 compose(const PlanarPose& p, const VerticalState& v) const;

  const PlanMap& map_;
  TrackerConfig config_;
  PlanarPose last_pose_;
  Pose6 init_;
  std::optional<SegmentedScan> last_segmentation_;
  std::optional<double> first_tz_;
  std::optional<Pose6> last_key_pose_;
  std::deque<Keyframe> window_;
  std::vector<TimedPose> trajectory_;
  std::size_t keyframe_count_ = 0;
  int failures_ = 0;
};

}  // namespace fploc
