#include "fploc/registration.hpp"

#include <chrono>
#include <map>

#include <Eigen/Cholesky>

namespace fploc {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

Vec2 perp(const Vec2& v) { return {-v.y(), v.x()}; }

double huber_weight(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 1.0 : delta / a;
}

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

// Closest point on the curve supporting `e`: the infinite line of a segment, the full
// circle of an arc.
ClosestPointResult closest_on_support(const Vec2& q, const GeometricElement& e, ElementId id) {
  return std::visit(overloaded{
                        [&](const Segment& s) {
                          const Vec2 d = (s.p2 - s.p1).normalized();
                          const Vec2 foot = s.p1 + d * d.dot(q - s.p1);
                          return ClosestPointResult{id, foot, (q - foot).norm()};
                        },
                        [&](const Arc& a) { return closest_point(q, Circle{a.center, a.radius}); },
                        [&](const Circle& c) { return closest_point(q, c); },
                    },
                    e);
}

PlanarPose apply_step(const PlanarPose& p, const Eigen::Vector3d& d) {
  return {p.x + d[0], p.y + d[1], wrap_angle(p.yaw + d[2])};
}

// Gauss-Newton normal equations of one frame's point residuals.
void accumulate_frame(const FeatureSet& features, const std::vector<Correspondence>& corr, const PlanarPose& pose,
                      const FloorPlan& plan, double delta, Eigen::Matrix3d& h, Eigen::Vector3d& g) {
  for (std::size_t i = 0; i < features.points.size(); ++i) {
    if (corr[i].element < 0) continue;
    const PointResidual r = element_residual(features.points[i].position, pose, plan,
                                             static_cast<ElementId>(corr[i].element), corr[i].support);
    const double w = huber_weight(r.distance, delta);
    h += w * r.jacobian.transpose() * r.jacobian;
    g += w * r.jacobian.transpose() * r.distance;
  }
}

double match_distance(const Vec2& q, const FloorPlan& plan, const Correspondence& c) {
  const auto id = static_cast<ElementId>(c.element);
  return c.support ? closest_on_support(q, plan.element(id), id).distance : plan.distance(q, id);
}

double objective_with(const FeatureSet& features, const std::vector<Correspondence>& corr, const PlanarPose& pose,
                      const FloorPlan& plan, double delta, std::size_t* used = nullptr) {
  double f = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < features.points.size(); ++i) {
    if (corr[i].element < 0) continue;
    f += huber_loss(match_distance(pose.apply(features.points[i].position), plan, corr[i]), delta);
    ++n;
  }
  if (used) *used = n;
  return f;
}

}  // namespace

PlanMap::PlanMap(FloorPlan plan, std::shared_ptr<const Annf> annf, PlanarPose annf_to_plan)
    : plan_(std::move(plan)),
      annf_(std::move(annf)),
      annf_to_plan_(annf_to_plan),
      plan_to_annf_(annf_to_plan.inverse()),
      identity_(annf_to_plan.x == 0.0 && annf_to_plan.y == 0.0 && annf_to_plan.yaw == 0.0) {
  if (!annf_) throw ValidationError("plan map needs an ANNF");
  if (annf_->element_count() != plan_.size()) throw ValidationError("ANNF was built for a different plan");
}

PlanMap::PlanMap(FloorPlan plan, Annf annf) : PlanMap(std::move(plan), std::make_shared<const Annf>(std::move(annf))) {}

std::optional<ElementPair> PlanMap::candidates(const Vec2& p) const {
  return annf_->find(identity_ ? p : plan_to_annf_.apply(p));
}

PlanMap PlanMap::transformed(const PlanarPose& t) const {
  return PlanMap(transform_plan(plan_, t), annf_, t.compose(annf_to_plan_));
}

PointResidual element_residual(const Vec2& p, const PlanarPose& pose, const FloorPlan& plan, ElementId id,
                               bool support) {
  const Vec2 rp = rot2(pose.yaw) * p;
  const Vec2 q = rp + pose.translation();
  const ClosestPointResult c = support ? closest_on_support(q, plan.element(id), id) : plan.closest(q, id);
  PointResidual r;
  r.element = id;
  r.distance = c.distance;
  Vec2 u;
  if (c.distance > 1e-12) {
    u = (q - c.point) / c.distance;
  } else {
    u = element_normal(plan.element(id), c.point);
  }
  r.jacobian << u.x(), u.y(), u.dot(perp(rp));
  return r;
}

std::optional<PointResidual> point_residual(const Vec2& p, const PlanarPose& pose, const PlanMap& map) {
  const auto cand = map.candidates(pose.apply(p));
  if (!cand) return std::nullopt;
  PointResidual a = element_residual(p, pose, map.plan(), cand->first);
  if (cand->second == cand->first) return a;
  PointResidual b = element_residual(p, pose, map.plan(), cand->second);
  if (b.distance < a.distance || (b.distance == a.distance && b.element < a.element)) return b;
  return a;
}

void RegistrationConfig::validate() const {
  if (!(huber > 0.0)) throw ValidationError("huber_reg_m must be positive");
  if (max_iterations < 1 || window_iterations < 1) throw ValidationError("iteration caps must be positive");
  if (!(tau_key >= 0.0)) throw ValidationError("tau_key_m must be non-negative");
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw ValidationError("alpha and beta must be non-negative");
  if (window < 2) throw ValidationError("window_W must be at least 2");
  if (max_failures < 0) throw ValidationError("max_failures must be non-negative");
}

double huber_loss(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 0.5 * a * a : delta * (a - 0.5 * delta);
}

std::vector<Correspondence> correspondences(const FeatureSet& features, const PlanarPose& pose, const PlanMap& map,
                                            int min_group_votes) {
  const auto& pts = features.points;
  std::vector<Correspondence> corr(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec2 q = pose.apply(pts[i].position);
    const auto cand = map.candidates(q);
    if (!cand) continue;
    ElementId best = cand->first;
    if (cand->second != cand->first) {
      const double da = map.plan().distance(q, cand->first);
      const double db = map.plan().distance(q, cand->second);
      if (db < da || (db == da && cand->second < cand->first)) best = cand->second;
    }
    corr[i].element = best;
  }
  // Majority vote per group; ties to the smaller id.
  std::map<int, std::map<ElementId, int>> votes;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].group != kUngrouped && corr[i].element >= 0) {
      ++votes[pts[i].group][static_cast<ElementId>(corr[i].element)];
    }
  }
  std::map<int, ElementId> winner;
  for (const auto& [group, counts] : votes) {
    int total = 0, best_count = -1;
    ElementId best = 0;
    for (const auto& [id, n] : counts) {
      total += n;
      if (n > best_count) {
        best_count = n;
        best = id;
      }
    }
    if (total >= min_group_votes) winner[group] = best;
  }
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (corr[i].element < 0 || pts[i].group == kUngrouped) continue;
    const auto it = winner.find(pts[i].group);
    if (it != winner.end()) corr[i] = {it->second, true};
  }
  return corr;
}

double frame_objective(const FeatureSet& features, const PlanarPose& pose, const PlanMap& map,
                       const RegistrationConfig& config) {
  return objective_with(features, correspondences(features, pose, map, config.min_group_votes), pose, map.plan(),
                        config.huber);
}

RegistrationResult single_frame_register(const FeatureSet& features, const PlanMap& map, const PlanarPose& init,
                                         const RegistrationConfig& config) {
  config.validate();
  RegistrationResult res;
  res.pose = {init.x, init.y, wrap_angle(init.yaw)};
  const std::size_t n = features.points.size();
  if (n < config.min_features) {
    res.skipped = 0;
    return res;
  }

  auto corr = correspondences(features, res.pose, map, config.min_group_votes);
  std::size_t used = 0;
  double f = objective_with(features, corr, res.pose, map.plan(), config.huber, &used);
  if (used < config.min_features) {
    res.used = used;
    res.skipped = n - used;
    res.objective = f;
    return res;
  }

  double lambda = 1e-4;
  for (int it = 0; it < config.max_iterations; ++it) {
    res.iterations = it + 1;
    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    Eigen::Vector3d g = Eigen::Vector3d::Zero();
    accumulate_frame(features, corr, res.pose, map.plan(), config.huber, h, g);

    bool accepted = false;
    Eigen::Vector3d step = Eigen::Vector3d::Zero();
    while (lambda < 1e10) {
      Eigen::Matrix3d a = h;
      a.diagonal() += lambda * h.diagonal() + Eigen::Vector3d::Constant(1e-12);
      step = a.ldlt().solve(-g);
      if (!step.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      const PlanarPose cand = apply_step(res.pose, step);
      auto cand_corr = correspondences(features, cand, map, config.min_group_votes);
      std::size_t cand_used = 0;
      const double fc = objective_with(features, cand_corr, cand, map.plan(), config.huber, &cand_used);
      if (fc <= f && cand_used >= config.min_features) {
        res.pose = cand;
        corr = std::move(cand_corr);
        f = fc;
        used = cand_used;
        lambda = std::max(lambda * 0.1, 1e-10);
        accepted = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted || step.norm() < config.tolerance) {
      res.converged = true;
      break;
    }
  }
  res.objective = f;
  res.used = used;
  res.skipped = n - used;
  res.ok = true;
  return res;
}

bool is_keyframe(const Pose6& current, const Pose6& last_key, double tau_key) {
  return (current.translation() - last_key.translation()).norm() >= tau_key;
}

Velocity velocity(const PlanarPose& p0, double t0, const PlanarPose& p1, double t1) {
  const double dt = t1 - t0;
  if (!(dt > 0.0)) throw ValidationError("keyframe timestamps must be strictly increasing");
  return {(p1.x - p0.x) / dt, (p1.y - p0.y) / dt, wrap_angle(p1.yaw - p0.yaw) / dt};
}

namespace {

// Velocity-difference rows of one window: 3 per consecutive velocity pair.
void regularizer_rows(const std::vector<Keyframe>& window, const std::vector<PlanarPose>& poses,
                      const RegistrationConfig& config, std::vector<double>& r,
                      std::vector<Eigen::VectorXd>* jac) {
  const int n = static_cast<int>(poses.size());
  const double wa = std::sqrt(config.alpha), wb = std::sqrt(config.beta);
  for (int m = 0; m + 2 < n; ++m) {
    const double t0 = window[m].timestamp, t1 = window[m + 1].timestamp, t2 = window[m + 2].timestamp;
    const Velocity v0 = velocity(poses[m], t0, poses[m + 1], t1);
    const Velocity v1 = velocity(poses[m + 1], t1, poses[m + 2], t2);
    const double d0 = t1 - t0, d1 = t2 - t1;
    const double dv[3] = {v1.vx - v0.vx, v1.vy - v0.vy, v1.omega - v0.omega};
    for (int c = 0; c < 3; ++c) {
      const double w = c < 2 ? wa : wb;
      r.push_back(w * dv[c]);
      if (jac) {
        Eigen::VectorXd j = Eigen::VectorXd::Zero(3 * n);
        j[3 * m + c] = w / d0;
        j[3 * (m + 1) + c] = w * (-1.0 / d1 - 1.0 / d0);
        j[3 * (m + 2) + c] = w / d1;
        jac->push_back(std::move(j));
      }
    }
  }
}

double window_objective_with(const std::vector<Keyframe>& window, const std::vector<PlanarPose>& poses,
                             const std::vector<std::vector<Correspondence>>& corr, const PlanMap& map,
                             const RegistrationConfig& config) {
  double f = 0.0;
  for (std::size_t k = 0; k < window.size(); ++k) {
    f += objective_with(window[k].features, corr[k], poses[k], map.plan(), config.huber);
  }
  std::vector<double> r;
  regularizer_rows(window, poses, config, r, nullptr);
  for (double x : r) f += 0.5 * x * x;
  return f;
}

std::vector<std::vector<Correspondence>> window_correspondences(const std::vector<Keyframe>& window,
                                                           const std::vector<PlanarPose>& poses, const PlanMap& map,
                                                           const RegistrationConfig& config) {
  std::vector<std::vector<Correspondence>> corr;
  corr.reserve(window.size());
  for (std::size_t k = 0; k < window.size(); ++k) {
    corr.push_back(correspondences(window[k].features, poses[k], map, config.min_group_votes));
  }
  return corr;
}

}  // namespace

double window_objective(const std::vector<Keyframe>& window, const std::vector<PlanarPose>& poses,
                        const PlanMap& map, const RegistrationConfig& config) {
  return window_objective_with(window, poses, window_correspondences(window, poses, map, config), map, config);
}

WindowResult windowed_optimize(const std::vector<Keyframe>& window, const PlanMap& map,
                               const RegistrationConfig& config) {
  config.validate();
  if (window.size() < 2) throw ValidationError("windowed optimization needs at least 2 keyframes");
  for (std::size_t k = 1; k < window.size(); ++k) {
    if (!(window[k].timestamp > window[k - 1].timestamp)) {
      throw ValidationError("keyframe timestamps must be strictly increasing");
    }
  }
  const int n = static_cast<int>(window.size());
  WindowResult res;
  for (const auto& k : window) res.poses.push_back(k.pose);
  auto corr = window_correspondences(window, res.poses, map, config);
  double f = window_objective_with(window, res.poses, corr, map, config);

  double lambda = 1e-4;
  for (int it = 0; it < config.window_iterations; ++it) {
    res.iterations = it + 1;
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(3 * n, 3 * n);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(3 * n);
    for (int k = 0; k < n; ++k) {
      Eigen::Matrix3d hk = Eigen::Matrix3d::Zero();
      Eigen::Vector3d gk = Eigen::Vector3d::Zero();
      accumulate_frame(window[k].features, corr[k], res.poses[k], map.plan(), config.huber, hk, gk);
      h.block<3, 3>(3 * k, 3 * k) += hk;
      g.segment<3>(3 * k) += gk;
    }
    std::vector<double> r;
    std::vector<Eigen::VectorXd> jac;
    regularizer_rows(window, res.poses, config, r, &jac);
    for (std::size_t i = 0; i < r.size(); ++i) {
      h += jac[i] * jac[i].transpose();
      g += jac[i] * r[i];
    }

    bool accepted = false;
    Eigen::VectorXd step;
    while (lambda < 1e10) {
      Eigen::MatrixXd a = h;
      a.diagonal() += lambda * h.diagonal() + Eigen::VectorXd::Constant(3 * n, 1e-12);
      Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
      step = ldlt.solve(-g);
      if (ldlt.info() != Eigen::Success || !step.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      std::vector<PlanarPose> cand(n);
      for (int k = 0; k < n; ++k) cand[k] = apply_step(res.poses[k], step.segment<3>(3 * k));
      auto cand_corr = window_correspondences(window, cand, map, config);
      const double fc = window_objective_with(window, cand, cand_corr, map, config);
      if (fc <= f) {
        res.poses = std::move(cand);
        corr = std::move(cand_corr);
        f = fc;
        lambda = std::max(lambda * 0.1, 1e-10);
        accepted = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) {
      res.ok = it > 0;
      break;
    }
    if (step.norm() < config.tolerance) break;
  }
  res.objective = f;
  return res;
}

Tracker::Tracker(const PlanMap& map, TrackerConfig config, const Pose6& init)
    : map_(map), config_(std::move(config)), last_pose_(init.planar()), init_(init) {
  config_.segmentation.validate();
  config_.features.validate();
  config_.registration.validate();
}

Pose6 Tracker::compose(const PlanarPose& p, const VerticalState& v) const {
  Pose6 out;
  out.x = p.x;
  out.y = p.y;
  out.yaw = p.yaw;
  out.z = v.t_z;
  out.roll = v.roll;
  out.pitch = v.pitch;
  return out;
}

void Tracker::emit(const Keyframe& k) { trajectory_[k.frame].pose = compose(k.pose, k.vertical); }

FrameReport Tracker::process(const LidarScan& scan) {
  FrameReport rep;
  rep.frame = trajectory_.size();
  rep.timestamp = scan.timestamp;
  if (!trajectory_.empty() && !(scan.timestamp > trajectory_.back().timestamp)) {
    throw ValidationError("scan timestamps must be strictly increasing");
  }

  auto t0 = Clock::now();
  std::optional<SegmentedScan> seg;
  try {
    seg = segment_scan(scan, config_.segmentation, last_segmentation_ ? &*last_segmentation_ : nullptr);
  } catch (const DegenerateFit&) {
    seg.reset();
  }
  rep.ms_segmentation = ms_since(t0);

  VerticalState vertical;
  FeatureSet features;
  if (seg) {
    rep.stale_vertical = seg->stale;
    vertical = seg->vertical_state;
    if (!config_.segmentation.ceiling_z) {
      if (!first_tz_) first_tz_ = vertical.t_z;
      vertical.t_z = init_.z + (vertical.t_z - *first_tz_);
    }
    t0 = Clock::now();
    features = frame_features(scan, *seg, config_.features);
    rep.ms_features = ms_since(t0);
    rep.feature_count = features.points.size();
  } else {
    vertical.t_z = init_.z;
    vertical.roll = init_.roll;
    vertical.pitch = init_.pitch;
    rep.stale_vertical = true;
  }

  t0 = Clock::now();
  RegistrationResult reg;
  if (seg) reg = single_frame_register(features, map_, last_pose_, config_.registration);
  rep.ms_register = ms_since(t0);

  if (seg && reg.ok) {
    failures_ = 0;
    last_pose_ = reg.pose;
    rep.registered = true;
    last_segmentation_ = std::move(seg);
  } else if (++failures_ > config_.registration.max_failures) {
    throw TrackingLost("tracking lost after " + std::to_string(failures_) + " failed frames; last good pose " +
                       std::to_string(last_pose_.x) + " " + std::to_string(last_pose_.y) + " " +
                       std::to_string(last_pose_.yaw));
  }

  const Pose6 pose = compose(last_pose_, vertical);
  rep.single_pose = pose;
  trajectory_.push_back({scan.timestamp, pose});

  if (rep.registered && (!last_key_pose_ || is_keyframe(pose, *last_key_pose_, config_.registration.tau_key))) {
    rep.keyframe = true;
    last_key_pose_ = pose;
    ++keyframe_count_;
    if (config_.windowed) {
      t0 = Clock::now();
      Keyframe k;
      k.frame = rep.frame;
      k.timestamp = scan.timestamp;
      k.features = std::move(features);
      k.pose = last_pose_;
      k.single_pose = last_pose_;
      k.vertical = vertical;
      k.objective = reg.objective;
      window_.push_back(std::move(k));
      if (static_cast<int>(window_.size()) > config_.registration.window) {
        emit(window_.front());
        window_.pop_front();
      }
      if (window_.size() >= 2) {
        const std::vector<Keyframe> w(window_.begin(), window_.end());
        const WindowResult wr = windowed_optimize(w, map_, config_.registration);
        for (std::size_t i = 0; i < window_.size(); ++i) {
          window_[i].pose = wr.poses[i];
          emit(window_[i]);
        }
      }
      rep.ms_window = ms_since(t0);
    }
  }
  return rep;
}

std::vector<TimedPose> Tracker::finish() {
  while (!window_.empty()) {
    emit(window_.front());
    window_.pop_front();
  }
  return trajectory_;
}

}  // namespace fploc
