#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fploc/types.hpp"

namespace fploc {

struct Segment {
  Vec2 p1;
  Vec2 p2;
};

// Counter-clockwise from theta_start to theta_end. After normalization
// theta_start is in [0, 2pi) and theta_end is in (theta_start, theta_start + 2pi).
struct Arc {
  Vec2 center;
  double radius = 0.0;
  double theta_start = 0.0;
  double theta_end = 0.0;

  double sweep() const { return theta_end - theta_start; }
  /// Half-open containment [theta_start, theta_end).
  bool contains_angle(double angle) const {
    return wrap_positive(angle - theta_start) < sweep();
  }
  Vec2 point_at(double angle) const {
    return center + radius * Vec2(std::cos(angle), std::sin(angle));
  }
};

struct Circle {
  Vec2 center;
  double radius = 0.0;
};

using GeometricElement = std::variant<Segment, Arc, Circle>;

using ElementId = std::uint32_t;

struct ClosestPointResult {
  ElementId element_id = 0;
  Vec2 point = Vec2::Zero();
  double distance = 0.0;
};

struct Bounds {
  Vec2 min = Vec2::Zero();
  Vec2 max = Vec2::Zero();

  double width() const { return max.x() - min.x(); }
  double height() const { return max.y() - min.y(); }
  bool contains(const Vec2& p, double eps = 0.0) const {
    return p.x() >= min.x() - eps && p.x() <= max.x() + eps && p.y() >= min.y() - eps &&
           p.y() <= max.y() + eps;
  }
  void extend(const Vec2& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
};

/// Throws ValidationError for zero-length segments, non-positive radii, non-finite
/// values or degenerate arc sweeps. Returns the element with normalized arc angles.
GeometricElement validate_element(GeometricElement e);

Bounds element_bounds(const GeometricElement& e);

/// Exact closest point on one element. The result's element_id is left 0.
ClosestPointResult closest_point(const Vec2& query, const GeometricElement& element);

/// Unit direction perpendicular to the element at `foot`, used when a query lies
/// on the element and the foot-to-query direction is undefined.
Vec2 element_normal(const GeometricElement& element, const Vec2& foot);

/// Points at arc-length intervals <= spacing including both endpoints
/// (circles are closed with no duplicate endpoint).
std::vector<Vec2> sample_points(const GeometricElement& element, double spacing);

/// Immutable floor plan: dense element ids [0, n) and the bounds of all elements.
class FloorPlan {
 public:
  explicit FloorPlan(std::vector<GeometricElement> elements);

  const std::vector<GeometricElement>& elements() const { return elements_; }
  const GeometricElement& element(ElementId id) const { return elements_.at(id); }
  std::size_t size() const { return elements_.size(); }
  const Bounds& bounds() const { return bounds_; }

  double distance(const Vec2& query, ElementId id) const;
  ClosestPointResult closest(const Vec2& query, ElementId id) const;

 private:
  std::vector<GeometricElement> elements_;
  Bounds bounds_;
};

/// Parses `SEGMENT x1 y1 x2 y2`, `ARC cx cy r t0 t1`, `CIRCLE cx cy r` lines.
FloorPlan parse_floor_plan(std::string_view text);
FloorPlan load_floor_plan(const std::string& path);

/// Inverse of parse_floor_plan; parse(dump(p)) reproduces every double bit-exactly.
std::string dump_floor_plan(const FloorPlan& plan);

/// Exact k nearest elements, ascending by distance, ties by smaller id.
std::vector<ClosestPointResult> brute_force_nearest(const Vec2& query, const FloorPlan& plan,
                                                    std::size_t k);

/// Applies a rigid planar transform to every element.
FloorPlan transform_plan(const FloorPlan& plan, const PlanarPose& transform);

}  // namespace fploc
