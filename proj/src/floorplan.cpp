#include "fploc/floorplan.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>

namespace fploc {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

bool finite(const Vec2& p) { return std::isfinite(p.x()) && std::isfinite(p.y()); }

ClosestPointResult closest_on_segment(const Vec2& q, const Segment& s) {
  const Vec2 d = s.p2 - s.p1;
  const double t = std::clamp((q - s.p1).dot(d) / d.squaredNorm(), 0.0, 1.0);
  const Vec2 foot = s.p1 + t * d;
  return {0, foot, (q - foot).norm()};
}

ClosestPointResult closest_on_circle(const Vec2& q, const Circle& c) {
  const Vec2 v = q - c.center;
  const double n = v.norm();
  // Query at the exact center: every point is equidistant, take angle 0.
  const Vec2 foot = n > 0.0 ? Vec2(c.center + c.radius * v / n)
                            : Vec2(c.center + Vec2(c.radius, 0.0));
  return {0, foot, n > 0.0 ? std::abs(n - c.radius) : c.radius};
}

ClosestPointResult closest_on_arc(const Vec2& q, const Arc& a) {
  const Vec2 v = q - a.center;
  const double n = v.norm();
  if (n > 0.0 && a.contains_angle(std::atan2(v.y(), v.x()))) {
    const Vec2 foot = a.center + a.radius * v / n;
    return {0, foot, std::abs(n - a.radius)};
  }
  const Vec2 s = a.point_at(a.theta_start);
  const Vec2 e = a.point_at(a.theta_end);
  const double ds = (q - s).norm();
  const double de = (q - e).norm();
  return de < ds ? ClosestPointResult{0, e, de} : ClosestPointResult{0, s, ds};
}

void append_number(std::string& out, double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

double parse_number(std::string_view tok, int line) {
  double v = 0.0;
  const auto* first = tok.data();
  const auto* last = tok.data() + tok.size();
  if (!tok.empty() && *first == '+') ++first;
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last || !std::isfinite(v)) {
    throw ParseError(line, "invalid number '" + std::string(tok) + "'");
  }
  return v;
}

}  // namespace

GeometricElement validate_element(GeometricElement e) {
  return std::visit(
      overloaded{
          [](Segment s) -> GeometricElement {
            if (!finite(s.p1) || !finite(s.p2)) throw ValidationError("segment has non-finite coordinates");
            if ((s.p2 - s.p1).norm() <= 1e-9) throw ValidationError("zero-length segment");
            return s;
          },
          [](Arc a) -> GeometricElement {
            if (!finite(a.center) || !std::isfinite(a.radius) || !std::isfinite(a.theta_start) ||
                !std::isfinite(a.theta_end)) {
              throw ValidationError("arc has non-finite parameters");
            }
            if (a.radius <= 0.0) throw ValidationError("arc radius must be positive");
            if (a.theta_start < 0.0 || a.theta_start >= kTwoPi) a.theta_start = wrap_positive(a.theta_start);
            double sweep = a.theta_end - a.theta_start;
            if (sweep <= 0.0 || sweep >= kTwoPi) {
              sweep = wrap_positive(sweep);
              if (sweep <= 1e-12) throw ValidationError("arc sweep must be in (0, 2pi); use CIRCLE");
              a.theta_end = a.theta_start + sweep;
            }
            return a;
          },
          [](Circle c) -> GeometricElement {
            if (!finite(c.center) || !std::isfinite(c.radius)) throw ValidationError("circle has non-finite parameters");
            if (c.radius <= 0.0) throw ValidationError("circle radius must be positive");
            return c;
          },
      },
      std::move(e));
}

Bounds element_bounds(const GeometricElement& e) {
  return std::visit(
      overloaded{
          [](const Segment& s) {
            Bounds b{s.p1, s.p1};
            b.extend(s.p2);
            return b;
          },
          [](const Arc& a) {
            Bounds b{a.point_at(a.theta_start), a.point_at(a.theta_start)};
            b.extend(a.point_at(a.theta_end));
            for (int k = 0; k < 4; ++k) {
              const double ang = k * kPi / 2.0;
              if (a.contains_angle(ang)) b.extend(a.point_at(ang));
            }
            return b;
          },
          [](const Circle& c) {
            const Vec2 r(c.radius, c.radius);
            return Bounds{c.center - r, c.center + r};
          },
      },
      e);
}

ClosestPointResult closest_point(const Vec2& query, const GeometricElement& element) {
  return std::visit(
      overloaded{
          [&](const Segment& s) { return closest_on_segment(query, s); },
          [&](const Arc& a) { return closest_on_arc(query, a); },
          [&](const Circle& c) { return closest_on_circle(query, c); },
      },
      element);
}

Vec2 element_normal(const GeometricElement& element, const Vec2& foot) {
  return std::visit(
      overloaded{
          [](const Segment& s) -> Vec2 {
            const Vec2 d = (s.p2 - s.p1).normalized();
            return {-d.y(), d.x()};
          },
          [&](const Arc& a) -> Vec2 { return (foot - a.center).normalized(); },
          [&](const Circle& c) -> Vec2 { return (foot - c.center).normalized(); },
      },
      element);
}

std::vector<Vec2> sample_points(const GeometricElement& element, double spacing) {
  if (!(spacing > 0.0)) throw ValidationError("sample spacing must be positive");
  // Guards against ceil() rounding an exact multiple up by one interval.
  auto intervals = [spacing](double length) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(length / spacing - 1e-9)));
  };
  std::vector<Vec2> pts;
  std::visit(overloaded{
                 [&](const Segment& s) {
                   const std::size_t n = intervals((s.p2 - s.p1).norm());
                   pts.reserve(n + 1);
                   for (std::size_t i = 0; i <= n; ++i) {
                     pts.push_back(s.p1 + (s.p2 - s.p1) * (static_cast<double>(i) / n));
                   }
                 },
                 [&](const Arc& a) {
                   const std::size_t n = intervals(a.radius * a.sweep());
                   pts.reserve(n + 1);
                   for (std::size_t i = 0; i <= n; ++i) {
                     pts.push_back(a.point_at(a.theta_start + a.sweep() * static_cast<double>(i) / n));
                   }
                 },
                 [&](const Circle& c) {
                   const std::size_t n = std::max<std::size_t>(3, intervals(kTwoPi * c.radius));
                   pts.reserve(n);
                   for (std::size_t i = 0; i < n; ++i) {
                     const double ang = kTwoPi * static_cast<double>(i) / n;
                     pts.push_back(c.center + c.radius * Vec2(std::cos(ang), std::sin(ang)));
                   }
                 },
             },
             element);
  return pts;
}

FloorPlan::FloorPlan(std::vector<GeometricElement> elements) : elements_(std::move(elements)) {
  if (elements_.empty()) throw ValidationError("floor plan has no elements");
  if (elements_.size() > std::numeric_limits<ElementId>::max()) {
    throw ValidationError("too many elements");
  }
  for (auto& e : elements_) e = validate_element(std::move(e));
  bounds_ = element_bounds(elements_.front());
  for (const auto& e : elements_) {
    const Bounds b = element_bounds(e);
    bounds_.extend(b.min);
    bounds_.extend(b.max);
  }
}

double FloorPlan::distance(const Vec2& query, ElementId id) const {
  return closest_point(query, elements_[id]).distance;
}

ClosestPointResult FloorPlan::closest(const Vec2& query, ElementId id) const {
  auto r = closest_point(query, elements_[id]);
  r.element_id = id;
  return r;
}

FloorPlan parse_floor_plan(std::string_view text) {
  std::vector<GeometricElement> elements;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      std::size_t j = i;
      while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
      if (j > i) tokens.push_back(line.substr(i, j - i));
      i = j;
    }
    if (tokens.empty()) continue;

    auto expect = [&](std::size_t n) {
      if (tokens.size() != n + 1) {
        throw ParseError(line_no, std::string(tokens[0]) + " expects " + std::to_string(n) + " values, got " +
                                      std::to_string(tokens.size() - 1));
      }
    };
    auto num = [&](std::size_t k) { return parse_number(tokens[k], line_no); };

    GeometricElement e;
    if (tokens[0] == "SEGMENT") {
      expect(4);
      e = Segment{{num(1), num(2)}, {num(3), num(4)}};
    } else if (tokens[0] == "ARC") {
      expect(5);
      e = Arc{{num(1), num(2)}, num(3), num(4), num(5)};
    } else if (tokens[0] == "CIRCLE") {
      expect(3);
      e = Circle{{num(1), num(2)}, num(3)};
    } else {
      throw ParseError(line_no, "unknown element type '" + std::string(tokens[0]) + "'");
    }
    try {
      elements.push_back(validate_element(std::move(e)));
    } catch (const ValidationError& err) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + err.what());
    }
  }
  return FloorPlan(std::move(elements));
}

FloorPlan load_floor_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open floor plan '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_floor_plan(ss.str());
}

std::string dump_floor_plan(const FloorPlan& plan) {
  std::string out;
  for (const auto& e : plan.elements()) {
    std::visit(overloaded{
                   [&](const Segment& s) {
                     out += "SEGMENT";
                     for (double v : {s.p1.x(), s.p1.y(), s.p2.x(), s.p2.y()}) {
                       out += ' ';
                       append_number(out, v);
                     }
                   },
                   [&](const Arc& a) {
                     out += "ARC";
                     for (double v : {a.center.x(), a.center.y(), a.radius, a.theta_start, a.theta_end}) {
                       out += ' ';
                       append_number(out, v);
                     }
                   },
                   [&](const Circle& c) {
                     out += "CIRCLE";
                     for (double v : {c.center.x(), c.center.y(), c.radius}) {
                       out += ' ';
                       append_number(out, v);
                     }
                   },
               },
               e);
    out += '\n';
  }
  return out;
}

std::vector<ClosestPointResult> brute_force_nearest(const Vec2& query, const FloorPlan& plan, std::size_t k) {
  if (k == 0) throw ValidationError("k must be >= 1");
  std::vector<ClosestPointResult> all;
  all.reserve(plan.size());
  for (ElementId id = 0; id < plan.size(); ++id) all.push_back(plan.closest(query, id));
  k = std::min(k, all.size());
  auto less = [](const ClosestPointResult& a, const ClosestPointResult& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.element_id < b.element_id);
  };
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), less);
  all.resize(k);
  return all;
}

FloorPlan transform_plan(const FloorPlan& plan, const PlanarPose& t) {
  std::vector<GeometricElement> out;
  out.reserve(plan.size());
  for (const auto& e : plan.elements()) {
    out.push_back(std::visit(overloaded{
                                 [&](const Segment& s) -> GeometricElement { return Segment{t.apply(s.p1), t.apply(s.p2)}; },
                                 [&](const Arc& a) -> GeometricElement {
                                   return Arc{t.apply(a.center), a.radius, a.theta_start + t.yaw, a.theta_end + t.yaw};
                                 },
                                 [&](const Circle& c) -> GeometricElement { return Circle{t.apply(c.center), c.radius}; },
                             },
                             e));
  }
  return FloorPlan(std::move(out));
}

}  // namespace fploc
