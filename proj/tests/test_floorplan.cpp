#include <random>

#include "doctest.h"
#include "fploc/floorplan.hpp"
#include "fploc/plan_gen.hpp"

using namespace fploc;

TEST_CASE("parse single elements and bounds") {
  const FloorPlan seg = parse_floor_plan("SEGMENT 0 0 2 0\n");
  REQUIRE(seg.size() == 1);
  CHECK(seg.bounds().min == Vec2(0, 0));
  CHECK(seg.bounds().max == Vec2(2, 0));

  const FloorPlan circ = parse_floor_plan("CIRCLE 1 1 0.5");
  CHECK(circ.bounds().min.isApprox(Vec2(0.5, 0.5)));
  CHECK(circ.bounds().max.isApprox(Vec2(1.5, 1.5)));

  const FloorPlan arc = parse_floor_plan("# quarter arc\nARC 0 0 1 0 1.5707963\n");
  CHECK(arc.bounds().min.x() == doctest::Approx(0.0).epsilon(1e-7));
  CHECK(arc.bounds().min.y() == doctest::Approx(0.0).epsilon(1e-7));
  CHECK(arc.bounds().max.x() == doctest::Approx(1.0));
  CHECK(arc.bounds().max.y() == doctest::Approx(1.0));
}

TEST_CASE("arc bounds agree with dense sampling") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ang(-7.0, 7.0), sweep(0.05, 6.2);
  for (int i = 0; i < 200; ++i) {
    const double t0 = ang(rng);
    const Arc a{Vec2(0.3, -1.2), 1.7, t0, t0 + sweep(rng)};
    const Bounds b = element_bounds(validate_element(a));
    Bounds s{a.point_at(a.theta_start), a.point_at(a.theta_start)};
    for (const Vec2& p : sample_points(validate_element(a), 1e-3)) s.extend(p);
    CHECK((b.min - s.min).norm() < 1e-5);
    CHECK((b.max - s.max).norm() < 1e-5);
  }
}

TEST_CASE("parse errors") {
  CHECK_THROWS_AS(parse_floor_plan("SEGMENT 0 0 2\n"), ParseError);
  CHECK_THROWS_AS(parse_floor_plan("WALL 0 0 1 1\n"), ParseError);
  CHECK_THROWS_AS(parse_floor_plan("SEGMENT 1 1 1 1\n"), ValidationError);
  CHECK_THROWS_AS(parse_floor_plan("CIRCLE 0 0 -1\n"), ValidationError);
  CHECK_THROWS_AS(parse_floor_plan("# nothing\n"), ValidationError);
  try {
    parse_floor_plan("SEGMENT 0 0 1 0\nSEGMENT x 0 1 0\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("closest point examples") {
  auto r = closest_point(Vec2(1, 1), Segment{Vec2(0, 0), Vec2(2, 0)});
  CHECK(r.point.isApprox(Vec2(1, 0)));
  CHECK(r.distance == doctest::Approx(1.0));

  r = closest_point(Vec2(3, 0), Circle{Vec2(0, 0), 1.0});
  CHECK(r.point.isApprox(Vec2(1, 0)));
  CHECK(r.distance == doctest::Approx(2.0));

  r = closest_point(Vec2(0, 0), Circle{Vec2(0, 0), 1.0});
  CHECK(r.point.isApprox(Vec2(1, 0)));
  CHECK(r.distance == doctest::Approx(1.0));

  r = closest_point(Vec2(-1, -1), validate_element(Arc{Vec2(0, 0), 1.0, 0.0, kPi / 2}));
  CHECK(r.distance == doctest::Approx(std::sqrt(5.0)));
}

TEST_CASE("closest point bounds every sample and is 1-Lipschitz") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const std::vector<GeometricElement> elems = {
      validate_element(Segment{Vec2(-1, 0.5), Vec2(1.5, -0.7)}),
      validate_element(Circle{Vec2(0.2, 0.1), 1.3}),
      validate_element(Arc{Vec2(-0.4, 0.3), 1.1, 2.0, 5.5}),
  };
  for (const auto& e : elems) {
    const auto samples = sample_points(e, 0.001);
    for (int i = 0; i < 100; ++i) {
      const Vec2 q(u(rng), u(rng));
      const double d = closest_point(q, e).distance;
      double best = 1e9;
      for (const auto& s : samples) best = std::min(best, (q - s).norm());
      CHECK(d <= best + 1e-12);
      CHECK(best - d <= 0.0005 + 1e-12);
      const Vec2 q2 = q + Vec2(u(rng), u(rng)) * 0.1;
      CHECK(std::abs(closest_point(q2, e).distance - d) <= (q2 - q).norm() + 1e-12);
    }
  }
}

TEST_CASE("sample_points examples") {
  auto pts = sample_points(Segment{Vec2(0, 0), Vec2(1, 0)}, 0.5);
  REQUIRE(pts.size() == 3);
  CHECK(pts[1].isApprox(Vec2(0.5, 0)));

  pts = sample_points(Circle{Vec2(0, 0), 1.0}, kTwoPi / 4);
  REQUIRE(pts.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK((pts[i] - pts[(i + 1) % 4]).norm() == doctest::Approx(std::sqrt(2.0)));
  }

  pts = sample_points(validate_element(Arc{Vec2(0, 0), 2.0, 0.0, kPi}), 0.1);
  CHECK(pts.size() == 64);
  for (std::size_t i = 1; i < pts.size(); ++i) CHECK((pts[i] - pts[i - 1]).norm() <= 0.1 + 1e-12);
}

TEST_CASE("brute force nearest") {
  const FloorPlan one = parse_floor_plan("SEGMENT 0 0 1 0");
  CHECK(brute_force_nearest(Vec2(5, 5), one, 1).front().element_id == 0);
  CHECK(brute_force_nearest(Vec2(5, 5), one, 3).size() == 1);

  const FloorPlan two = parse_floor_plan("SEGMENT 0 0 2 0\nSEGMENT 0 2 2 2\n");
  const auto r = brute_force_nearest(Vec2(1, 0.5), two, 2);
  REQUIRE(r.size() == 2);
  CHECK(r[0].element_id == 0);
  CHECK(r[0].distance == doctest::Approx(0.5));
  CHECK(r[1].element_id == 1);
  CHECK(r[1].distance == doctest::Approx(1.5));

  // Ties go to the smaller id.
  CHECK(brute_force_nearest(Vec2(1, 1), two, 1).front().element_id == 0);
}

TEST_CASE("brute force k=1 equals exhaustive argmin") {
  const FloorPlan plan = plans::corridor_maze(4, 3, 2.0, 9);
  REQUIRE(plan.size() <= 60);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ux(plan.bounds().min.x(), plan.bounds().max.x());
  std::uniform_real_distribution<double> uy(plan.bounds().min.y(), plan.bounds().max.y());
  for (int i = 0; i < 10000; ++i) {
    const Vec2 q(ux(rng), uy(rng));
    ElementId best = 0;
    double bd = 1e18;
    for (ElementId id = 0; id < plan.size(); ++id) {
      const double d = closest_point(q, plan.element(id)).distance;
      if (d < bd) bd = d, best = id;
    }
    const auto r = brute_force_nearest(q, plan, 1).front();
    CHECK(r.element_id == best);
  }
}

TEST_CASE("dump round-trips bit-exactly") {
  for (const FloorPlan& plan : {plans::room_with_pillars(), plans::mixed_arcs(4), plans::corridor_maze(5, 4, 2.5, 1)}) {
    const FloorPlan back = parse_floor_plan(dump_floor_plan(plan));
    CHECK(dump_floor_plan(back) == dump_floor_plan(plan));
    CHECK(back.size() == plan.size());
  }
}

TEST_CASE("transform_plan moves elements rigidly") {
  const FloorPlan plan = plans::mixed_arcs(2);
  const PlanarPose t{1.5, -2.0, 0.7};
  const FloorPlan moved = transform_plan(plan, t);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-5.0, 15.0);
  for (int i = 0; i < 200; ++i) {
    const Vec2 q(u(rng), u(rng));
    for (ElementId id = 0; id < plan.size(); id += 7) {
      CHECK(moved.distance(t.apply(q), id) == doctest::Approx(plan.distance(q, id)).epsilon(1e-9));
    }
  }
}
