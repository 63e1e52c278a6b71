#include <random>

#include "doctest.h"
#include "fploc/metrics.hpp"

using namespace fploc;

namespace {

Trajectory line(const std::vector<Vec3>& xyz, double dt = 0.1, double t0 = 0.0) {
  Trajectory t;
  for (std::size_t i = 0; i < xyz.size(); ++i) {
    t.push_back({t0 + dt * static_cast<double>(i), Pose6{xyz[i].x(), xyz[i].y(), xyz[i].z(), 0, 0, 0}});
  }
  return t;
}

Pose6 apply(const Pose6& g, const Pose6& p) {
  return Pose6::from_rotation(g.rotation() * p.translation() + g.translation(), g.rotation() * p.rotation());
}

}  // namespace

TEST_CASE("association") {
  const Trajectory ref = line({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}});
  CHECK(associate(ref, ref, 0.0).size() == 3);
  Trajectory shifted = ref;
  for (auto& s : shifted) s.timestamp += 0.02;
  CHECK(associate(shifted, ref, 0.05).size() == 3);
  for (auto& s : shifted) s.timestamp += 10.0;
  CHECK_THROWS_AS(associate(shifted, ref, 0.05), ValidationError);
  CHECK_THROWS_AS(associate({}, ref, 0.05), ValidationError);
}

TEST_CASE("hand-computed three-pose cases") {
  const Trajectory ref = line({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}});
  // A 1 cm slip between the first two poses, none after.
  const Trajectory est = line({{0, 0, 0}, {1.01, 0, 0}, {2.01, 0, 0}});
  const auto pairs = associate(est, ref, 0.001);
  CHECK(std::abs(rpe_cm(pairs) - 0.5) < 1e-12);
  CHECK(std::abs(ate_cm(pairs) - 2.0 / 3.0) < 1e-12);
  CHECK(std::abs(rpe_cm(pairs, 2) - 1.0) < 1e-12);

  const Trajectory off = line({{0.03, 0.04, 0}, {1.03, 0.04, 0}, {2.03, 0.04, 0}});
  CHECK(std::abs(ate_cm(associate(off, ref, 0.001)) - 5.0) < 1e-12);
  CHECK(std::abs(rpe_cm(associate(off, ref, 0.001))) < 1e-12);
  CHECK(ate_cm(associate(ref, ref, 0.0)) == 0.0);
  CHECK(rpe_cm(associate(ref, ref, 0.0)) == 0.0);
  CHECK(rpe_deg(associate(ref, ref, 0.0)) == 0.0);
  CHECK_THROWS_AS(rpe_cm(pairs, 3), ValidationError);
  CHECK_THROWS_AS(rpe_cm(pairs, 0), ValidationError);
}

TEST_CASE("rpe is invariant to a global rigid offset, ate is symmetric") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  Trajectory ref, est;
  for (int i = 0; i < 50; ++i) {
    const Pose6 p{0.3 * i, std::sin(0.2 * i), 1.6 + 0.01 * u(rng), 0.05 * u(rng), 0.05 * u(rng), 0.1 * i};
    ref.push_back({0.1 * i, p});
    est.push_back({0.1 * i, Pose6{p.x + 0.02 * u(rng), p.y + 0.02 * u(rng), p.z, p.roll, p.pitch, p.yaw + 0.01 * u(rng)}});
  }
  const Pose6 g{5.0, -3.0, 0.5, 0.1, -0.2, 1.3};
  Trajectory moved = est;
  for (auto& s : moved) s.pose = apply(g, s.pose);
  const auto a = associate(est, ref, 0.001);
  const auto b = associate(moved, ref, 0.001);
  CHECK(rpe_cm(b) == doctest::Approx(rpe_cm(a)).epsilon(1e-9));
  CHECK(rpe_deg(b) == doctest::Approx(rpe_deg(a)).epsilon(1e-9));
  CHECK(ate_cm(b) > 10 * ate_cm(a));
  CHECK(ate_cm(associate(ref, est, 0.001)) == doctest::Approx(ate_cm(a)).epsilon(1e-12));
}

TEST_CASE("trajectory text round trip") {
  Trajectory t;
  for (int i = 0; i < 5; ++i) t.push_back({0.1 * i + 1e-7, Pose6{1.0 / 3 + i, -2.5, 1.6, 0.01 * i, -0.02, 0.3 * i}});
  const Trajectory back = parse_trajectory(format_trajectory(t));
  REQUIRE(back.size() == t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    CHECK(back[i].timestamp == t[i].timestamp);
    CHECK((back[i].pose.translation() - t[i].pose.translation()).norm() == 0.0);
    CHECK((back[i].pose.rotation() - t[i].pose.rotation()).norm() < 1e-12);
  }
  CHECK(parse_trajectory("# only a comment\n").empty());
  CHECK_THROWS_AS(parse_trajectory("0 1 2 3 0 0 0\n"), ParseError);
  CHECK_THROWS_AS(parse_trajectory("0 0 0 0 0 0 0 1\n0 0 0 0 0 0 0 1\n"), ValidationError);
  try {
    parse_trajectory("0 0 0 0 0 0 0 1\n\n1 0 0 x 0 0 0 1\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("metrics csv") {
  CHECK(metrics_csv({{"ate", 1.5, 10}, {"rpe", 0.25, 9}}) == "metric,value_cm,pairs\nate,1.5,10\nrpe,0.25,9\n");
}
