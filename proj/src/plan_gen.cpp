#include "fploc/plan_gen.hpp"

#include <random>

namespace fploc::plans {
namespace {

// Splits the wall p1-p2 into pieces no longer than max_piece.
void add_wall(std::vector<GeometricElement>& out, const Vec2& p1, const Vec2& p2, double max_piece) {
  const double len = (p2 - p1).norm();
  const int n = std::max(1, static_cast<int>(std::ceil(len / max_piece - 1e-9)));
  for (int i = 0; i < n; ++i) {
    out.push_back(Segment{p1 + (p2 - p1) * (static_cast<double>(i) / n), p1 + (p2 - p1) * (static_cast<double>(i + 1) / n)});
  }
}

void add_box(std::vector<GeometricElement>& out, const Vec2& c, double half) {
  const Vec2 a = c + Vec2(-half, -half), b = c + Vec2(half, -half), d = c + Vec2(half, half), e = c + Vec2(-half, half);
  out.push_back(Segment{a, b});
  out.push_back(Segment{b, d});
  out.push_back(Segment{d, e});
  out.push_back(Segment{e, a});
}

}  // namespace

FloorPlan square_room(double width, double height) {
  std::vector<GeometricElement> e;
  e.push_back(Segment{{0, 0}, {width, 0}});
  e.push_back(Segment{{width, 0}, {width, height}});
  e.push_back(Segment{{width, height}, {0, height}});
  e.push_back(Segment{{0, height}, {0, 0}});
  return FloorPlan(std::move(e));
}

FloorPlan room_with_pillars() {
  constexpr double W = 19.7, H = 12.3;
  std::vector<GeometricElement> e;
  // South wall with a door gap at x in [4.1, 5.25], north wall with one at [13.9, 15.05].
  add_wall(e, {0, 0}, {4.1, 0}, 2.0);
  add_wall(e, {5.25, 0}, {W, 0}, 2.0);
  add_wall(e, {W, 0}, {W, H}, 2.0);
  add_wall(e, {W, H}, {15.05, H}, 2.0);
  add_wall(e, {13.9, H}, {0, H}, 2.0);
  add_wall(e, {0, H}, {0, 0}, 2.0);
  // Short partition near the east end.
  add_wall(e, {16.45, H}, {16.45, 9.35}, 2.0);
  // Pillars: square in the west half, round in the east half.
  add_box(e, {4.85, 3.95}, 0.3);
  add_box(e, {4.85, 8.2}, 0.3);
  add_box(e, {8.9, 3.95}, 0.3);
  add_box(e, {8.9, 8.2}, 0.3);
  e.push_back(Circle{{12.95, 3.95}, 0.3});
  e.push_back(Circle{{12.95, 8.2}, 0.3});
  e.push_back(Circle{{16.9, 4.3}, 0.25});
  return FloorPlan(std::move(e));
}

FloorPlan corridor_maze(int cells_x, int cells_y, double cell_size, std::uint64_t seed) {
  if (cells_x < 1 || cells_y < 1 || !(cell_size > 0.0)) throw ValidationError("invalid maze dimensions");
  std::mt19937_64 rng(seed);
  // wall_h[y][x]: wall below cell (x, y), y in [0, cells_y]; wall_v[y][x]: left of cell (x, y).
  std::vector<std::vector<bool>> wall_h(cells_y + 1, std::vector<bool>(cells_x, true));
  std::vector<std::vector<bool>> wall_v(cells_y, std::vector<bool>(cells_x + 1, true));
  std::vector<std::vector<bool>> seen(cells_y, std::vector<bool>(cells_x, false));

  std::vector<std::pair<int, int>> stack{{0, 0}};
  seen[0][0] = true;
  while (!stack.empty()) {
    const auto [x, y] = stack.back();
    std::vector<int> dirs;
    if (x > 0 && !seen[y][x - 1]) dirs.push_back(0);
    if (x + 1 < cells_x && !seen[y][x + 1]) dirs.push_back(1);
    if (y > 0 && !seen[y - 1][x]) dirs.push_back(2);
    if (y + 1 < cells_y && !seen[y + 1][x]) dirs.push_back(3);
    if (dirs.empty()) {
      stack.pop_back();
      continue;
    }
    const int d = dirs[std::uniform_int_distribution<std::size_t>(0, dirs.size() - 1)(rng)];
    int nx = x, ny = y;
    if (d == 0) { wall_v[y][x] = false; nx = x - 1; }
    if (d == 1) { wall_v[y][x + 1] = false; nx = x + 1; }
    if (d == 2) { wall_h[y][x] = false; ny = y - 1; }
    if (d == 3) { wall_h[y + 1][x] = false; ny = y + 1; }
    seen[ny][nx] = true;
    stack.push_back({nx, ny});
  }
  // Entrance and exit.
  wall_v[0][0] = false;
  wall_v[cells_y - 1][cells_x] = false;

  // Corridor widths vary between 0.6 and 1.1 times the nominal cell size.
  std::uniform_real_distribution<double> uw(0.6 * cell_size, 1.1 * cell_size);
  std::vector<double> xs{0.0}, ys{0.0};
  for (int x = 0; x < cells_x; ++x) xs.push_back(xs.back() + uw(rng));
  for (int y = 0; y < cells_y; ++y) ys.push_back(ys.back() + uw(rng));

  std::vector<GeometricElement> e;
  for (int y = 0; y <= cells_y; ++y) {
    for (int x = 0; x < cells_x; ++x) {
      if (wall_h[y][x]) add_wall(e, {xs[x], ys[y]}, {xs[x + 1], ys[y]}, cell_size / 2.0);
    }
  }
  for (int y = 0; y < cells_y; ++y) {
    for (int x = 0; x <= cells_x; ++x) {
      if (wall_v[y][x]) add_wall(e, {xs[x], ys[y]}, {xs[x], ys[y + 1]}, cell_size / 2.0);
    }
  }
  return FloorPlan(std::move(e));
}

FloorPlan mixed_arcs(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<GeometricElement> e;
  constexpr double W = 23.7, H = 17.9;
  add_wall(e, {0, 0}, {W, 0}, 3.0);
  add_wall(e, {W, 0}, {W, H}, 3.0);
  add_wall(e, {W, H}, {0, H}, 3.0);
  add_wall(e, {0, H}, {0, 0}, 3.0);

  // Round room with a doorway facing east.
  e.push_back(Arc{{6.1, 5.85}, 3.05, 0.35, kTwoPi - 0.35});
  // Half-round apse on the north wall.
  e.push_back(Arc{{15.85, H}, 2.45, kPi, kTwoPi});
  // Quarter-round corner on the south-east.
  e.push_back(Arc{{W, 0.0}, 4.0, kPi / 2.0, kPi});
  // Curved wall approximated by a chain of short segments.
  for (int i = 0; i < 16; ++i) {
    const double a0 = kPi * 0.15 + i * (kPi * 0.7 / 16.0);
    const double a1 = kPi * 0.15 + (i + 1) * (kPi * 0.7 / 16.0);
    const Vec2 c(14.3, 3.7);
    e.push_back(Segment{c + 5.0 * Vec2(std::cos(a0), std::sin(a0)), c + 5.0 * Vec2(std::cos(a1), std::sin(a1))});
  }
  // S-shaped wall from two opposite arcs.
  e.push_back(Arc{{3.1, 13.85}, 1.45, 0.0, kPi});
  e.push_back(Arc{{6.0, 13.85}, 1.45, kPi, kTwoPi});
  // Columns at seeded positions away from the other structures.
  std::uniform_real_distribution<double> ux(10.0, 22.0), uy(9.0, 14.0), ur(0.2, 0.45);
  for (int i = 0; i < 12; ++i) e.push_back(Circle{{ux(rng), uy(rng)}, ur(rng)});
  // Freestanding partition walls.
  add_wall(e, {9.45, 16.35}, {9.45, 10.85}, 1.5);
  add_wall(e, {9.45, 10.85}, {11.9, 10.85}, 1.5);
  return FloorPlan(std::move(e));
}

FloorPlan corridor(double length, double width) {
  std::vector<GeometricElement> e;
  add_wall(e, {0, 0}, {length, 0}, 5.0);
  add_wall(e, {length, 0}, {length, width}, 5.0);
  add_wall(e, {length, width}, {0, width}, 5.0);
  add_wall(e, {0, width}, {0, 0}, 5.0);
  return FloorPlan(std::move(e));
}

FloorPlan random_segments(std::size_t count, double extent, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> upos(0.0, extent), uang(0.0, kTwoPi), ulen(0.5, 3.0);
  std::vector<GeometricElement> e;
  e.reserve(count);
  while (e.size() < count) {
    const Vec2 p(upos(rng), upos(rng));
    const double a = uang(rng), l = ulen(rng);
    const Vec2 q = p + l * Vec2(std::cos(a), std::sin(a));
    if (q.x() < 0 || q.y() < 0 || q.x() > extent || q.y() > extent) continue;
    e.push_back(Segment{p, q});
  }
  return FloorPlan(std::move(e));
}

}  // namespace fploc::plans
