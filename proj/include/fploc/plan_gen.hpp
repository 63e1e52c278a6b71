#pragma once

#include <cstdint>

#include "fploc/floorplan.hpp"

// Synthetic floor plans standing in for CAD-derived ones.
namespace fploc::plans {

/// Axis-aligned rectangular room with its lower-left corner at the origin.
FloorPlan square_room(double width, double height);

/// Open hall (about 20 x 12 m) with two door gaps, square pillars and round
/// columns. Around 50 elements.
FloorPlan room_with_pillars();

/// Grid maze of single-line walls built by a seeded depth-first carve, with walls
/// split at every cell junction.
FloorPlan corridor_maze(int cells_x, int cells_y, double cell_size, std::uint64_t seed);

/// Rooms bounded by arcs, round columns and curved walls approximated by short
/// segment chains.
FloorPlan mixed_arcs(std::uint64_t seed);

/// Long straight corridor of the given length and width, closed at both ends.
FloorPlan corridor(double length, double width);

/// `count` random non-degenerate segments of length [0.5, 3] m inside a square of
/// side `extent`; used for lookup-cost scaling measurements.
FloorPlan random_segments(std::size_t count, double extent, std::uint64_t seed);

}  // namespace fploc::plans
