#include "fploc/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>

#include <Eigen/LU>

namespace fploc {
namespace {

constexpr int kInitSectors = 8;

// Longest `fraction` of the returns in each azimuth sector of the rings [first, last),
// z optionally mirrored. Sectors keep the selection spread around the sensor when a tilt
// makes the ceiling range vary with azimuth.
std::vector<Vec3> longest_returns(const LidarScan& scan, int first, int last, double fraction, bool mirror) {
  std::vector<Vec3> out;
  for (int r = std::max(first, 0); r < std::min<int>(last, scan.rings.size()); ++r) {
    std::vector<std::vector<const RayReturn*>> sectors(kInitSectors);
    for (const auto& ret : scan.rings[r]) {
      if (!ret.hit()) continue;
      const int s = static_cast<int>(wrap_positive(ret.azimuth) / kTwoPi * kInitSectors);
      sectors[std::min(s, kInitSectors - 1)].push_back(&ret);
    }
    for (auto& hits : sectors) {
      if (hits.empty()) continue;
      const std::size_t keep = std::clamp<std::size_t>(
          static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(hits.size()))), 1, hits.size());
      std::nth_element(hits.begin(), hits.begin() + (keep - 1), hits.end(),
                       [](const RayReturn* a, const RayReturn* b) { return a->range > b->range; });
      for (std::size_t i = 0; i < keep; ++i) {
        Vec3 p = hits[i]->point;
        if (mirror) p.z() = -p.z();
        out.push_back(p);
      }
    }
  }
  return out;
}

HeightPlane solve_plane(const std::vector<Vec3>& pts, const std::vector<bool>& use) {
  Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
  Vec3 atb = Vec3::Zero();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!use[i]) continue;
    const Vec3 row(pts[i].x(), pts[i].y(), 1.0);
    ata += row * row.transpose();
    atb += row * pts[i].z();
  }
  Eigen::FullPivLU<Eigen::Matrix3d> lu(ata);
  if (lu.rank() < 3) throw DegenerateFit("initial plane points are collinear");
  const Vec3 x = lu.solve(atb);
  return {x[0], x[1], x[2]};
}

// Hits of every ring on one side of the horizon (z mirrored for the ground), thinned
// to at most kSupportPoints by a fixed stride.
constexpr std::size_t kSupportPoints = 4096;

std::vector<Vec3> side_points(const LidarScan& scan, bool mirror, std::size_t limit) {
  std::vector<Vec3> pts;
  const std::size_t n = scan.rings.size();
  // Mirrored, rings run from the top down so the order matches a mirrored scan.
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = mirror ? n - 1 - i : i;
    const double el = scan.ring_elevation[r];
    if (mirror ? !(el < 0.0) : !(el > 0.0)) continue;
    for (const auto& ret : scan.rings[r]) {
      if (ret.hit()) pts.push_back(mirror ? Vec3(ret.point.x(), ret.point.y(), -ret.point.z()) : ret.point);
    }
  }
  if (pts.size() <= limit) return pts;
  const std::size_t stride = (pts.size() + limit - 1) / limit;
  std::vector<Vec3> thin;
  for (std::size_t i = 0; i < pts.size(); i += stride) thin.push_back(pts[i]);
  return thin;
}

// Seeded RANSAC over near-horizontal planes through the selected long returns, scored
// on all returns of that side: support within the band, heavily penalized for returns
// beyond the plane, since rays stop at the ceiling. Plain regression on the selection
// breaks down when the ceiling is visible in few directions and wall tops dominate.
// The result is the regression on the selected returns in the winning consensus band.
HeightPlane least_squares_plane(const std::vector<Vec3>& pts, const std::vector<Vec3>& support, double max_tilt) {
  if (pts.size() < 3) throw DegenerateFit("fewer than 3 points for the initial plane");
  constexpr int kIterations = 500;
  constexpr double kInlier = 0.05;
  constexpr double kBeyond = 0.15;
  constexpr long kBeyondPenalty = 10;
  const double min_nz = std::cos(max_tilt);

  std::mt19937_64 rng(0x5eedULL);
  std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
  long best_score = std::numeric_limits<long>::min();
  Vec3 best_n = Vec3::UnitZ();
  double best_off = 0.0;
  bool found = false;
  for (int it = 0; it < kIterations; ++it) {
    const Vec3& p0 = pts[pick(rng)];
    const Vec3& p1 = pts[pick(rng)];
    const Vec3& p2 = pts[pick(rng)];
    Vec3 n = (p1 - p0).cross(p2 - p0);
    const double len = n.norm();
    if (len < 1e-9) continue;
    n /= len;
    if (n.z() < 0.0) n = -n;
    if (n.z() < min_nz) continue;
    const double off = n.dot(p0);
    long score = 0;
    for (const Vec3& q : support) {
      const double d = n.dot(q) - off;
      if (std::abs(d) < kInlier) {
        ++score;
      } else if (d > kBeyond) {
        score -= kBeyondPenalty;
      }
    }
    if (score > best_score) {
      best_score = score;
      best_n = n;
      best_off = off;
      found = true;
    }
  }
  if (found) {
    std::vector<bool> use(pts.size());
    std::size_t count = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) count += (use[i] = std::abs(best_n.dot(pts[i]) - best_off) < kInlier);
    if (count >= 3) {
      try {
        return solve_plane(pts, use);
      } catch (const DegenerateFit&) {
      }
    }
  }
  return solve_plane(pts, std::vector<bool>(pts.size(), true));
}

void check_rings(int top_rings, double fraction) {
  if (top_rings < 2) throw ValidationError("K_r must be at least 2");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ValidationError("top_range_fraction must be in (0, 1]");
}

PlaneFit to_plane(const HeightPlane& h) {
  const double norm = std::sqrt(1.0 + h.a * h.a + h.b * h.b);
  PlaneFit f;
  f.normal = Vec3(-h.a, -h.b, 1.0) / norm;
  f.offset = h.c / norm;
  return f;
}

PlaneFit plane_stats(const std::vector<Vec3>& pts, const Vec3& normal, double offset, double band) {
  PlaneFit f;
  f.normal = normal;
  f.offset = offset;
  double sum = 0.0;
  for (const auto& p : pts) {
    const double r = f.signed_distance(p);
    if (std::abs(r) < band) {
      ++f.inlier_count;
      sum += r * r;
    }
  }
  f.rms_residual = f.inlier_count > 0 ? std::sqrt(sum / static_cast<double>(f.inlier_count)) : 0.0;
  return f;
}

void check_side(const std::vector<Vec3>& pts, const PlaneFit& fit, const SegmentationConfig& config) {
  if (fit.inlier_count < config.min_ceiling_inliers) throw DegenerateFit("too few plane inliers");
  if (std::abs(fit.normal.z()) < std::cos(config.max_tilt)) throw DegenerateFit("plane tilt out of range");
  // Rays end at a ceiling; a plane with many returns behind it is a slice through walls.
  // A plane through the top rim of walls also has no layer of its own: the band just
  // inside it holds as many returns as the plane itself.
  const double delta = config.huber_delta;
  std::size_t beyond = 0, layer = 0, inner = 0;
  for (const auto& p : pts) {
    const double d = fit.signed_distance(p);
    if (d > 3.0 * delta) {
      ++beyond;
    } else if (std::abs(d) < delta) {
      ++layer;
    } else if (d < -delta && d >= -3.0 * delta) {
      ++inner;
    }
  }
  if (static_cast<double>(beyond) > config.max_beyond_fraction * static_cast<double>(pts.size())) {
    throw DegenerateFit("fitted plane has returns beyond it");
  }
  if (layer <= inner) throw DegenerateFit("fitted plane is not a layer of returns");
}

PlaneFit fit_ceiling(const LidarScan& scan, const SegmentationConfig& config) {
  const std::vector<Vec3> pts = side_points(scan, false, std::numeric_limits<std::size_t>::max());
  PlaneFit fit = robust_plane_fit(pts, ceiling_init(scan, config.top_rings, config.top_range_fraction, config.max_tilt), config);
  check_side(pts, fit, config);
  return fit;
}

// The floor is taken parallel to the ceiling. In rooms where the floor only shows up
// in a few far corners, a free fit locks onto the bottom of the walls; a 1-D search
// along the ceiling normal with the same penalty for returns beyond the plane does
// not. The free refinement is kept only when it stays close to the constrained plane.
PlaneFit fit_ground(const LidarScan& scan, const SegmentationConfig& config, const PlaneFit& ceiling) {
  const std::vector<Vec3> pts = side_points(scan, true, std::numeric_limits<std::size_t>::max());
  if (pts.size() < 3) throw DegenerateFit("no returns below the horizon");
  const Vec3 m(-ceiling.normal.x(), -ceiling.normal.y(), ceiling.normal.z());
  std::vector<double> h(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) h[i] = m.dot(pts[i]);
  std::sort(h.begin(), h.end());

  // Mirrored, the floor is the farthest dense layer: take the last 10 cm window with
  // enough returns, then a few flat-kernel mean shifts.
  constexpr double kHalf = 0.05;
  const std::size_t need = std::max<std::size_t>(config.min_ceiling_inliers, 3);
  std::optional<double> start;
  std::size_t j = h.size();
  for (std::size_t i = h.size(); i-- > 0 && !start;) {
    j = std::min(j, i + 1);
    while (j > 0 && h[j - 1] > h[i] - 2.0 * kHalf) --j;
    const std::size_t count = i + 1 - j;
    if (count < need) continue;
    // A layer, not the thinning bottom of the walls: denser than the band inside it.
    const auto inner = std::lower_bound(h.begin(), h.end(), h[i] - 4.0 * kHalf);
    if (count > static_cast<std::size_t>((h.begin() + static_cast<std::ptrdiff_t>(j)) - inner)) start = h[i] - kHalf;
  }
  if (!start) throw DegenerateFit("too few returns below the horizon");
  double offset = *start;
  for (int it = 0; it < 10; ++it) {
    const auto b = std::lower_bound(h.begin(), h.end(), offset - kHalf);
    const auto e = std::lower_bound(h.begin(), h.end(), offset + kHalf);
    const double next = std::accumulate(b, e, 0.0) / static_cast<double>(e - b);
    if (std::abs(next - offset) < 1e-4) break;
    offset = next;
  }
  PlaneFit fit = plane_stats(pts, m, offset, 3.0 * config.huber_delta);

  const HeightPlane init{-m.x() / m.z(), -m.y() / m.z(), offset / m.z()};
  try {
    const PlaneFit free = robust_plane_fit(pts, init, config);
    const double tilt = std::acos(std::clamp(free.normal.dot(m), -1.0, 1.0));
    if (tilt < 2.0 * kPi / 180.0 && std::abs(free.offset - offset) < config.huber_delta) fit = free;
  } catch (const DegenerateFit&) {
  }
  check_side(pts, fit, config);
  fit.normal.z() = -fit.normal.z();
  return fit;
}

void classify(const LidarScan& scan, const SegmentationConfig& config, SegmentedScan& out) {
  out.labels.assign(scan.rings.size(), {});
  for (std::size_t r = 0; r < scan.rings.size(); ++r) {
    auto& labels = out.labels[r];
    labels.assign(scan.rings[r].size(), PointClass::kMiss);
    for (std::size_t k = 0; k < scan.rings[r].size(); ++k) {
      const auto& ret = scan.rings[r][k];
      if (!ret.hit()) continue;
      const double dc = std::abs(out.ceiling.signed_distance(ret.point));
      const double dg = out.ground ? std::abs(out.ground->signed_distance(ret.point)) : std::numeric_limits<double>::infinity();
      PointClass c = PointClass::kWall;
      if (dc < config.tau_plane && dc <= dg) {
        c = PointClass::kCeiling;
      } else if (dg < config.tau_plane) {
        c = PointClass::kGround;
      }
      labels[k] = c;
      switch (c) {
        case PointClass::kCeiling: out.ceiling_points.push_back(ret.point); break;
        case PointClass::kGround: out.ground_points.push_back(ret.point); break;
        default: out.wall_points.push_back(ret.point); break;
      }
    }
  }
}

}  // namespace

void SegmentationConfig::validate() const {
  check_rings(top_rings, top_range_fraction);
  if (!(huber_delta > 0.0)) throw ValidationError("huber_delta_m must be positive");
  if (!(tau_plane > 0.0)) throw ValidationError("tau_plane_m must be positive");
  if (max_iterations < 1) throw ValidationError("max_iterations must be positive");
  if (!(max_tilt > 0.0 && max_tilt < kPi / 2.0)) throw ValidationError("max_tilt must be in (0, 90) degrees");
}

HeightPlane ceiling_init(const LidarScan& scan, int top_rings, double top_range_fraction, double max_tilt) {
  check_rings(top_rings, top_range_fraction);
  const int n = static_cast<int>(scan.rings.size());
  return least_squares_plane(longest_returns(scan, n - top_rings, n, top_range_fraction, false),
                             side_points(scan, false, kSupportPoints), max_tilt);
}

HeightPlane ground_init(const LidarScan& scan, int top_rings, double top_range_fraction, double max_tilt) {
  check_rings(top_rings, top_range_fraction);
  return least_squares_plane(longest_returns(scan, 0, top_rings, top_range_fraction, true),
                             side_points(scan, true, kSupportPoints), max_tilt);
}

PlaneFit robust_plane_fit(const std::vector<Vec3>& points, const HeightPlane& init, const SegmentationConfig& config) {
  if (points.size() < 3) throw DegenerateFit("plane fit needs at least 3 points");
  const double delta = config.huber_delta;
  const double max_gate = 3.0 * delta;
  HeightPlane h = init;
  std::vector<double> res(points.size());
  std::vector<double> near;

  std::vector<double> side(points.size());
  // The inner side gets half the gate: cutting Gaussian noise at -2 and +4 sigma
  // shifts the plane by about 0.05 sigma, much less than the wall tops would.
  auto solve = [&](double gate, HeightPlane& next) {
    Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
    Vec3 atb = Vec3::Zero();
    for (std::size_t i = 0; i < points.size(); ++i) {
      const double r = res[i];
      if (r >= (side[i] > 0.0 ? gate : 0.5 * gate)) continue;
      const double w = r <= delta ? 1.0 : delta / r;
      const Vec3& p = points[i];
      const Vec3 row(p.x(), p.y(), 1.0);
      ata += w * row * row.transpose();
      atb += w * row * p.z();
    }
    Eigen::FullPivLU<Eigen::Matrix3d> lu(ata);
    if (lu.rank() < 3) return false;
    const Vec3 x = lu.solve(atb);
    next = {x[0], x[1], x[2]};
    return true;
  };

  std::vector<double> outer;
  for (int it = 0; it < config.max_iterations; ++it) {
    const double norm = std::sqrt(1.0 + h.a * h.a + h.b * h.b);
    near.clear();
    outer.clear();
    for (std::size_t i = 0; i < points.size(); ++i) {
      const Vec3& p = points[i];
      const double s = (p.z() - h.a * p.x() - h.b * p.y() - h.c) / norm;
      res[i] = std::abs(s);
      side[i] = s;
      if (res[i] < max_gate) {
        near.push_back(res[i]);
        if (s > 0.0) outer.push_back(s);
      }
    }
    // Rejection gate: 4 robust sigmas, within [delta / 2, 3 delta]. Returns cannot lie
    // behind the plane, so the scale comes from that side when it has support; the
    // inner side also holds wall tops and fixtures, which inflate the scale and drag
    // the plane towards the sensor.
    auto& scale_src = outer.size() >= 10 ? outer : near;
    double gate = max_gate;
    if (scale_src.size() >= 3) {
      std::nth_element(scale_src.begin(), scale_src.begin() + scale_src.size() / 2, scale_src.end());
      gate = std::clamp(4.0 * 1.4826 * scale_src[scale_src.size() / 2], 0.5 * delta, max_gate);
    }
    HeightPlane next;
    // Without enough support near the plane, fall back to ungated Huber weights.
    if (!solve(gate, next) && !solve(std::numeric_limits<double>::infinity(), next)) {
      throw DegenerateFit("rank-deficient weighted plane system");
    }
    const double change = std::abs(next.a - h.a) + std::abs(next.b - h.b) + std::abs(next.c - h.c);
    h = next;
    if (change < 1e-6) break;
  }

  PlaneFit fit = to_plane(h);
  double sum_in = 0.0, sum_all = 0.0;
  for (const auto& p : points) {
    const double r = fit.signed_distance(p);
    sum_all += r * r;
    if (std::abs(r) < max_gate) {
      ++fit.inlier_count;
      sum_in += r * r;
    }
  }
  fit.rms_residual = fit.inlier_count > 0 ? std::sqrt(sum_in / static_cast<double>(fit.inlier_count))
                                          : std::sqrt(sum_all / static_cast<double>(points.size()));
  return fit;
}

VerticalState vertical_state_from_ceiling(const PlaneFit& ceiling, std::optional<double> ceiling_z) {
  const Vec3& n = ceiling.normal;
  VerticalState v;
  v.roll = std::atan2(n.y(), n.z());
  v.pitch = std::atan2(-n.x(), std::hypot(n.y(), n.z()));
  v.gravity = -n;
  v.t_z = ceiling_z ? *ceiling_z - ceiling.offset : -ceiling.offset;
  return v;
}

SegmentedScan segment_scan(const LidarScan& scan, const SegmentationConfig& config) {
  config.validate();
  if (scan.rings.empty() || scan.return_count() == 0) throw DegenerateFit("scan has no returns");
  if (scan.ring_elevation.size() != scan.rings.size()) throw ValidationError("ring elevation count mismatch");
  SegmentedScan out;
  out.ceiling = fit_ceiling(scan, config);
  out.vertical_state = vertical_state_from_ceiling(out.ceiling, config.ceiling_z);
  try {
    out.ground = fit_ground(scan, config, out.ceiling);
  } catch (const DegenerateFit&) {
    out.ground.reset();
  }
  classify(scan, config, out);
  return out;
}

SegmentedScan segment_scan(const LidarScan& scan, const SegmentationConfig& config, const SegmentedScan* previous) {
  try {
    return segment_scan(scan, config);
  } catch (const DegenerateFit&) {
    if (previous == nullptr) throw;
  }
  SegmentedScan out;
  out.ceiling = previous->ceiling;
  out.ground = previous->ground;
  out.vertical_state = previous->vertical_state;
  out.stale = true;
  classify(scan, config, out);
  return out;
}

}  // namespace fploc
