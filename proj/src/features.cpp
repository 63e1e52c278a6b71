#include "fploc/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace fploc {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

void FeatureConfig::validate() const {
  if (window < 2) throw ValidationError("smoothness window must be at least 2");
  if (sectors < 1 || n_corner < 0 || n_surface < 0) throw ValidationError("invalid sector counts");
  if (!(merge_eps > 0.0)) throw ValidationError("merge_eps must be positive");
  if (!(rho > 0.0)) throw ValidationError("rho must be positive");
  if (min_run < 2) throw ValidationError("min_run must be at least 2");
}

std::size_t FeatureSet::count(FeatureKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(points.begin(), points.end(), [&](const FeaturePoint& p) { return p.kind == kind; }));
}

int FeatureSet::group_count() const {
  int n = 0;
  for (const auto& p : points) n = std::max(n, p.group + 1);
  return n;
}

std::vector<double> compute_smoothness(const std::vector<Vec3>& points, int window, double range_jump) {
  std::vector<int> index(points.size());
  for (std::size_t i = 0; i < index.size(); ++i) index[i] = static_cast<int>(i);
  return compute_smoothness(points, index, window, range_jump);
}

std::vector<double> compute_smoothness(const std::vector<Vec3>& points, const std::vector<int>& index, int window,
                                       double range_jump) {
  if (window < 2) throw ValidationError("smoothness window must be at least 2");
  if (index.size() != points.size()) throw ValidationError("index and point counts differ");
  const int n = static_cast<int>(points.size());
  std::vector<double> c(n, kNaN);
  std::vector<double> range(n);
  for (int i = 0; i < n; ++i) range[i] = points[i].norm();
  // jump[i]: discontinuity between i and i + 1.
  std::vector<char> jump(n, 0);
  for (int i = 0; i + 1 < n; ++i) {
    jump[i] = index[i + 1] != index[i] + 1 ||
              std::abs(range[i + 1] - range[i]) > range_jump * std::min(range[i], range[i + 1]);
  }
  for (int i = window; i + window < n; ++i) {
    if (std::any_of(jump.begin() + (i - window), jump.begin() + (i + window), [](char j) { return j != 0; })) continue;
    if (range[i] <= 0.0) continue;
    Vec3 sum = Vec3::Zero();
    for (int j = i - window; j <= i + window; ++j) sum += points[j];
    sum -= (2 * window + 1) * points[i];
    c[i] = sum.norm() / (2.0 * window * range[i]);
  }
  return c;
}

std::vector<RingPoints> wall_rings(const LidarScan& scan, const SegmentedScan& seg) {
  std::vector<RingPoints> out;
  for (std::size_t r = 0; r < scan.rings.size(); ++r) {
    RingPoints rp;
    rp.ring = static_cast<int>(r);
    for (std::size_t k = 0; k < scan.rings[r].size(); ++k) {
      if (seg.labels[r][k] != PointClass::kWall) continue;
      rp.points.push_back(scan.rings[r][k].point);
      rp.index.push_back(static_cast<int>(k));
    }
    if (!rp.points.empty()) out.push_back(std::move(rp));
  }
  return out;
}

std::vector<Feature3> extract_features(const std::vector<RingPoints>& rings, int azimuth_steps,
                                       const FeatureConfig& config) {
  config.validate();
  if (azimuth_steps < 1) throw ValidationError("azimuth_steps must be positive");
  std::vector<Feature3> out;
  for (const auto& ring : rings) {
    const auto c = compute_smoothness(ring.points, ring.index, config.window, config.range_jump);
    const int n = static_cast<int>(ring.points.size());
    std::vector<int> corners;  // azimuth steps of picked corners in this ring
    auto near_corner = [&](int idx) {
      return std::any_of(corners.begin(), corners.end(),
                         [&](int k) { return std::abs(k - idx) <= config.min_corner_separation; });
    };
    // Points of each sector, by position in the ring arrays.
    std::vector<std::vector<int>> sector(config.sectors);
    for (int i = 0; i < n; ++i) {
      if (std::isnan(c[i])) continue;
      const int s = static_cast<int>(static_cast<long long>(ring.index[i]) * config.sectors / azimuth_steps);
      sector[std::clamp(s, 0, config.sectors - 1)].push_back(i);
    }
    std::vector<char> is_corner(n, 0);
    for (auto& members : sector) {
      std::vector<int> cand;
      for (int i : members) {
        if (c[i] > config.c_corner) cand.push_back(i);
      }
      std::stable_sort(cand.begin(), cand.end(), [&](int a, int b) { return c[a] > c[b]; });
      int picked = 0;
      for (int i : cand) {
        if (picked >= config.n_corner) break;
        if (near_corner(ring.index[i])) continue;
        corners.push_back(ring.index[i]);
        is_corner[i] = 1;
        out.push_back({ring.points[i], FeatureKind::kCorner, ring.ring, ring.index[i], c[i]});
        ++picked;
      }
    }
    for (auto& members : sector) {
      std::vector<int> cand;
      for (int i : members) {
        if (!is_corner[i] && c[i] < config.c_surface && !near_corner(ring.index[i])) cand.push_back(i);
      }
      const int m = static_cast<int>(cand.size());
      const int take = std::min(m, config.n_surface);
      for (int k = 0; k < take; ++k) {
        // Evenly spaced through the candidates.
        const int i = cand[static_cast<int>((k + 0.5) * m / take)];
        out.push_back({ring.points[i], FeatureKind::kSurface, ring.ring, ring.index[i], c[i]});
      }
    }
  }
  // Ring-major, azimuth order.
  std::stable_sort(out.begin(), out.end(), [](const Feature3& a, const Feature3& b) {
    return a.ring != b.ring ? a.ring < b.ring : a.index < b.index;
  });
  return out;
}

FeatureSet project_features(const std::vector<Feature3>& features, const VerticalState& vs,
                            const FeatureConfig& config, bool merge) {
  const Eigen::Matrix3d level = leveling_rotation(vs.roll, vs.pitch);
  FeatureSet set;
  set.points.reserve(features.size());
  for (const auto& f : features) {
    FeaturePoint p;
    p.position = (level * f.point).head<2>();
    p.kind = f.kind;
    p.ring = f.ring;
    p.index = f.index;
    set.points.push_back(p);
  }
  if (merge) merge_duplicates(set, config.merge_eps);
  return set;
}

void merge_duplicates(FeatureSet& set, double eps) {
  if (!(eps > 0.0)) throw ValidationError("merge eps must be positive");
  struct Cell {
    Vec2 sum = Vec2::Zero();
    int count = 0;
    FeaturePoint first;
    bool corner = false;
    int group = kUngrouped;
  };
  std::map<std::pair<long long, long long>, std::size_t> lookup;
  std::vector<Cell> cells;
  for (const auto& p : set.points) {
    const auto key = std::make_pair(static_cast<long long>(std::floor(p.position.x() / eps)),
                                    static_cast<long long>(std::floor(p.position.y() / eps)));
    auto [it, fresh] = lookup.emplace(key, cells.size());
    if (fresh) {
      cells.push_back({});
      cells.back().first = p;
    }
    Cell& cell = cells[it->second];
    cell.sum += p.position;
    ++cell.count;
    cell.corner = cell.corner || p.kind == FeatureKind::kCorner;
    if (cell.group == kUngrouped) cell.group = p.group;
  }
  std::map<int, int> renumber;
  std::vector<FeaturePoint> out;
  out.reserve(cells.size());
  for (const auto& cell : cells) {
    FeaturePoint p = cell.first;
    p.position = cell.sum / cell.count;
    p.kind = cell.corner ? FeatureKind::kCorner : FeatureKind::kSurface;
    p.group = kUngrouped;
    if (!cell.corner && cell.group != kUngrouped) {
      auto [it, fresh] = renumber.emplace(cell.group, static_cast<int>(renumber.size()));
      p.group = it->second;
    }
    out.push_back(p);
  }
  set.points = std::move(out);
}

void group_surface_points(FeatureSet& set, const FeatureConfig& config) {
  for (auto& p : set.points) p.group = kUngrouped;
  std::map<int, std::vector<std::size_t>> by_ring;
  for (std::size_t i = 0; i < set.points.size(); ++i) by_ring[set.points[i].ring].push_back(i);

  int next = 0;
  std::vector<std::size_t> run;
  auto flush = [&] {
    if (static_cast<int>(run.size()) >= config.min_run) {
      Vec2 mean = Vec2::Zero();
      for (auto i : run) mean += set.points[i].position;
      mean /= static_cast<double>(run.size());
      Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
      for (auto i : run) {
        const Vec2 d = set.points[i].position - mean;
        cov += d * d.transpose();
      }
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
      const double major = es.eigenvalues()[1], minor = std::max(0.0, es.eigenvalues()[0]);
      if (major > 0.0 && std::sqrt(minor / major) < config.rho) {
        for (auto i : run) set.points[i].group = next;
        ++next;
      }
    }
    run.clear();
  };
  for (auto& [ring, members] : by_ring) {
    std::stable_sort(members.begin(), members.end(),
                     [&](std::size_t a, std::size_t b) { return set.points[a].index < set.points[b].index; });
    for (auto i : members) {
      if (set.points[i].kind == FeatureKind::kCorner) {
        flush();
      } else {
        run.push_back(i);
      }
    }
    flush();
  }
}

FeatureSet frame_features(const LidarScan& scan, const SegmentedScan& seg, const FeatureConfig& config) {
  const int steps = scan.rings.empty() ? 1 : static_cast<int>(scan.rings.front().size());
  const auto f3 = extract_features(wall_rings(scan, seg), std::max(steps, 1), config);
  FeatureSet set = project_features(f3, seg.vertical_state, config, false);
  group_surface_points(set, config);
  merge_duplicates(set, config.merge_eps);
  set.timestamp = scan.timestamp;
  return set;
}

std::string features_csv(const FeatureSet& set) {
  std::ostringstream os;
  os.precision(9);
  os << "x,y,kind,group,ring\n";
  for (const auto& p : set.points) {
    os << p.position.x() << ',' << p.position.y() << ',' << (p.kind == FeatureKind::kCorner ? "corner" : "surface")
       << ',' << p.group << ',' << p.ring << '\n';
  }
  return os.str();
}

}  // namespace fploc
