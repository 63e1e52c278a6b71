#include "fploc/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <tuple>

namespace fploc {
namespace {

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

Eigen::Isometry3d relative(const TimedPose& a, const TimedPose& b) {
  return a.pose.isometry().inverse() * b.pose.isometry();
}

Eigen::Isometry3d rpe_error(const std::vector<PosePair>& pairs, std::size_t i, int delta) {
  const Eigen::Isometry3d dr = relative(pairs[i].ref, pairs[i + delta].ref);
  const Eigen::Isometry3d de = relative(pairs[i].est, pairs[i + delta].est);
  return dr.inverse() * de;
}

void check_rpe(const std::vector<PosePair>& pairs, int delta) {
  if (delta < 1) throw ValidationError("RPE delta must be at least 1");
  if (pairs.size() < static_cast<std::size_t>(delta) + 1) throw ValidationError("too few pairs for RPE");
}

}  // namespace

void check_trajectory(const Trajectory& t) {
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (!(t[i].timestamp > t[i - 1].timestamp)) throw ValidationError("trajectory timestamps must be strictly increasing");
  }
}

std::vector<PosePair> associate(const Trajectory& est, const Trajectory& ref, double max_dt) {
  if (est.empty() || ref.empty()) throw ValidationError("association needs two non-empty trajectories");
  if (!(max_dt >= 0.0)) throw ValidationError("max_dt must be non-negative");
  check_trajectory(est);
  check_trajectory(ref);
  // Candidate edges within max_dt, smallest |dt| first.
  std::vector<std::tuple<double, std::size_t, std::size_t>> edges;
  std::size_t lo = 0;
  for (std::size_t j = 0; j < ref.size(); ++j) {
    const double t = ref[j].timestamp;
    while (lo < est.size() && est[lo].timestamp < t - max_dt) ++lo;
    for (std::size_t i = lo; i < est.size() && est[i].timestamp <= t + max_dt; ++i) {
      edges.emplace_back(std::abs(est[i].timestamp - t), j, i);
    }
  }
  std::sort(edges.begin(), edges.end());
  std::vector<char> used_est(est.size(), 0), used_ref(ref.size(), 0);
  std::vector<std::pair<std::size_t, std::size_t>> chosen;
  for (const auto& [dt, j, i] : edges) {
    if (used_est[i] || used_ref[j]) continue;
    used_est[i] = used_ref[j] = 1;
    chosen.emplace_back(j, i);
  }
  if (chosen.empty()) throw ValidationError("no timestamps associate within max_dt");
  std::sort(chosen.begin(), chosen.end());
  std::vector<PosePair> out;
  out.reserve(chosen.size());
  for (const auto& [j, i] : chosen) out.push_back({est[i], ref[j]});
  return out;
}

double ate_cm(const std::vector<PosePair>& pairs) {
  if (pairs.empty()) throw ValidationError("ATE needs at least one pair");
  double sum = 0.0;
  for (const auto& p : pairs) sum += (p.est.pose.translation() - p.ref.pose.translation()).norm();
  return 100.0 * sum / static_cast<double>(pairs.size());
}

double rpe_cm(const std::vector<PosePair>& pairs, int delta) {
  check_rpe(pairs, delta);
  const std::size_t n = pairs.size() - delta;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += rpe_error(pairs, i, delta).translation().norm();
  return 100.0 * sum / static_cast<double>(n);
}

double rpe_deg(const std::vector<PosePair>& pairs, int delta) {
  check_rpe(pairs, delta);
  const std::size_t n = pairs.size() - delta;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += Eigen::AngleAxisd(rpe_error(pairs, i, delta).rotation()).angle();
  return sum / static_cast<double>(n) * 180.0 / kPi;
}

std::string format_trajectory(const Trajectory& t) {
  std::string out;
  for (const auto& s : t) {
    const Eigen::Quaterniond q = s.pose.quaternion();
    out += fmt(s.timestamp) + ' ' + fmt(s.pose.x) + ' ' + fmt(s.pose.y) + ' ' + fmt(s.pose.z) + ' ' + fmt(q.x()) +
           ' ' + fmt(q.y()) + ' ' + fmt(q.z()) + ' ' + fmt(q.w()) + '\n';
  }
  return out;
}

Trajectory parse_trajectory(std::string_view text) {
  Trajectory out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    double v[8];
    for (double& x : v) {
      if (!(ls >> x)) throw ParseError(lineno, "expected `timestamp tx ty tz qx qy qz qw`");
    }
    std::string extra;
    if (ls >> extra) throw ParseError(lineno, "trailing field `" + extra + "`");
    Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
    if (!(q.norm() > 1e-9)) throw ParseError(lineno, "zero quaternion");
    q.normalize();
    out.push_back({v[0], Pose6::from_rotation(Vec3(v[1], v[2], v[3]), q.toRotationMatrix())});
  }
  check_trajectory(out);
  return out;
}

Trajectory load_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_trajectory(ss.str());
}

void save_trajectory(const std::string& path, const Trajectory& t) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << format_trajectory(t);
}

std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::string out = "metric,value_cm,pairs\n";
  for (const auto& r : rows) out += r.metric + ',' + fmt(r.value) + ',' + std::to_string(r.pairs) + '\n';
  return out;
}

}  // namespace fploc
