#include "fploc/io.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace fploc {
namespace {

namespace fs = std::filesystem;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view strip(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view s, int line) {
  s = strip(s);
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw FormatError("line " + std::to_string(line) + ": bad number `" + std::string(s) + "`");
  }
  return v;
}

template <class Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  int lineno = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++lineno;
    const std::string_view line = strip(text.substr(start, end - start));
    if (!line.empty()) fn(line, lineno);
    start = end + 1;
  }
}

std::string svg_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "NaN";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::string format_scan_csv(const LidarScan& scan) {
  std::string out = "ring,azimuth_rad,range_m,x,y,z\n";
  for (std::size_t r = 0; r < scan.rings.size(); ++r) {
    const std::string ring = std::to_string(r);
    for (const auto& ret : scan.rings[r]) {
      out += ring;
      out += ',' + format_double(ret.azimuth);
      if (ret.hit()) {
        out += ',' + format_double(ret.range) + ',' + format_double(ret.point.x()) + ',' +
               format_double(ret.point.y()) + ',' + format_double(ret.point.z());
      } else {
        out += ",NaN,NaN,NaN,NaN";
      }
      out += '\n';
    }
  }
  return out;
}

LidarScan parse_scan_csv(std::string_view text, double timestamp) {
  LidarScan scan;
  scan.timestamp = timestamp;
  bool header = false;
  for_each_line(text, [&](std::string_view line, int lineno) {
    if (!header) {
      if (line != "ring,azimuth_rad,range_m,x,y,z") throw FormatError("scan CSV: unexpected header");
      header = true;
      return;
    }
    const auto f = split(line, ',');
    if (f.size() != 6) throw FormatError("scan CSV line " + std::to_string(lineno) + ": expected 6 fields");
    const double ring_d = parse_number(f[0], lineno);
    if (!(ring_d >= 0.0) || ring_d != std::floor(ring_d) || ring_d > 4096) {
      throw FormatError("scan CSV line " + std::to_string(lineno) + ": bad ring index");
    }
    const auto ring = static_cast<std::size_t>(ring_d);
    if (ring >= scan.rings.size()) scan.rings.resize(ring + 1);
    RayReturn ret;
    ret.azimuth = parse_number(f[1], lineno);
    const double range = parse_number(f[2], lineno);
    if (std::isfinite(range)) {
      if (!(range > 0.0)) throw FormatError("scan CSV line " + std::to_string(lineno) + ": non-positive range");
      ret.range = range;
      ret.point = Vec3(parse_number(f[3], lineno), parse_number(f[4], lineno), parse_number(f[5], lineno));
      if (!ret.point.allFinite()) throw FormatError("scan CSV line " + std::to_string(lineno) + ": hit without point");
    }
    scan.rings[ring].push_back(ret);
  });
  if (!header) throw FormatError("scan CSV: empty file");
  if (scan.rings.size() < 2) throw FormatError("scan CSV: need at least 2 rings");
  const std::size_t width = scan.rings[0].size();
  std::vector<double> elevation(scan.rings.size(), kNaN);
  for (std::size_t r = 0; r < scan.rings.size(); ++r) {
    if (scan.rings[r].size() != width || width == 0) throw FormatError("scan CSV: rings differ in length");
    double sum = 0.0;
    int n = 0;
    for (const auto& ret : scan.rings[r]) {
      if (!ret.hit()) continue;
      sum += std::atan2(ret.point.z(), ret.point.head<2>().norm());
      ++n;
    }
    if (n > 0) elevation[r] = sum / n;
  }
  // Interpolate (or extrapolate linearly) rings without hits.
  std::vector<std::size_t> known;
  for (std::size_t r = 0; r < elevation.size(); ++r) {
    if (std::isfinite(elevation[r])) known.push_back(r);
  }
  if (known.size() < 2) throw FormatError("scan CSV: too few rings with returns to recover elevations");
  for (std::size_t r = 0; r < elevation.size(); ++r) {
    if (std::isfinite(elevation[r])) continue;
    std::size_t a = known[0], b = known[1];
    for (std::size_t k = 1; k < known.size(); ++k) {
      a = known[k - 1];
      b = known[k];
      if (known[k] > r) break;
    }
    elevation[r] = elevation[a] + (elevation[b] - elevation[a]) * (double(r) - double(a)) / (double(b) - double(a));
  }
  scan.ring_elevation = std::move(elevation);
  return scan;
}

std::string format_manifest(const std::vector<ManifestEntry>& entries) {
  std::string out = "timestamp_s,scan_file,gt_tx,gt_ty,gt_tz,gt_roll,gt_pitch,gt_yaw\n";
  for (const auto& e : entries) {
    const Pose6& p = e.truth;
    out += format_double(e.timestamp) + ',' + e.scan_file + ',' + format_double(p.x) + ',' + format_double(p.y) +
           ',' + format_double(p.z) + ',' + format_double(p.roll) + ',' + format_double(p.pitch) + ',' +
           format_double(p.yaw) + '\n';
  }
  return out;
}

std::vector<ManifestEntry> parse_manifest(std::string_view text) {
  std::vector<ManifestEntry> out;
  bool header = false;
  for_each_line(text, [&](std::string_view line, int lineno) {
    if (!header) {
      if (line != "timestamp_s,scan_file,gt_tx,gt_ty,gt_tz,gt_roll,gt_pitch,gt_yaw") {
        throw FormatError("manifest: unexpected header");
      }
      header = true;
      return;
    }
    const auto f = split(line, ',');
    if (f.size() != 8) throw FormatError("manifest line " + std::to_string(lineno) + ": expected 8 fields");
    ManifestEntry e;
    e.timestamp = parse_number(f[0], lineno);
    e.scan_file = std::string(strip(f[1]));
    if (e.scan_file.empty()) throw FormatError("manifest line " + std::to_string(lineno) + ": empty scan file");
    double v[6];
    for (int k = 0; k < 6; ++k) v[k] = parse_number(f[2 + k], lineno);
    e.truth = {v[0], v[1], v[2], v[3], v[4], v[5]};
    if (!out.empty() && !(e.timestamp > out.back().timestamp)) {
      throw FormatError("manifest line " + std::to_string(lineno) + ": timestamps must increase");
    }
    out.push_back(std::move(e));
  });
  if (!header) throw FormatError("manifest: empty file");
  return out;
}

std::string Sequence::scan_path(std::size_t i) const {
  const fs::path p(entries.at(i).scan_file);
  return p.is_absolute() ? p.string() : (fs::path(directory) / p).string();
}

LidarScan Sequence::load_scan(std::size_t i) const {
  return parse_scan_csv(read_file(scan_path(i)), entries.at(i).timestamp);
}

Trajectory Sequence::ground_truth() const {
  Trajectory t;
  t.reserve(entries.size());
  for (const auto& e : entries) t.push_back({e.timestamp, e.truth});
  return t;
}

Sequence load_sequence(const std::string& manifest_path) {
  Sequence s;
  s.directory = fs::path(manifest_path).parent_path().string();
  s.entries = parse_manifest(read_file(manifest_path));
  return s;
}

std::vector<Waypoint> parse_waypoints(std::string_view text) {
  std::vector<Waypoint> out;
  for_each_line(text, [&](std::string_view line, int lineno) {
    if (line.front() == '#') return;
    std::istringstream ls{std::string(line)};
    double x, y, yaw;
    if (!(ls >> x >> y >> yaw)) throw ParseError(lineno, "expected `x y yaw`");
    std::string extra;
    if (ls >> extra) throw ParseError(lineno, "trailing field `" + extra + "`");
    out.push_back({Vec2(x, y), yaw});
  });
  if (out.empty()) throw ValidationError("no waypoints");
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string plot_svg(const FloorPlan& plan, const std::vector<PlotSeries>& series) {
  static const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  Bounds b = plan.bounds();
  for (const auto& s : series) {
    for (const auto& p : s.trajectory) b.extend(Vec2(p.pose.x, p.pose.y));
  }
  const double scale = 40.0;  // px per m
  const double margin = 20.0;
  const double legend = 20.0 + 18.0 * static_cast<double>(series.size());
  const double width = b.width() * scale + 2 * margin;
  const double height = b.height() * scale + 2 * margin + legend;
  auto X = [&](double x) { return svg_number(margin + (x - b.min.x()) * scale); };
  auto Y = [&](double y) { return svg_number(margin + (b.max.y() - y) * scale); };

  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + svg_number(width) + "\" height=\"" +
                    svg_number(height) + "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n<g id=\"plan\" "
                    "stroke=\"#555555\" stroke-width=\"2\" fill=\"none\">\n";
  for (const auto& e : plan.elements()) {
    if (const auto* s = std::get_if<Segment>(&e)) {
      out += "<line x1=\"" + X(s->p1.x()) + "\" y1=\"" + Y(s->p1.y()) + "\" x2=\"" + X(s->p2.x()) + "\" y2=\"" +
             Y(s->p2.y()) + "\"/>\n";
    } else if (const auto* c = std::get_if<Circle>(&e)) {
      out += "<circle cx=\"" + X(c->center.x()) + "\" cy=\"" + Y(c->center.y()) + "\" r=\"" +
             svg_number(c->radius * scale) + "\"/>\n";
    } else {
      const auto& a = std::get<Arc>(e);
      const Vec2 p0 = a.point_at(a.theta_start), p1 = a.point_at(a.theta_end);
      const std::string r = svg_number(a.radius * scale);
      // y is flipped, so counter-clockwise in the plan is sweep-flag 0 on screen.
      out += "<path d=\"M " + X(p0.x()) + ' ' + Y(p0.y()) + " A " + r + ' ' + r + " 0 " +
             (a.sweep() > kPi ? "1" : "0") + " 0 " + X(p1.x()) + ' ' + Y(p1.y()) + "\"/>\n";
    }
  }
  out += "</g>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kPalette[i % std::size(kPalette)];
    out += "<polyline class=\"trajectory\" fill=\"none\" stroke-width=\"1.5\" stroke=\"" + std::string(color) +
           "\" points=\"";
    for (std::size_t k = 0; k < series[i].trajectory.size(); ++k) {
      const auto& p = series[i].trajectory[k].pose;
      if (k) out += ' ';
      out += X(p.x) + ',' + Y(p.y);
    }
    out += "\"/>\n";
  }
  out += "<g id=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n";
  const double top = height - legend + 8.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double y = top + 18.0 * static_cast<double>(i);
    out += "<rect x=\"" + svg_number(margin) + "\" y=\"" + svg_number(y) + "\" width=\"14\" height=\"4\" fill=\"" +
           kPalette[i % std::size(kPalette)] + "\"/>\n<text x=\"" + svg_number(margin + 20) + "\" y=\"" +
           svg_number(y + 6) + "\">" + series[i].label + "</text>\n";
  }
  out += "</g>\n</svg>\n";
  return out;
}

std::string plot_csv(const std::vector<PlotSeries>& series) {
  std::string out = "label,timestamp,x,y\n";
  for (const auto& s : series) {
    for (const auto& p : s.trajectory) {
      out += s.label + ',' + format_double(p.timestamp) + ',' + format_double(p.pose.x) + ',' +
             format_double(p.pose.y) + '\n';
    }
  }
  return out;
}

}  // namespace fploc
