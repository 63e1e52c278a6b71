#include "fploc/config.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace fploc {
namespace {

namespace fs = std::filesystem;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& v) {
  double out = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ValidationError("expected a number, got `" + v + "`");
  }
  return out;
}

long long to_int(const std::string& v) {
  long long out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) throw ValidationError("expected an integer, got `" + v + "`");
  return out;
}

int to_int32(const std::string& v) {
  const long long x = to_int(v);
  if (x < INT32_MIN || x > INT32_MAX) throw ValidationError("integer out of range: " + v);
  return static_cast<int>(x);
}

std::size_t to_count(const std::string& v) {
  const long long x = to_int(v);
  if (x < 0) throw ValidationError("expected a non-negative integer, got `" + v + "`");
  return static_cast<std::size_t>(x);
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ValidationError("expected a boolean, got `" + v + "`");
}

double deg(const std::string& v) { return to_double(v) * kPi / 180.0; }

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      // segmentation
      {"K_r", [](RunConfig& c, const std::string& v) { c.segmentation.top_rings = to_int32(v); }},
      {"top_range_fraction", [](RunConfig& c, const std::string& v) { c.segmentation.top_range_fraction = to_double(v); }},
      {"huber_delta_m", [](RunConfig& c, const std::string& v) { c.segmentation.huber_delta = to_double(v); }},
      {"tau_plane_m", [](RunConfig& c, const std::string& v) { c.segmentation.tau_plane = to_double(v); }},
      {"max_tilt_deg", [](RunConfig& c, const std::string& v) { c.segmentation.max_tilt = deg(v); }},
      {"ceiling_z_m", [](RunConfig& c, const std::string& v) { c.segmentation.ceiling_z = to_double(v); }},
      // features
      {"c_corner", [](RunConfig& c, const std::string& v) { c.features.c_corner = to_double(v); }},
      {"c_surf", [](RunConfig& c, const std::string& v) { c.features.c_surface = to_double(v); }},
      {"smoothness_neighbors", [](RunConfig& c, const std::string& v) { c.features.window = to_int32(v); }},
      {"sectors", [](RunConfig& c, const std::string& v) { c.features.sectors = to_int32(v); }},
      {"n_corner", [](RunConfig& c, const std::string& v) { c.features.n_corner = to_int32(v); }},
      {"n_surf", [](RunConfig& c, const std::string& v) { c.features.n_surface = to_int32(v); }},
      {"min_sep", [](RunConfig& c, const std::string& v) { c.features.min_corner_separation = to_int32(v); }},
      {"merge_eps_m", [](RunConfig& c, const std::string& v) { c.features.merge_eps = to_double(v); }},
      {"rho", [](RunConfig& c, const std::string& v) { c.features.rho = to_double(v); }},
      {"min_run", [](RunConfig& c, const std::string& v) { c.features.min_run = to_int32(v); }},
      // registration
      {"tau_key_m", [](RunConfig& c, const std::string& v) { c.registration.tau_key = to_double(v); }},
      {"alpha", [](RunConfig& c, const std::string& v) { c.registration.alpha = to_double(v); }},
      {"beta", [](RunConfig& c, const std::string& v) { c.registration.beta = to_double(v); }},
      {"window_W", [](RunConfig& c, const std::string& v) { c.registration.window = to_int32(v); }},
      {"huber_reg_m", [](RunConfig& c, const std::string& v) { c.registration.huber = to_double(v); }},
      {"min_features", [](RunConfig& c, const std::string& v) { c.registration.min_features = to_count(v); }},
      {"max_iterations", [](RunConfig& c, const std::string& v) { c.registration.max_iterations = to_int32(v); }},
      {"window_iterations", [](RunConfig& c, const std::string& v) { c.registration.window_iterations = to_int32(v); }},
      {"max_failures", [](RunConfig& c, const std::string& v) { c.registration.max_failures = to_int32(v); }},
      {"windowed", [](RunConfig& c, const std::string& v) { c.windowed = to_bool(v); }},
      {"seed",
       [](RunConfig& c, const std::string& v) {
         unsigned long long s = 0;
         const auto r = std::from_chars(v.data(), v.data() + v.size(), s);
         if (r.ec != std::errc() || r.ptr != v.data() + v.size()) throw ValidationError("bad seed `" + v + "`");
         c.seed = s;
       }},
      // paths
      {"plan", [](RunConfig& c, const std::string& v) { c.plan = v; }},
      {"annf", [](RunConfig& c, const std::string& v) { c.annf = v; }},
      {"manifest", [](RunConfig& c, const std::string& v) { c.manifest = v; }},
      {"waypoints", [](RunConfig& c, const std::string& v) { c.waypoints = v; }},
      // annf
      {"root_length_m", [](RunConfig& c, const std::string& v) { c.root_length = to_double(v); }},
      {"max_depth", [](RunConfig& c, const std::string& v) { c.max_depth = to_int32(v); }},
      // simulation
      {"rings",
       [](RunConfig& c, const std::string& v) {
         const int n = to_int32(v);
         if (n < 2) throw ValidationError("rings must be at least 2");
         const double fov = (c.sensor.elevation_angles.back() - c.sensor.elevation_angles.front()) * 180.0 / kPi;
         c.sensor = SensorModel::uniform(n, fov, c.sensor.azimuth_steps);
       }},
      {"vertical_fov_deg",
       [](RunConfig& c, const std::string& v) {
         c.sensor = SensorModel::uniform(c.sensor.n_rings(), to_double(v), c.sensor.azimuth_steps);
       }},
      {"azimuth_steps", [](RunConfig& c, const std::string& v) { c.sensor.azimuth_steps = to_int32(v); }},
      {"max_range_m", [](RunConfig& c, const std::string& v) { c.sensor.max_range = to_double(v); }},
      {"noise_sigma_m", [](RunConfig& c, const std::string& v) { c.sensor.range_noise_sigma = to_double(v); }},
      {"scan_rate_hz", [](RunConfig& c, const std::string& v) { c.sensor.scan_rate = to_double(v); }},
      {"speed_mps", [](RunConfig& c, const std::string& v) { c.motion.speed = to_double(v); }},
      {"speed_variation", [](RunConfig& c, const std::string& v) { c.motion.speed_variation = to_double(v); }},
      {"sensor_height_m", [](RunConfig& c, const std::string& v) { c.motion.sensor_height = to_double(v); }},
      {"roll_amp_deg", [](RunConfig& c, const std::string& v) { c.motion.roll_amplitude = deg(v); }},
      {"pitch_amp_deg", [](RunConfig& c, const std::string& v) { c.motion.pitch_amplitude = deg(v); }},
      {"z_amp_m", [](RunConfig& c, const std::string& v) { c.motion.z_amplitude = to_double(v); }},
      {"perturbation_period_s", [](RunConfig& c, const std::string& v) { c.motion.perturbation_period_s = to_double(v); }},
      {"dwell_s", [](RunConfig& c, const std::string& v) { c.motion.dwell_s = to_double(v); }},
      {"scene_ceiling_z_m", [](RunConfig& c, const std::string& v) { c.scene_ceiling_z = to_double(v); }},
      {"clutter_boxes", [](RunConfig& c, const std::string& v) { c.clutter_boxes = to_int32(v); }},
  };
  return table;
}

bool is_path_key(const std::string& key) {
  return key == "plan" || key == "annf" || key == "manifest" || key == "waypoints";
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) throw ValidationError("unknown config key `" + key + "`");
  if (value.empty()) throw ValidationError("empty value for `" + key + "`");
  try {
    it->second(*this, value);
  } catch (const ValidationError& e) {
    throw ValidationError(key + ": " + e.what());
  }
}

void RunConfig::validate() const {
  segmentation.validate();
  features.validate();
  registration.validate();
  sensor.validate();
  if (!(root_length > 0.0)) throw ValidationError("root_length_m must be positive");
  if (max_depth < 1 || max_depth > 20) throw ValidationError("max_depth must be in [1, 20]");
  if (!(motion.speed > 0.0)) throw ValidationError("speed_mps must be positive");
  if (motion.speed_variation < 0.0 || motion.speed_variation >= 1.0) {
    throw ValidationError("speed_variation must be in [0, 1)");
  }
  if (clutter_boxes < 0) throw ValidationError("clutter_boxes must be non-negative");
  for (const auto* p : {&plan, &annf, &manifest, &waypoints}) {
    if (!p->empty() && !fs::exists(*p)) throw ValidationError("path does not exist: " + *p);
  }
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& [name, _] : setters()) out.push_back(name);
    return out;
  }();
  return k;
}

RunConfig parse_run_config(std::string_view text, RunConfig base, const std::string& base_dir) {
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError(lineno, "expected `key = value`");
    const std::string key = trim(body.substr(0, eq));
    std::string value = trim(body.substr(eq + 1));
    if (is_path_key(key) && !base_dir.empty() && !value.empty() && fs::path(value).is_relative()) {
      value = (fs::path(base_dir) / value).string();
    }
    try {
      base.set(key, value);
    } catch (const ValidationError& e) {
      throw ParseError(lineno, e.what());
    }
  }
  return base;
}

RunConfig load_run_config(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), std::move(base), fs::path(path).parent_path().string());
}

void apply_override(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ValidationError("override must look like key=value: " + assignment);
  config.set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

}  // namespace fploc
