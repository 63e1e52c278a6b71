// fploc command-line front end.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fploc/annf.hpp"
#include "fploc/config.hpp"
#include "fploc/io.hpp"
#include "fploc/metrics.hpp"
#include "fploc/registration.hpp"

namespace fs = std::filesystem;
using namespace fploc;

namespace {

// Usage or I/O problem: exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

RunConfig load_config(const Common& c) {
  RunConfig cfg;
  if (!c.config_path.empty()) cfg = load_run_config(c.config_path);
  for (const auto& o : c.overrides) apply_override(cfg, o);
  return cfg;
}

std::uint64_t resolve_seed(const Common& c, const RunConfig& cfg) {
  if (c.seed) return *c.seed;
  if (cfg.seed) return *cfg.seed;
  if (const char* env = std::getenv("FPLOC_SEED")) {
    try {
      std::size_t used = 0;
      const unsigned long long s = std::stoull(env, &used);
      if (used == std::string(env).size()) return s;
    } catch (const std::exception&) {
    }
    throw UsageError(std::string("FPLOC_SEED is not an unsigned integer: ") + env);
  }
  return 0;
}

void require(const std::string& value, const char* what) {
  if (value.empty()) throw UsageError(std::string("missing ") + what);
}

void emit(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
  } else {
    write_file(path, content);
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Annf load_or_build_annf(const RunConfig& cfg, const FloorPlan& plan) {
  if (!cfg.annf.empty()) return Annf::load(read_file(cfg.annf));
  return Annf::build(plan, cfg.root_length, cfg.max_depth);
}

struct BuildArgs {
  std::optional<double> root_length;
  std::optional<int> max_depth;
  std::string out;
};

int cmd_build_annf(const Common& common, RunConfig cfg, const BuildArgs& a) {
  if (a.root_length) cfg.root_length = *a.root_length;
  if (a.max_depth) cfg.max_depth = *a.max_depth;
  cfg.validate();
  require(cfg.plan, "--plan");
  require(a.out, "--out");
  (void)common;
  const FloorPlan plan = load_floor_plan(cfg.plan);
  const auto t0 = std::chrono::steady_clock::now();
  const Annf annf = Annf::build(plan, cfg.root_length, cfg.max_depth);
  const double secs = seconds_since(t0);
  write_file(a.out, annf.save());
  std::printf("elements %zu nodes %zu leaves %zu build_s %.3f\n", plan.size(), annf.node_count(), annf.leaf_count(),
              secs);
  return 0;
}

struct ValidateArgs {
  std::size_t samples = 100000;
  bool sweep = false;
  std::string out;
};

int cmd_validate_annf(const Common& common, RunConfig cfg, const ValidateArgs& a) {
  cfg.validate();
  require(cfg.plan, "--plan");
  if (!a.sweep) require(cfg.annf, "--annf (or --sweep)");
  const FloorPlan plan = load_floor_plan(cfg.plan);
  const OracleSamples samples = make_oracle_samples(plan, a.samples, resolve_seed(common, cfg));
  std::string csv = validation_csv_header() + "\n";
  if (a.sweep) {
    for (int depth = 3; depth <= 8; ++depth) {
      csv += validation_csv_row(validate_annf(Annf::build(plan, cfg.root_length, depth), samples)) + "\n";
    }
  } else {
    const Annf annf = Annf::load(read_file(cfg.annf));
    if (annf.element_count() != plan.size()) throw ValidationError("ANNF was built for a different plan");
    csv += validation_csv_row(validate_annf(annf, samples)) + "\n";
  }
  emit(a.out, csv);
  return 0;
}

struct SimulateArgs {
  std::string out_dir;
};

int cmd_simulate(const Common& common, RunConfig cfg, const SimulateArgs& a) {
  cfg.validate();
  require(cfg.plan, "--plan");
  require(cfg.waypoints, "--waypoints");
  require(a.out_dir, "--out-dir");
  const std::uint64_t seed = resolve_seed(common, cfg);
  Scene scene{load_floor_plan(cfg.plan), 3.0, 0.0, {}, {}};
  scene.ceiling_z = cfg.segmentation.ceiling_z.value_or(cfg.scene_ceiling_z);
  scene.validate();
  const auto waypoints = parse_waypoints(read_file(cfg.waypoints));
  const auto poses = plan_trajectory(waypoints, cfg.motion, cfg.sensor.scan_rate);
  if (cfg.clutter_boxes > 0) {
    std::vector<Vec2> path;
    for (const auto& p : poses) path.emplace_back(p.pose.x, p.pose.y);
    add_random_clutter(scene, cfg.clutter_boxes, seed ^ 0xc1a77e2ULL, path, 0.8);
  }
  fs::create_directories(a.out_dir);
  std::vector<ManifestEntry> manifest;
  char name[32];
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const LidarScan scan = simulate_scan(scene, poses[i].pose, cfg.sensor, frame_seed(seed, i), poses[i].timestamp);
    std::snprintf(name, sizeof(name), "scan_%06zu.csv", i);
    write_file((fs::path(a.out_dir) / name).string(), format_scan_csv(scan));
    manifest.push_back({poses[i].timestamp, name, poses[i].pose});
  }
  write_file((fs::path(a.out_dir) / "manifest.csv").string(), format_manifest(manifest));
  std::printf("frames %zu path_m %.3f clutter_boxes %zu\n", poses.size(), path_length(waypoints), scene.boxes.size());
  return 0;
}

struct LocalizeArgs {
  std::vector<double> init;
  std::string out;
  std::string timing;
};

int cmd_localize(const Common& common, RunConfig cfg, const LocalizeArgs& a) {
  cfg.validate();
  (void)common;
  require(cfg.plan, "--plan");
  require(cfg.manifest, "--manifest");
  require(a.out, "--out");
  const Sequence seq = load_sequence(cfg.manifest);
  if (seq.entries.empty()) throw UsageError("manifest lists no scans");
  FloorPlan plan = load_floor_plan(cfg.plan);
  Annf annf = load_or_build_annf(cfg, plan);
  const PlanMap map(std::move(plan), std::move(annf));
  Pose6 init = seq.entries.front().truth;
  if (!a.init.empty()) {
    if (a.init.size() != 6) throw UsageError("--init takes x y z roll pitch yaw");
    init = {a.init[0], a.init[1], a.init[2], a.init[3], a.init[4], a.init[5]};
  }
  Tracker tracker(map, cfg.tracker(), init);
  std::string timing = "frame,ms_segmentation,ms_features,ms_register,ms_window\n";
  char row[160];
  for (std::size_t i = 0; i < seq.entries.size(); ++i) {
    const FrameReport r = tracker.process(seq.load_scan(i));
    std::snprintf(row, sizeof(row), "%zu,%.3f,%.3f,%.3f,%.3f\n", r.frame, r.ms_segmentation, r.ms_features,
                  r.ms_register, r.ms_window);
    timing += row;
  }
  const Trajectory traj = tracker.finish();
  save_trajectory(a.out, traj);
  if (!a.timing.empty()) write_file(a.timing, timing);
  std::printf("frames %zu keyframes %zu\n", traj.size(), tracker.keyframe_count());
  return 0;
}

// A trajectory file, or a simulation manifest whose ground truth is used.
Trajectory load_any_trajectory(const std::string& path) {
  const std::string text = read_file(path);
  if (text.rfind("timestamp_s,scan_file", 0) == 0) {
    Sequence s;
    s.entries = parse_manifest(text);
    return s.ground_truth();
  }
  return parse_trajectory(text);
}

struct EvaluateArgs {
  std::string est;
  std::string gt;
  double max_dt = 0.02;
  int delta = 1;
  std::string out;
};

int cmd_evaluate(const EvaluateArgs& a) {
  const auto pairs = associate(load_any_trajectory(a.est), load_any_trajectory(a.gt), a.max_dt);
  std::vector<MetricRow> rows{{"ate", ate_cm(pairs), pairs.size()}};
  if (pairs.size() > static_cast<std::size_t>(a.delta)) {
    rows.push_back({"rpe", rpe_cm(pairs, a.delta), pairs.size() - a.delta});
  }
  emit(a.out, metrics_csv(rows));
  return 0;
}

struct PlotArgs {
  std::vector<std::string> traj;
  std::string out;
  std::string csv;
};

int cmd_plot(RunConfig cfg, const PlotArgs& a) {
  require(cfg.plan, "--plan");
  require(a.out, "--out");
  if (a.traj.empty()) throw UsageError("at least one --traj is needed");
  const FloorPlan plan = load_floor_plan(cfg.plan);
  std::vector<PlotSeries> series;
  for (const auto& t : a.traj) {
    const auto eq = t.find('=');
    const std::string label = eq == std::string::npos ? fs::path(t).stem().string() : t.substr(0, eq);
    const std::string path = eq == std::string::npos ? t : t.substr(eq + 1);
    series.push_back({label, load_any_trajectory(path)});
  }
  write_file(a.out, plot_svg(plan, series));
  if (!a.csv.empty()) write_file(a.csv, plot_csv(series));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Floor-plan based LiDAR localization"};
  app.require_subcommand(1);
  Common common;
  std::string plan, annf, manifest, waypoints;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--set", common.overrides, "override a config key (key=value), repeatable");
    sub->add_option("--seed", common.seed, "random seed (falls back to the config, then FPLOC_SEED)");
  };

  auto* build = app.add_subcommand("build-annf", "build and save the ANNF of a floor plan");
  BuildArgs build_args;
  add_common(build);
  build->add_option("--plan,plan", plan, "floor-plan file");
  build->add_option("--out,-o", build_args.out, "output ANNF file");
  build->add_option("--root-length", build_args.root_length, "root field side in m")->check(CLI::PositiveNumber);
  build->add_option("--max-depth", build_args.max_depth, "maximum field depth")->check(CLI::Range(1, 20));

  auto* validate = app.add_subcommand("validate-annf", "hit rates of an ANNF against brute force");
  ValidateArgs validate_args;
  add_common(validate);
  validate->add_option("--plan", plan, "floor-plan file");
  validate->add_option("--annf", annf, "ANNF file");
  validate->add_option("--samples", validate_args.samples, "uniform samples")->check(CLI::PositiveNumber);
  validate->add_flag("--sweep", validate_args.sweep, "build and validate depths 3..8");
  validate->add_option("--out,-o", validate_args.out, "CSV output (default stdout)");

  auto* simulate = app.add_subcommand("simulate", "simulate scans along waypoints");
  SimulateArgs simulate_args;
  add_common(simulate);
  simulate->add_option("--plan", plan, "floor-plan file");
  simulate->add_option("--waypoints", waypoints, "waypoint file (x y yaw per line)");
  simulate->add_option("--out-dir,-o", simulate_args.out_dir, "output directory");

  auto* localize = app.add_subcommand("localize", "track a scan sequence against a floor plan");
  LocalizeArgs localize_args;
  add_common(localize);
  localize->add_option("--plan", plan, "floor-plan file");
  localize->add_option("--annf", annf, "ANNF file (built on the fly when absent)");
  localize->add_option("--manifest", manifest, "sequence manifest");
  localize->add_option("--init", localize_args.init, "initial pose x y z roll pitch yaw (default: first ground truth)")
      ->expected(6);
  localize->add_option("--out,-o", localize_args.out, "trajectory output");
  localize->add_option("--timing", localize_args.timing, "per-frame timing CSV");

  auto* evaluate = app.add_subcommand("evaluate", "ATE and RPE of an estimate against ground truth");
  EvaluateArgs evaluate_args;
  evaluate->add_option("--est", evaluate_args.est, "estimated trajectory")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--gt", evaluate_args.gt, "ground-truth trajectory or manifest")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate->add_option("--max-dt", evaluate_args.max_dt, "association tolerance in s")->check(CLI::NonNegativeNumber);
  evaluate->add_option("--delta", evaluate_args.delta, "RPE step in pairs")->check(CLI::PositiveNumber);
  evaluate->add_option("--out,-o", evaluate_args.out, "CSV output (default stdout)");

  auto* plot = app.add_subcommand("plot", "bird's-eye SVG of trajectories over the plan");
  PlotArgs plot_args;
  add_common(plot);
  plot->add_option("--plan", plan, "floor-plan file");
  plot->add_option("--traj", plot_args.traj, "[label=]path, repeatable");
  plot->add_option("--out,-o", plot_args.out, "SVG output");
  plot->add_option("--csv", plot_args.csv, "CSV of the plotted points");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg = load_config(common);
    // Flags win over the config file.
    if (!plan.empty()) cfg.plan = plan;
    if (!annf.empty()) cfg.annf = annf;
    if (!manifest.empty()) cfg.manifest = manifest;
    if (!waypoints.empty()) cfg.waypoints = waypoints;
    if (common.seed) cfg.seed = common.seed;

    if (build->parsed()) return cmd_build_annf(common, cfg, build_args);
    if (validate->parsed()) return cmd_validate_annf(common, cfg, validate_args);
    if (simulate->parsed()) return cmd_simulate(common, cfg, simulate_args);
    if (localize->parsed()) return cmd_localize(common, cfg, localize_args);
    if (evaluate->parsed()) return cmd_evaluate(evaluate_args);
    if (plot->parsed()) return cmd_plot(cfg, plot_args);
  } catch (const TrackingLost& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const DegenerateFit& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const OutOfBounds& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
