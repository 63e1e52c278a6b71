#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fploc/io.hpp"
#include "fploc/metrics.hpp"
#include "fploc/plan_gen.hpp"
#include "fploc/registration.hpp"

namespace py = pybind11;
using namespace fploc;

namespace {

// Trajectories cross the boundary as (N, 7) arrays: t, x, y, z, roll, pitch, yaw.
py::array_t<double> trajectory_to_array(const Trajectory& t) {
  py::array_t<double> out({static_cast<py::ssize_t>(t.size()), py::ssize_t{7}});
  auto a = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < t.size(); ++i) {
    const Pose6& p = t[i].pose;
    const double row[7] = {t[i].timestamp, p.x, p.y, p.z, p.roll, p.pitch, p.yaw};
    for (int k = 0; k < 7; ++k) a(static_cast<py::ssize_t>(i), k) = row[k];
  }
  return out;
}

Trajectory array_to_trajectory(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
  if (arr.ndim() != 2 || arr.shape(1) != 7) throw ValidationError("trajectory array must have shape (N, 7)");
  const auto a = arr.unchecked<2>();
  Trajectory t;
  for (py::ssize_t i = 0; i < a.shape(0); ++i) {
    t.push_back({a(i, 0), Pose6{a(i, 1), a(i, 2), a(i, 3), a(i, 4), a(i, 5), a(i, 6)}});
  }
  return t;
}

// Hit returns of a scan as an (N, 4) array: x, y, z, ring.
py::array_t<double> scan_points(const LidarScan& scan) {
  std::vector<double> flat;
  for (std::size_t r = 0; r < scan.rings.size(); ++r) {
    for (const auto& ret : scan.rings[r]) {
      if (!ret.hit()) continue;
      flat.insert(flat.end(), {ret.point.x(), ret.point.y(), ret.point.z(), static_cast<double>(r)});
    }
  }
  py::array_t<double> out({static_cast<py::ssize_t>(flat.size() / 4), py::ssize_t{4}});
  std::copy(flat.begin(), flat.end(), out.mutable_data());
  return out;
}

}  // namespace

PYBIND11_MODULE(_fploc, m) {
  m.doc() = "Floor-plan based LiDAR localization";

  auto error = py::register_exception<Error>(m, "Error");
  py::register_exception<ParseError>(m, "ParseError", error);
  py::register_exception<ValidationError>(m, "ValidationError", error);
  py::register_exception<FormatError>(m, "FormatError", error);
  py::register_exception<OutOfBounds>(m, "OutOfBounds", error);
  py::register_exception<DegenerateFit>(m, "DegenerateFit", error);
  py::register_exception<TrackingLost>(m, "TrackingLost", error);

  py::class_<PlanarPose>(m, "PlanarPose")
      .def(py::init<>())
      .def(py::init([](double x, double y, double yaw) { return PlanarPose{x, y, yaw}; }), py::arg("x"), py::arg("y"),
           py::arg("yaw"))
      .def_readwrite("x", &PlanarPose::x)
      .def_readwrite("y", &PlanarPose::y)
      .def_readwrite("yaw", &PlanarPose::yaw)
      .def("apply", &PlanarPose::apply)
      .def("compose", &PlanarPose::compose)
      .def("inverse", &PlanarPose::inverse)
      .def("__repr__", [](const PlanarPose& p) {
        return "PlanarPose(" + format_double(p.x) + ", " + format_double(p.y) + ", " + format_double(p.yaw) + ")";
      });

  py::class_<Pose6>(m, "Pose6")
      .def(py::init<>())
      .def(py::init([](double x, double y, double z, double roll, double pitch, double yaw) {
             return Pose6{x, y, z, roll, pitch, yaw};
           }),
           py::arg("x"), py::arg("y"), py::arg("z"), py::arg("roll") = 0.0, py::arg("pitch") = 0.0, py::arg("yaw") = 0.0)
      .def_readwrite("x", &Pose6::x)
      .def_readwrite("y", &Pose6::y)
      .def_readwrite("z", &Pose6::z)
      .def_readwrite("roll", &Pose6::roll)
      .def_readwrite("pitch", &Pose6::pitch)
      .def_readwrite("yaw", &Pose6::yaw)
      .def("translation", &Pose6::translation)
      .def("rotation", &Pose6::rotation)
      .def("planar", &Pose6::planar);

  py::class_<ClosestPointResult>(m, "ClosestPoint")
      .def_readonly("element_id", &ClosestPointResult::element_id)
      .def_readonly("point", &ClosestPointResult::point)
      .def_readonly("distance", &ClosestPointResult::distance);

  py::class_<FloorPlan>(m, "FloorPlan")
      .def_static("parse", &parse_floor_plan)
      .def_static("load", &load_floor_plan)
      .def("dump", &dump_floor_plan)
      .def("__len__", &FloorPlan::size)
      .def_property_readonly("bounds", [](const FloorPlan& p) { return py::make_tuple(p.bounds().min, p.bounds().max); })
      .def("distance", &FloorPlan::distance, py::arg("query"), py::arg("element_id"))
      .def("nearest", [](const FloorPlan& p, const Vec2& q, std::size_t k) { return brute_force_nearest(q, p, k); },
           py::arg("query"), py::arg("k") = 1);

  auto plans_m = m.def_submodule("plans", "Generated floor plans");
  plans_m.def("square_room", &plans::square_room, py::arg("width"), py::arg("height"));
  plans_m.def("room_with_pillars", &plans::room_with_pillars);
  plans_m.def("corridor_maze", &plans::corridor_maze, py::arg("cells_x"), py::arg("cells_y"), py::arg("cell_size"),
              py::arg("seed"));
  plans_m.def("mixed_arcs", &plans::mixed_arcs, py::arg("seed"));
  plans_m.def("random_segments", &plans::random_segments, py::arg("count"), py::arg("extent"), py::arg("seed"));

  py::class_<ValidationReport>(m, "ValidationReport")
      .def_readonly("depth", &ValidationReport::depth)
      .def_readonly("leaf_length_cm", &ValidationReport::leaf_length_cm)
      .def_readonly("hit_first", &ValidationReport::hit_first)
      .def_readonly("hit_first_or_second", &ValidationReport::hit_first_or_second)
      .def_readonly("mean_lookup_ns", &ValidationReport::mean_lookup_ns)
      .def_readonly("sample_count", &ValidationReport::sample_count);

  py::class_<Annf, std::shared_ptr<Annf>>(m, "Annf")
      .def_static("build", &Annf::build, py::arg("plan"), py::arg("root_length") = Annf::kDefaultRootLength,
                  py::arg("max_depth") = Annf::kDefaultMaxDepth)
      .def("lookup",
           [](const Annf& a, const Vec2& q) {
             const ElementPair p = a.lookup(q);
             return py::make_tuple(p.first, p.second);
           })
      .def("contains", &Annf::contains)
      .def_property_readonly("max_depth", &Annf::max_depth)
      .def_property_readonly("node_count", &Annf::node_count)
      .def_property_readonly("leaf_count", &Annf::leaf_count)
      .def("save", [](const Annf& a) { return py::bytes(a.save()); })
      .def_static("load", [](const py::bytes& b) { return Annf::load(std::string(b)); })
      .def("validate", [](const Annf& a, const FloorPlan& p, std::size_t n, std::uint64_t seed) {
             return validate_annf(a, p, n, seed);
           },
           py::arg("plan"), py::arg("samples"), py::arg("seed") = 1);

  py::class_<SensorModel>(m, "SensorModel")
      .def_static("os1_64", &SensorModel::os1_64)
      .def_static("uniform", &SensorModel::uniform, py::arg("rings"), py::arg("vertical_fov_deg"), py::arg("azimuth_steps"))
      .def_readwrite("azimuth_steps", &SensorModel::azimuth_steps)
      .def_readwrite("max_range", &SensorModel::max_range)
      .def_readwrite("range_noise_sigma", &SensorModel::range_noise_sigma)
      .def_readwrite("scan_rate", &SensorModel::scan_rate)
      .def_property_readonly("n_rings", &SensorModel::n_rings);

  py::class_<Scene>(m, "Scene")
      .def(py::init([](FloorPlan plan, double ceiling_z) {
             Scene s{std::move(plan)};
             s.ceiling_z = ceiling_z;
             return s;
           }),
           py::arg("plan"), py::arg("ceiling_z") = 3.0)
      .def_readonly("plan", &Scene::plan)
      .def_readwrite("ceiling_z", &Scene::ceiling_z)
      .def("add_clutter", &add_random_clutter, py::arg("count"), py::arg("seed"), py::arg("clear_points"),
           py::arg("keep_out"));

  py::class_<LidarScan>(m, "LidarScan")
      .def_readonly("timestamp", &LidarScan::timestamp)
      .def_property_readonly("ring_count", [](const LidarScan& s) { return s.rings.size(); })
      .def("points", &scan_points, "Hit returns as an (N, 4) array of x, y, z, ring")
      .def("clutter_fraction", &clutter_fraction)
      .def("to_csv", &format_scan_csv)
      .def_static("from_csv", &parse_scan_csv, py::arg("text"), py::arg("timestamp") = 0.0);

  m.def("simulate_scan", &simulate_scan, py::arg("scene"), py::arg("pose"), py::arg("sensor"), py::arg("seed"),
        py::arg("timestamp") = 0.0);

  py::class_<Waypoint>(m, "Waypoint")
      .def(py::init([](double x, double y, double yaw) { return Waypoint{Vec2(x, y), yaw}; }))
      .def_property_readonly("position", [](const Waypoint& w) { return w.position; })
      .def_readonly("yaw", &Waypoint::yaw);

  py::class_<MotionProfile>(m, "MotionProfile")
      .def(py::init<>())
      .def_readwrite("speed", &MotionProfile::speed)
      .def_readwrite("speed_variation", &MotionProfile::speed_variation)
      .def_readwrite("sensor_height", &MotionProfile::sensor_height)
      .def_readwrite("roll_amplitude", &MotionProfile::roll_amplitude)
      .def_readwrite("pitch_amplitude", &MotionProfile::pitch_amplitude)
      .def_readwrite("z_amplitude", &MotionProfile::z_amplitude);

  m.def("plan_trajectory",
        [](const std::vector<Waypoint>& w, const MotionProfile& m, double rate) {
          return trajectory_to_array(plan_trajectory(w, m, rate));
        },
        py::arg("waypoints"), py::arg("motion"), py::arg("rate") = 10.0);

  py::class_<VerticalState>(m, "VerticalState")
      .def_readonly("t_z", &VerticalState::t_z)
      .def_readonly("roll", &VerticalState::roll)
      .def_readonly("pitch", &VerticalState::pitch)
      .def_readonly("gravity", &VerticalState::gravity);

  m.def("vertical_state",
        [](const LidarScan& scan, std::optional<double> ceiling_z) {
          SegmentationConfig cfg;
          cfg.ceiling_z = ceiling_z;
          return segment_scan(scan, cfg).vertical_state;
        },
        py::arg("scan"), py::arg("ceiling_z") = py::none(),
        "Roll, pitch and height from the ceiling (and floor) planes of one scan");

  py::class_<PlanMap>(m, "PlanMap")
      .def(py::init<FloorPlan, Annf>(), py::arg("plan"), py::arg("annf"))
      .def_property_readonly("plan", &PlanMap::plan);

  m.def("register_frame",
        [](const LidarScan& scan, const PlanMap& map, const PlanarPose& init, std::optional<double> ceiling_z) {
          SegmentationConfig seg;
          seg.ceiling_z = ceiling_z;
          const FeatureSet f = frame_features(scan, segment_scan(scan, seg), FeatureConfig{});
          const RegistrationResult r = single_frame_register(f, map, init, RegistrationConfig{});
          return py::make_tuple(r.pose, r.ok, r.objective);
        },
        py::arg("scan"), py::arg("map"), py::arg("init"), py::arg("ceiling_z") = py::none(),
        "Single-frame registration; returns (pose, ok, objective)");

  py::class_<Tracker>(m, "Tracker")
      .def(py::init([](const PlanMap& map, const Pose6& init, std::optional<double> ceiling_z, bool windowed) {
             TrackerConfig cfg;
             cfg.segmentation.ceiling_z = ceiling_z;
             cfg.windowed = windowed;
             return std::make_unique<Tracker>(map, cfg, init);
           }),
           py::arg("map"), py::arg("init"), py::arg("ceiling_z") = py::none(), py::arg("windowed") = true,
           py::keep_alive<1, 2>())
      .def("process", [](Tracker& t, const LidarScan& scan) { return t.process(scan).keyframe; },
           "Processes one scan; returns whether it became a keyframe")
      .def("finish", [](Tracker& t) { return trajectory_to_array(t.finish()); })
      .def_property_readonly("keyframe_count", &Tracker::keyframe_count);

  m.def("ate_cm",
        [](const py::array_t<double>& est, const py::array_t<double>& ref, double max_dt) {
          return ate_cm(associate(array_to_trajectory(est), array_to_trajectory(ref), max_dt));
        },
        py::arg("est"), py::arg("ref"), py::arg("max_dt") = 0.01);
  m.def("rpe_cm",
        [](const py::array_t<double>& est, const py::array_t<double>& ref, double max_dt, int delta) {
          return rpe_cm(associate(array_to_trajectory(est), array_to_trajectory(ref), max_dt), delta);
        },
        py::arg("est"), py::arg("ref"), py::arg("max_dt") = 0.01, py::arg("delta") = 1);
  m.def("format_trajectory", [](const py::array_t<double>& t) { return format_trajectory(array_to_trajectory(t)); });
  m.def("parse_trajectory", [](std::string_view text) { return trajectory_to_array(parse_trajectory(text)); });
}
