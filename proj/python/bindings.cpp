// Python bindings for the simulator core.

#include "rescuesim/arm.hpp"
#include "rescuesim/chassis.hpp"
#include "rescuesim/errors.hpp"
#include "rescuesim/odm.hpp"
#include "rescuesim/sim.hpp"
#include "rescuesim/teleop.hpp"
#include "rescuesim/terrain.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace rescuesim;

namespace {

std::string state_name(sim::MissionState s) {
  switch (s) {
    case sim::MissionState::running: return "running";
    case sim::MissionState::success: return "success";
    case sim::MissionState::failed: return "failed";
  }
  return "?";
}

arm::JointState joints_from(const std::array<double, arm::kJoints>& angles) {
  arm::JointState q;
  q.angles_deg = angles;
  return q;
}

std::vector<odm::DetectionRecord> records_from(
    const std::vector<std::tuple<std::int64_t, std::optional<std::string>, std::optional<std::string>, double>>& rows) {
  std::vector<odm::DetectionRecord> out;
  out.reserve(rows.size());
  for (const auto& [frame, gt, pred, latency] : rows) out.push_back({frame, gt, pred, latency});
  return out;
}

py::dict row_dict(const odm::MetricRow& r) {
  py::dict d;
  d["dataset"] = r.dataset;
  d["metric"] = r.metric;
  d["score"] = r.score;
  d["avg_fps"] = r.avg_fps;
  d["accuracy_pct"] = r.accuracy_pct;
  return d;
}

}  // namespace

PYBIND11_MODULE(_rescuesim, m) {
  m.doc() = "Tracked rescue robot simulator core";

  // Errors: a Python hierarchy mirroring the C++ one. ParseError carries
  // `line`, ReplayMismatchError carries `tick`.
  static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
  static py::exception<ValidationError> validation(m, "ValidationError", error.ptr());
  static py::exception<BoundsError> bounds(m, "BoundsError", error.ptr());
  static py::exception<LimitError> limit(m, "LimitError", error.ptr());
  static py::exception<UnreachableTargetError> unreachable(m, "UnreachableTargetError", error.ptr());
  static py::exception<SingularSupportError> singular(m, "SingularSupportError", error.ptr());
  static py::exception<EmptyInputError> empty(m, "EmptyInputError", error.ptr());
  static py::exception<UndefinedMetricError> undefined(m, "UndefinedMetricError", error.ptr());
  static py::exception<ParseError> parse(m, "ParseError", error.ptr());
  static py::exception<UnknownTypeError> unknown(m, "UnknownTypeError", parse.ptr());
  static py::exception<ReplayMismatchError> mismatch(m, "ReplayMismatchError", error.ptr());

  py::register_exception_translator([](std::exception_ptr p) {
    auto raise = [](py::object type, const char* what, const char* attr = nullptr, py::object value = {}) {
      py::object inst = type(what);
      if (attr) inst.attr(attr) = value;
      PyErr_SetObject(type.ptr(), inst.ptr());
    };
    try {
      if (p) std::rethrow_exception(p);
    } catch (const UnknownTypeError& e) {
      raise(unknown, e.what(), "line", py::str(e.line()));
    } catch (const ParseError& e) {
      raise(parse, e.what(), "line", py::str(e.line()));
    } catch (const ReplayMismatchError& e) {
      raise(mismatch, e.what(), "tick", py::int_(e.tick()));
    } catch (const ValidationError& e) {
      raise(validation, e.what());
    } catch (const BoundsError& e) {
      raise(bounds, e.what());
    } catch (const LimitError& e) {
      raise(limit, e.what());
    } catch (const UnreachableTargetError& e) {
      raise(unreachable, e.what());
    } catch (const SingularSupportError& e) {
      raise(singular, e.what());
    } catch (const EmptyInputError& e) {
      raise(empty, e.what());
    } catch (const UndefinedMetricError& e) {
      raise(undefined, e.what());
    } catch (const Error& e) {
      raise(error, e.what());
    }
  });

  // ---- terrain
  py::class_<terrain::TerrainGrid>(m, "TerrainGrid")
      .def(py::init<double, Eigen::Vector2d, Eigen::MatrixXd>(), py::arg("cell_size"), py::arg("origin"),
           py::arg("heights"))
      .def_property_readonly("cell_size", &terrain::TerrainGrid::cell_size)
      .def_property_readonly("bounds", [](const terrain::TerrainGrid& g) {
        return py::make_tuple(g.min_x(), g.min_y(), g.max_x(), g.max_y());
      })
      .def("height_at", [](const terrain::TerrainGrid& g, double x, double y) { return terrain::height_at(g, x, y); })
      .def("slope_at", [](const terrain::TerrainGrid& g, double x, double y) { return terrain::slope_at(g, x, y); });

  m.def("flat_terrain", [] { return terrain::build_scenario_terrain(terrain::Flat{}); });
  m.def("slope_terrain", [](double angle_deg) { return terrain::build_scenario_terrain(terrain::Slope{angle_deg}); },
        py::arg("angle_deg"));
  m.def("stair_terrain",
        [](double rise, double run, int count) {
          return terrain::build_scenario_terrain(terrain::Stair{rise, run, count});
        },
        py::arg("rise"), py::arg("run"), py::arg("count"));
  m.def("walled_room_terrain", [] { return terrain::build_scenario_terrain(terrain::WalledRoom{}); });
  m.def("stair_effective_slope_deg",
        [](double rise, double run) { return terrain::effective_slope_deg(terrain::Stair{rise, run, 1}); },
        py::arg("rise"), py::arg("run"));

  // ---- chassis
  py::class_<chassis::ChassisConfig>(m, "ChassisConfig")
      .def(py::init<>())
      .def_readwrite("length", &chassis::ChassisConfig::length)
      .def_readwrite("width", &chassis::ChassisConfig::width)
      .def_readwrite("com_height", &chassis::ChassisConfig::com_height)
      .def_readwrite("climb_max_deg", &chassis::ChassisConfig::climb_max_deg)
      .def_readwrite("payload_max_kg", &chassis::ChassisConfig::payload_max_kg)
      .def_readwrite("flipper_max_deg", &chassis::ChassisConfig::flipper_max_deg)
      .def_readwrite("v_max", &chassis::ChassisConfig::v_max)
      .def_property_readonly("total_mass", &chassis::ChassisConfig::total_mass);

  m.def("check_climbable",
        [](double slope_deg, double payload_kg, double flipper_max_deg, const chassis::ChassisConfig& c) {
          return chassis::check_climbable(slope_deg, flipper_max_deg, payload_kg, c);
        },
        py::arg("slope_deg"), py::arg("payload_kg"), py::arg("flipper_max_deg") = 45.0,
        py::arg("config") = chassis::ChassisConfig{});
  m.def("tip_over_angle",
        [](const std::string& direction, const chassis::ChassisConfig& c) {
          if (direction == "pitch") return chassis::tip_over_angle(c, chassis::TipDirection::pitch);
          if (direction == "roll") return chassis::tip_over_angle(c, chassis::TipDirection::roll);
          throw ValidationError("direction must be 'pitch' or 'roll'");
        },
        py::arg("direction"), py::arg("config") = chassis::ChassisConfig{});

  // ---- arm (default configuration; angles in degrees, chassis frame)
  m.def("forward_kinematics",
        [](const std::array<double, arm::kJoints>& angles) {
          const auto p = arm::forward_kinematics(arm::default_arm_config(), joints_from(angles));
          return py::make_tuple(p.position, p.orientation);
        },
        py::arg("angles_deg"));
  m.def("inverse_kinematics",
        [](const Eigen::Vector3d& position, const Eigen::Matrix3d& orientation,
           const std::array<double, arm::kJoints>& seed) {
          arm::EndEffectorPose target{position, orientation};
          return arm::inverse_kinematics(arm::default_arm_config(), target, joints_from(seed)).angles_deg;
        },
        py::arg("position"), py::arg("orientation"), py::arg("seed_deg") = std::array<double, arm::kJoints>{});
  m.def("jacobian",
        [](const std::array<double, arm::kJoints>& angles) {
          return Eigen::MatrixXd(arm::jacobian(arm::default_arm_config(), joints_from(angles)));
        },
        py::arg("angles_deg"));
  m.def("joint_limits", [] {
    std::vector<std::pair<double, double>> out;
    for (const auto& l : arm::default_arm_config().links) out.emplace_back(l.min_deg, l.max_deg);
    return out;
  });

  // ---- detection metrics
  py::class_<odm::ConfusionCounts>(m, "ConfusionCounts")
      .def(py::init([](std::int64_t tp, std::int64_t fp, std::int64_t fn, std::int64_t tn) {
             return odm::ConfusionCounts{tp, fp, fn, tn};
           }),
           py::arg("tp") = 0, py::arg("fp") = 0, py::arg("fn") = 0, py::arg("tn") = 0)
      .def_readwrite("tp", &odm::ConfusionCounts::tp)
      .def_readwrite("fp", &odm::ConfusionCounts::fp)
      .def_readwrite("fn", &odm::ConfusionCounts::fn)
      .def_readwrite("tn", &odm::ConfusionCounts::tn)
      .def("__add__", [](const odm::ConfusionCounts& a, const odm::ConfusionCounts& b) { return a + b; })
      .def("__eq__", [](const odm::ConfusionCounts& a, const odm::ConfusionCounts& b) { return a == b; })
      .def("__repr__", [](const odm::ConfusionCounts& c) {
        std::ostringstream s;
        s << "ConfusionCounts(tp=" << c.tp << ", fp=" << c.fp << ", fn=" << c.fn << ", tn=" << c.tn << ")";
        return s.str();
      });

  m.def("recall", &odm::recall);
  m.def("precision", &odm::precision);
  m.def("map_metric", &odm::map_metric);
  m.def("f1", &odm::f1);
  m.def("accumulate", [](const std::vector<std::tuple<std::int64_t, std::optional<std::string>,
                                                           std::optional<std::string>, double>>& rows) {
    return odm::accumulate(records_from(rows));
  }, py::arg("rows"), "Counts for (frame_id, ground_truth, prediction, latency_ms) rows; None means no object.");
  m.def("evaluate_logs",
        [](const std::vector<std::string>& paths) {
          std::vector<odm::DatasetLog> logs;
          for (const auto& p : paths) logs.push_back(odm::load_log(p));
          py::list rows;
          for (const auto& r : odm::evaluate(logs).rows) rows.append(row_dict(r));
          return rows;
        },
        py::arg("paths"));

  // ---- wire protocol: frames in, normalised frames out
  m.def("decode_frame",
        [](const std::string& frame) {
          const auto msg = teleop::decode(frame);
          return py::module_::import("json").attr("loads")(teleop::encode(msg));
        },
        py::arg("frame"), "Validate one v1 frame and return it as a dict.");
  m.def("encode_command",
        [](std::int64_t seq, std::int64_t timestamp_ms, const std::array<double, teleop::kChannels>& channels) {
          return teleop::encode(teleop::CommandMessage{seq, timestamp_ms, channels});
        },
        py::arg("seq"), py::arg("timestamp_ms"), py::arg("channels"));
  m.def("encode_heartbeat",
        [](std::int64_t seq, std::int64_t timestamp_ms) { return teleop::encode(teleop::Heartbeat{seq, timestamp_ms}); },
        py::arg("seq"), py::arg("timestamp_ms"));
  m.def("safe_stop_engaged",
        [](std::int64_t age_ms, std::int64_t timeout_ms) {
          return teleop::safe_stop_check(age_ms, timeout_ms) == teleop::LinkStatus::safe_stop;
        },
        py::arg("last_command_age_ms"), py::arg("timeout_ms") = 500);

  // ---- scenarios and missions
  py::class_<sim::Scenario>(m, "Scenario")
      .def_readonly("name", &sim::Scenario::name)
      .def_readonly("tick_rate", &sim::Scenario::tick_rate)
      .def_readonly("seed", &sim::Scenario::seed)
      .def_readonly("terrain", &sim::Scenario::terrain);
  m.def("load_scenario", &sim::load_scenario, py::arg("path"));

  py::class_<sim::CommandStream>(m, "CommandStream")
      .def_readonly("duration_ticks", &sim::CommandStream::duration_ticks)
      .def("__len__", [](const sim::CommandStream& s) { return s.deliveries.size(); });
  m.def("load_command_stream", &sim::load_command_stream, py::arg("path"));

  py::class_<sim::MissionResult>(m, "MissionResult")
      .def_property_readonly("state", [](const sim::MissionResult& r) { return state_name(r.outcome.state); })
      .def_property_readonly("success", [](const sim::MissionResult& r) { return r.outcome.success(); })
      .def_property_readonly("reason", [](const sim::MissionResult& r) { return r.outcome.reason; })
      .def_property_readonly("tick", [](const sim::MissionResult& r) { return r.outcome.tick; })
      .def_property_readonly("tick_log", [](const sim::MissionResult& r) { return r.log.serialize(); })
      .def_property_readonly("ticks", [](const sim::MissionResult& r) { return r.log.lines.size(); });
  m.def("run_mission", &sim::run_mission, py::arg("scenario"), py::arg("stream"),
        py::call_guard<py::gil_scoped_release>());
  m.def("replay",
        [](const std::string& tick_log, const sim::Scenario& sc) {
          std::istringstream in(tick_log);
          return sim::replay(sim::read_tick_log(in), sc).serialize();
        },
        py::arg("tick_log"), py::arg("scenario"),
        "Re-run a serialised tick log; raises ReplayMismatchError at the first divergent tick.");
}
