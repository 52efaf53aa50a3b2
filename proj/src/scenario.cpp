#include "rescuesim/scenario.hpp"

#include "rescuesim/errors.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <istream>
#include <sstream>

namespace rescuesim::sim {

using nlohmann::json;

std::string goal_name(const Goal& goal) {
  return std::visit(
      [](const auto& g) -> std::string {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, ReachZone>) return "reach_zone";
        if constexpr (std::is_same_v<T, DetectLabel>) return "detect";
        if constexpr (std::is_same_v<T, GraspObject>) return "grasp";
        return "return";
      },
      goal);
}

const SceneObject* Scenario::find_object(const std::string& id) const {
  for (const auto& o : objects) {
    if (o.id == id) return &o;
  }
  return nullptr;
}

void Scenario::validate() const {
  chassis.validate();
  arm.validate();
  arm::check_limits(arm, arm_start);
  environment.validate();
  if (!(tick_rate > 0.0)) throw ValidationError("tick_rate must be positive");
  if (cmd_timeout_ms <= 0) throw ValidationError("cmd_timeout_ms must be positive");
  if (!(arm_rate_deg_s > 0.0) || !(arm_jog_rate_deg_s > 0.0) || !(grasp_epsilon > 0.0)) {
    throw ValidationError("arm rates and grasp epsilon must be positive");
  }
  if (!(detector.range > 0.0) || !(detector.latency_mean_ms - detector.latency_jitter_ms > 0.0)) {
    throw ValidationError("detector range and latency must be positive");
  }
  // Whole footprint inside the grid.
  chassis::ChassisState s = chassis::initial_state(chassis, start_position, start_heading_deg);
  try {
    (void)chassis::passive_conform(s, terrain, chassis);
  } catch (const BoundsError&) {
    throw ValidationError("start pose places the robot outside the terrain");
  }
  for (size_t i = 0; i < objects.size(); ++i) {
    if (objects[i].id.empty()) throw ValidationError("object id must not be empty");
    if (!(objects[i].mass_kg >= 0.0)) throw ValidationError("object mass must be non-negative");
    for (size_t k = i + 1; k < objects.size(); ++k) {
      if (objects[i].id == objects[k].id) throw ValidationError("duplicate object id " + objects[i].id);
    }
  }
  for (const auto& g : mission) {
    if (const auto* grasp = std::get_if<GraspObject>(&g)) {
      const auto* o = find_object(grasp->object_id);
      if (!o) throw ValidationError("mission references unknown object " + grasp->object_id);
      if (!o->graspable) throw ValidationError("mission grasps non-graspable object " + o->id);
    }
  }
}

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("scenario field '") + key + "' has the wrong type");
  }
}

const json& need(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ValidationError(std::string("scenario is missing '") + key + "'");
  return *it;
}

Eigen::Vector3d vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ValidationError("expected a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Eigen::Vector2d vec2(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ValidationError("expected a 2-element array");
  return {j[0].get<double>(), j[1].get<double>()};
}

void read_terrain_block(const json& t, Scenario& sc, const std::string& base_dir) {
  const std::string kind = get_or<std::string>(t, "kind", "flat");
  auto& lay = sc.layout;
  if (auto it = t.find("layout"); it != t.end()) {
    lay.cell_size = get_or(*it, "cell_size", lay.cell_size);
    lay.width = get_or(*it, "width", lay.width);
    lay.approach = get_or(*it, "approach", lay.approach);
    lay.ramp_run = get_or(*it, "ramp_run", lay.ramp_run);
    lay.landing = get_or(*it, "landing", lay.landing);
    lay.room_size = get_or(*it, "room_size", lay.room_size);
    lay.wall_height = get_or(*it, "wall_height", lay.wall_height);
    lay.wall_thickness = get_or(*it, "wall_thickness", lay.wall_thickness);
  }
  if (kind == "flat") {
    sc.terrain_kind = terrain::Flat{};
  } else if (kind == "slope") {
    sc.terrain_kind = terrain::Slope{need(t, "angle_deg").get<double>()};
  } else if (kind == "stair") {
    sc.terrain_kind = terrain::Stair{need(t, "rise").get<double>(), need(t, "run").get<double>(),
                                     need(t, "count").get<int>()};
  } else if (kind == "walled_room") {
    sc.terrain_kind = terrain::WalledRoom{};
  } else if (kind == "file") {
    std::filesystem::path p = need(t, "path").get<std::string>();
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    sc.terrain_file = p.string();
  } else {
    throw ValidationError("unknown terrain kind '" + kind + "'");
  }
  sc.terrain = sc.terrain_file ? terrain::load_terrain(*sc.terrain_file)
                               : terrain::build_scenario_terrain(sc.terrain_kind, lay);
}

void read_chassis_block(const json& c, chassis::ChassisConfig& cfg) {
  cfg.length = get_or(c, "length", cfg.length);
  cfg.width = get_or(c, "width", cfg.width);
  cfg.height = get_or(c, "height", cfg.height);
  cfg.mass_arm_g = get_or(c, "mass_arm_g", cfg.mass_arm_g);
  cfg.mass_tracks_g = get_or(c, "mass_tracks_g", cfg.mass_tracks_g);
  cfg.mass_others_g = get_or(c, "mass_others_g", cfg.mass_others_g);
  cfg.flipper_max_deg = get_or(c, "flipper_max_deg", cfg.flipper_max_deg);
  cfg.climb_max_deg = get_or(c, "climb_max_deg", cfg.climb_max_deg);
  cfg.payload_max_kg = get_or(c, "payload_max_kg", cfg.payload_max_kg);
  cfg.com_height = get_or(c, "com_height", cfg.com_height);
  cfg.front_fraction = get_or(c, "front_fraction", cfg.front_fraction);
  cfg.hinge_x = get_or(c, "hinge_x", cfg.hinge_x);
  cfg.v_max = get_or(c, "v_max", cfg.v_max);
  cfg.flipper_rate_max_deg_s = get_or(c, "flipper_rate_max_deg_s", cfg.flipper_rate_max_deg_s);
  cfg.track_width_factor = get_or(c, "track_width_factor", cfg.track_width_factor);
}

void read_arm_block(const json& a, arm::ArmConfig& cfg) {
  if (auto it = a.find("links"); it != a.end()) {
    if (!it->is_array() || it->size() != arm::kJoints) {
      throw ValidationError("arm.links needs exactly 6 rows");
    }
    for (size_t i = 0; i < static_cast<size_t>(arm::kJoints); ++i) {
      const json& r = (*it)[i];
      if (!r.is_array() || r.size() != 7) {
        throw ValidationError("arm row needs (a, twist, d, offset, min, max, mass)");
      }
      cfg.links[i] = {r[0].get<double>(), r[1].get<double>(), r[2].get<double>(),
                      r[3].get<double>(), r[4].get<double>(), r[5].get<double>(),
                      r[6].get<double>()};
    }
  }
  cfg.gripper_mass = get_or(a, "gripper_mass", cfg.gripper_mass);
  if (auto it = a.find("reach"); it != a.end()) cfg.reach = vec3(*it);
  if (auto it = a.find("mount"); it != a.end()) cfg.mount = vec3(*it);
}

void read_environment_block(const json& e, sensors::EnvironmentField& env) {
  env.ambient_temperature_c = get_or(e, "ambient_temperature_c", env.ambient_temperature_c);
  env.ambient_humidity_pct = get_or(e, "ambient_humidity_pct", env.ambient_humidity_pct);
  env.ambient_gas_ppm = get_or(e, "ambient_gas_ppm", env.ambient_gas_ppm);
  if (auto it = e.find("sources"); it != e.end()) {
    for (const auto& s : *it) {
      sensors::HazardSource src;
      src.position = vec3(need(s, "position"));
      const std::string kind = need(s, "kind").get<std::string>();
      if (kind == "heat") {
        src.kind = sensors::HazardKind::heat;
      } else if (kind == "gas") {
        src.kind = sensors::HazardKind::gas;
      } else {
        throw ValidationError("hazard kind must be heat or gas");
      }
      src.intensity = need(s, "intensity").get<double>();
      src.sigma = need(s, "sigma").get<double>();
      env.sources.push_back(src);
    }
  }
}

void read_sensor_block(const json& s, sensors::SensorSuiteConfig& cfg) {
  if (auto it = s.find("ultrasonic_mount"); it != s.end()) cfg.ultrasonic.position = vec3(*it);
  cfg.ultrasonic.pitch_deg = get_or(s, "ultrasonic_pitch_deg", cfg.ultrasonic.pitch_deg);
  cfg.ultrasonic_max_range = get_or(s, "ultrasonic_max_range", cfg.ultrasonic_max_range);
  cfg.declination_deg = get_or(s, "declination_deg", cfg.declination_deg);
  cfg.probe_height = get_or(s, "probe_height", cfg.probe_height);
  cfg.noise = get_or(s, "noise", cfg.noise);
  cfg.noise_ultrasonic_m = get_or(s, "noise_ultrasonic_m", cfg.noise_ultrasonic_m);
  cfg.noise_temperature_c = get_or(s, "noise_temperature_c", cfg.noise_temperature_c);
  cfg.noise_humidity_pct = get_or(s, "noise_humidity_pct", cfg.noise_humidity_pct);
  cfg.noise_gas_ppm = get_or(s, "noise_gas_ppm", cfg.noise_gas_ppm);
}

Goal read_goal(const json& g, const Scenario& sc) {
  const std::string kind = need(g, "goal").get<std::string>();
  if (kind == "reach_zone") {
    return ReachZone{vec2(need(g, "center")), get_or(g, "radius", 0.25)};
  }
  if (kind == "detect") return DetectLabel{need(g, "label").get<std::string>()};
  if (kind == "grasp") return GraspObject{need(g, "object").get<std::string>()};
  if (kind == "return") {
    ReturnTo r{sc.start_position, get_or(g, "radius", 0.25)};
    if (auto it = g.find("center"); it != g.end()) r.center = vec2(*it);
    return r;
  }
  throw ValidationError("unknown mission goal '" + kind + "'");
}

}  // namespace

Scenario read_scenario(std::istream& in, const std::string& base_dir) {
  std::string header;
  if (!std::getline(in, header)) throw ValidationError("empty scenario file");
  {
    std::istringstream hs(header);
    std::string magic, version;
    if (!(hs >> magic >> version) || magic != "scenario" || version != "v1") {
      throw ValidationError("scenario file must start with 'scenario v1'");
    }
  }
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("scenario body is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("scenario body must be a JSON object");

  Scenario sc;
  try {
    sc.name = get_or<std::string>(j, "name", "unnamed");
    read_terrain_block(get_or(j, "terrain", json::object()), sc, base_dir);
    if (auto it = j.find("start"); it != j.end()) {
      sc.start_position = {need(*it, "x").get<double>(), need(*it, "y").get<double>()};
      sc.start_heading_deg = get_or(*it, "heading_deg", 0.0);
    }
    if (auto it = j.find("chassis"); it != j.end()) read_chassis_block(*it, sc.chassis);
    if (auto it = j.find("arm"); it != j.end()) read_arm_block(*it, sc.arm);
    if (auto it = j.find("arm_start"); it != j.end()) {
      if (!it->is_array() || it->size() != arm::kJoints) throw ValidationError("arm_start needs 6 angles");
      for (size_t i = 0; i < static_cast<size_t>(arm::kJoints); ++i) {
        sc.arm_start.angles_deg[i] = (*it)[i].get<double>();
      }
    }
    if (auto it = j.find("environment"); it != j.end()) read_environment_block(*it, sc.environment);
    if (auto it = j.find("sensors"); it != j.end()) read_sensor_block(*it, sc.sensors);
    if (auto it = j.find("detector"); it != j.end()) {
      auto& d = sc.detector;
      d.range = get_or(*it, "range", d.range);
      d.camera_height = get_or(*it, "camera_height", d.camera_height);
      d.camera_forward = get_or(*it, "camera_forward", d.camera_forward);
      d.latency_mean_ms = get_or(*it, "latency_mean_ms", d.latency_mean_ms);
      d.latency_jitter_ms = get_or(*it, "latency_jitter_ms", d.latency_jitter_ms);
    }
    if (auto it = j.find("objects"); it != j.end()) {
      for (const auto& o : *it) {
        SceneObject obj;
        obj.id = need(o, "id").get<std::string>();
        obj.label = need(o, "label").get<std::string>();
        const json& p = need(o, "position");
        if (p.is_array() && p.size() == 2) {
          // resting on the surface
          const Eigen::Vector2d xy = vec2(p);
          obj.position = {xy.x(), xy.y(), terrain::height_at(sc.terrain, xy.x(), xy.y())};
        } else {
          obj.position = vec3(p);
        }
        obj.graspable = get_or(o, "graspable", false);
        obj.mass_kg = get_or(o, "mass_kg", 0.0);
        sc.objects.push_back(obj);
      }
    }
    sc.seed = get_or<std::uint64_t>(j, "seed", 0);
    sc.tick_rate = get_or(j, "tick_rate", sc.tick_rate);
    sc.cmd_timeout_ms = get_or(j, "cmd_timeout_ms", sc.cmd_timeout_ms);
    sc.arm_rate_deg_s = get_or(j, "arm_rate_deg_s", sc.arm_rate_deg_s);
    sc.arm_jog_rate_deg_s = get_or(j, "arm_jog_rate_deg_s", sc.arm_jog_rate_deg_s);
    sc.grasp_epsilon = get_or(j, "grasp_epsilon", sc.grasp_epsilon);
    if (auto it = j.find("mission"); it != j.end()) {
      for (const auto& g : *it) sc.mission.push_back(read_goal(g, sc));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("scenario field has the wrong type: ") + e.what());
  } catch (const BoundsError& e) {
    throw ValidationError(std::string("scenario object outside the terrain: ") + e.what());
  }
  sc.validate();
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scenario " + path);
  return read_scenario(in, std::filesystem::path(path).parent_path().string());
}

}  // namespace rescuesim::sim
