#pragma once

#include "rescuesim/arm.hpp"
#include "rescuesim/chassis.hpp"
#include "rescuesim/sensors.hpp"
#include "rescuesim/terrain.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace rescuesim::sim {

struct SceneObject {
  std::string id;
  std::string label;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();  // world, m
  bool graspable = false;
  double mass_kg = 0.0;
};

struct ReachZone {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 0.25;
};
struct DetectLabel {
  std::string label;
};
struct GraspObject {
  std::string object_id;
};
/// Back inside a zone (the start position unless given) with any held object.
struct ReturnTo {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 0.25;
};

using Goal = std::variant<ReachZone, DetectLabel, GraspObject, ReturnTo>;

std::string goal_name(const Goal& goal);

struct DetectorConfig {
  double range = 3.0;             // m
  double camera_height = 0.20;    // m above the body origin
  double camera_forward = 0.20;   // m ahead of the body origin
  double latency_mean_ms = 58.8;
  double latency_jitter_ms = 4.0;  // uniform +-
};

struct Scenario {
  std::string name;
  terrain::ScenarioKind terrain_kind = terrain::Flat{};
  terrain::Layout layout;
  std::optional<std::string> terrain_file;  // overrides terrain_kind when set
  terrain::TerrainGrid terrain{0.02, Eigen::Vector2d::Zero(), Eigen::MatrixXd::Zero(2, 2)};

  Eigen::Vector2d start_position = Eigen::Vector2d::Zero();
  double start_heading_deg = 0.0;
  chassis::ChassisConfig chassis;
  arm::ArmConfig arm = arm::default_arm_config();
  arm::JointState arm_start;
  sensors::EnvironmentField environment;
  sensors::SensorSuiteConfig sensors;
  DetectorConfig detector;
  std::vector<SceneObject> objects;
  std::vector<Goal> mission;

  std::uint64_t seed = 0;
  double tick_rate = 50.0;         // Hz
  std::int64_t cmd_timeout_ms = 500;
  double arm_rate_deg_s = 60.0;    // joint slew limit
  double arm_jog_rate_deg_s = 30.0;
  double grasp_epsilon = 0.05;     // m

  double dt() const { return 1.0 / tick_rate; }
  const SceneObject* find_object(const std::string& id) const;
  /// Checks the cross-field invariants; throws ValidationError.
  void validate() const;
};

/// `scenario v1` header line followed by one JSON document. Relative terrain
/// file paths resolve against `base_dir`.
Scenario read_scenario(std::istream& in, const std::string& base_dir = ".");
Scenario load_scenario(const std::string& path);

}  // namespace rescuesim::sim
