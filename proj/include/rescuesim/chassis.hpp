#pragma once

#include "rescuesim/actuators.hpp"
#include "rescuesim/arm.hpp"
#include "rescuesim/terrain.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <vector>

namespace rescuesim::chassis {

/// Two-body tracked chassis. The body frame has its origin on the contact
/// plane below the body centre, x forward, y left, z up. The front body
/// (flipper) rotates about a lateral hinge axis at (hinge_x, *, 0).
struct ChassisConfig {
  double length = 0.450;  // m, full track footprint with the flipper lowered
  double width = 0.270;
  double height = 0.210;

  // Stored in grams so the budget sums exactly.
  std::int64_t mass_arm_g = 4300;
  std::int64_t mass_tracks_g = 18700;
  std::int64_t mass_others_g = 630;

  double flipper_max_deg = 45.0;
  double climb_max_deg = 40.0;
  double payload_max_kg = 12.0;

  double com_height = 0.105;   // CoM height of the unloaded robot at home pose
  double front_fraction = 0.5; // share of track mass carried by the front body
  double hinge_x = 0.0;        // m from body centre

  double v_max = 0.5;                  // m/s per track
  double flipper_rate_max_deg_s = 30.0;
  double track_width_factor = 1.0;     // effective skid-steer width / width

  double mass_arm() const { return static_cast<double>(mass_arm_g) / 1000.0; }
  double mass_tracks() const { return static_cast<double>(mass_tracks_g) / 1000.0; }
  double mass_others() const { return static_cast<double>(mass_others_g) / 1000.0; }
  /// 23.63 kg for the shipped configuration.
  double total_mass() const {
    return static_cast<double>(mass_arm_g + mass_tracks_g + mass_others_g) / 1000.0;
  }
  /// Hinge to front edge of the footprint.
  double flipper_length() const { return 0.5 * length - hinge_x; }

  void validate() const;
};

struct ChassisState {
  Eigen::Vector2d position = Eigen::Vector2d::Zero();  // world x, y
  double elevation = 0.0;     // world z of the body origin
  double heading_deg = 0.0;   // [0, 360), counter-clockwise from +x
  double pitch_deg = 0.0;     // nose up positive
  double roll_deg = 0.0;      // left side up positive
  double flipper_deg = 0.0;   // actual hinge rotation alpha, [0, flipper_max]
  double flipper_command_deg = 0.0;  // motor lift setpoint
  double track_speed_left = 0.0;
  double track_speed_right = 0.0;
  double payload_kg = 0.0;
  /// Body-frame x of the flipper's ground contact, or nullopt when the
  /// flipper is in the air.
  std::optional<double> flipper_contact_x;

  bool operator==(const ChassisState&) const = default;
};

/// State resting flat with the flipper lowered and in contact at its tip.
ChassisState initial_state(const ChassisConfig& config, Eigen::Vector2d position,
                           double heading_deg);

struct StabilityReport {
  Eigen::Vector3d com = Eigen::Vector3d::Zero();        // body frame
  Eigen::Vector2d zmp_projection = Eigen::Vector2d::Zero();  // body contact plane
  std::vector<Eigen::Vector2d> support_polygon;         // counter-clockwise hull
  double margin = 0.0;  // m, positive inside
  bool tipped = false;
};

enum class TipDirection { pitch, roll };

Eigen::Matrix3d body_rotation(const ChassisState& state);
Eigen::Vector3d body_to_world(const ChassisState& state, const Eigen::Vector3d& body_point);

/// Flipper tip edge (left, right) in the body frame for hinge rotation alpha.
std::array<Eigen::Vector3d, 2> front_contact_edge(const ChassisConfig& config, double alpha_deg);

/// Conform pitch, roll, elevation and alpha to the terrain.
ChassisState passive_conform(const ChassisState& state, const terrain::TerrainGrid& terrain,
                             const ChassisConfig& config);

/// Whole-robot centre of mass in the body frame, payload at the gripper.
Eigen::Vector3d compute_com(const ChassisState& state, const ChassisConfig& config,
                            const arm::ArmConfig& arm_config, const arm::JointState& joints);

StabilityReport compute_stability(const ChassisState& state, const ChassisConfig& config,
                                  const terrain::TerrainGrid& terrain,
                                  const arm::ArmConfig& arm_config,
                                  const arm::JointState& joints);

/// Signed distance from `point` to the boundary of convex `polygon`
/// (counter-clockwise), positive inside.
double signed_margin(const std::vector<Eigen::Vector2d>& polygon, const Eigen::Vector2d& point);

/// Convex hull, counter-clockwise, collinear points dropped.
std::vector<Eigen::Vector2d> convex_hull(std::vector<Eigen::Vector2d> points);

bool check_climbable(double slope_deg, double flipper_max_deg, double payload_kg,
                     const ChassisConfig& config);

/// Skid-steer update followed by passive conformation. Throws BoundsError
/// when the new footprint leaves the terrain; the caller keeps the old state.
ChassisState step_locomotion(const ChassisState& state, const ActuatorSetpoints& setpoints,
                             const terrain::TerrainGrid& terrain, const ChassisConfig& config,
                             double dt);

double tip_over_angle(const ChassisConfig& config, TipDirection direction);

/// Inclination of the body contact plane from horizontal, degrees.
double contact_plane_slope(const ChassisState& state);

}  // namespace rescuesim::chassis
