#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <vector>

namespace rescuesim::arm {

inline constexpr int kJoints = 6;

/// One Denavit-Hartenberg row plus the joint's limits and link mass.
/// Link transform: Rz(angle + offset) * Tz(d) * Tx(a) * Rx(twist).
struct LinkParams {
  double a = 0.0;           // m
  double twist_deg = 0.0;
  double d = 0.0;           // m
  double offset_deg = 0.0;
  double min_deg = -180.0;
  double max_deg = 180.0;
  double mass = 0.0;        // kg
};

struct ArmConfig {
  std::array<LinkParams, kJoints> links{};
  double gripper_mass = 0.0;
  /// Gripper reach point in the final link frame.
  Eigen::Vector3d reach = Eigen::Vector3d::Zero();
  /// Arm base origin in the chassis frame; the base axes are the chassis axes.
  Eigen::Vector3d mount = Eigen::Vector3d::Zero();

  double total_mass() const;
  /// Sum of |a| + |d| over the links plus the reach offset length.
  double total_reach() const;

  /// Throws ValidationError when a row has min >= max, a mass is negative,
  /// or any value is non-finite.
  void validate() const;
  /// validate() plus the shipped 4.3 kg mass budget.
  void validate_mass_budget(double expected_kg = 4.3) const;
};

/// Six revolute joints, 0.55 m reach from the shoulder, 4.3 kg including the
/// gripper servo.
ArmConfig default_arm_config();

struct JointState {
  std::array<double, kJoints> angles_deg{};
  std::array<double, kJoints> velocities_deg_s{};

  bool operator==(const JointState&) const = default;
};

struct EndEffectorPose {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();  // chassis frame, m
  Eigen::Matrix3d orientation = Eigen::Matrix3d::Identity();
};

/// Forward kinematics with every intermediate frame exposed.
struct ArmKinematics {
  /// frames[0] is the base frame, frames[i] the frame after link i (chassis frame).
  std::array<Eigen::Isometry3d, kJoints + 1> frames;
  EndEffectorPose pose;

  const Eigen::Vector3d origin(int i) const { return frames[static_cast<size_t>(i)].translation(); }
  /// Axis of joint i (1-based), i.e. the z axis of frame i - 1.
  Eigen::Vector3d joint_axis(int joint) const {
    return frames[static_cast<size_t>(joint - 1)].linear().col(2);
  }
};

/// Throws LimitError if any angle is outside its limits.
void check_limits(const ArmConfig& config, const JointState& joints);

Eigen::Isometry3d link_transform(const LinkParams& link, double angle_deg);

ArmKinematics forward_kinematics_full(const ArmConfig& config, const JointState& joints);
EndEffectorPose forward_kinematics(const ArmConfig& config, const JointState& joints);

/// Centre of mass of each link (midpoint of the segment between consecutive
/// frame origins) followed by the gripper reach point; chassis frame.
std::array<Eigen::Vector3d, kJoints + 1> link_mass_points(const ArmConfig& config,
                                                          const ArmKinematics& kin);

/// Mass-weighted centre of the arm (links + gripper), chassis frame.
Eigen::Vector3d arm_center_of_mass(const ArmConfig& config, const JointState& joints);

using Jacobian = Eigen::Matrix<double, 6, kJoints>;

/// Geometric Jacobian of the gripper reach point, rows 0-2 linear velocity
/// (m/s) and rows 3-5 angular velocity (rad/s) per joint rate in rad/s.
Jacobian jacobian(const ArmConfig& config, const JointState& joints);

struct IkOptions {
  double damping = 0.01;
  /// Residual norm below which damping shrinks proportionally.
  double damping_scale = 1e-2;
  double max_step_deg = 10.0;
  int max_iterations = 200;
  double position_tolerance = 1e-6;     // m
  double orientation_tolerance = 1e-4;  // rad
  /// Extra deterministic starting points tried when the caller's seed fails.
  int restarts = 32;
};

/// Angle of the rotation taking `current` to `target`, radians.
double orientation_error(const Eigen::Matrix3d& target, const Eigen::Matrix3d& current);

/// Damped least squares with per-iteration joint clamping. Returns joint
/// angles (velocities zero). Throws UnreachableTargetError with the best
/// residual when no attempt converges.
JointState inverse_kinematics(const ArmConfig& config, const EndEffectorPose& target,
                              const JointState& seed, const IkOptions& options = {});

/// Sum over links and the gripper of m (r x v) about the arm base origin.
Eigen::Vector3d angular_momentum(const ArmConfig& config, const JointState& joints);

/// Quasi-static power: sum_i |gravity torque at joint i * joint rate i| in W.
double power_estimate(const ArmConfig& config, const JointState& joints,
                      double gravity = 9.81);

}  // namespace rescuesim::arm
