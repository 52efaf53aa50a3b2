#pragma once

#include <array>

namespace rescuesim {

enum class GripperCommand { hold, open, close };

/// Low-level actuator targets produced from one operator command.
struct ActuatorSetpoints {
  double track_left = 0.0;   // m/s
  double track_right = 0.0;  // m/s
  double flipper_rate = 0.0; // deg/s, positive lifts the flipper
  std::array<double, 6> arm_joint_targets{};  // deg
  GripperCommand gripper = GripperCommand::hold;

  bool operator==(const ActuatorSetpoints&) const = default;
};

}  // namespace rescuesim
