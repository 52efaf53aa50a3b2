#pragma once

#include "rescuesim/arm.hpp"
#include "rescuesim/chassis.hpp"
#include "rescuesim/odm.hpp"
#include "rescuesim/scenario.hpp"
#include "rescuesim/sensors.hpp"
#include "rescuesim/teleop.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace rescuesim::sim {

enum class GripperState { open, closed };
enum class MissionState { running, success, failed };

struct WorldState {
  std::int64_t tick = 0;  // index of the next tick to run
  chassis::ChassisState chassis;
  arm::JointState joints;
  GripperState gripper = GripperState::open;
  std::optional<std::string> held_object;
  std::vector<SceneObject> objects;  // current positions
  sensors::SensorFrame sensors;
  chassis::StabilityReport stability;
  std::size_t mission_index = 0;
  bool safe_stop = false;

  // Command link: zero-order hold of the newest accepted command.
  std::optional<teleop::CommandMessage> held_command;
  std::int64_t last_refresh_ms = 0;

  MissionState status = MissionState::running;
  std::string fail_reason;
  std::int64_t outcome_tick = -1;

  std::vector<teleop::Detection> detections;
  std::optional<odm::DetectionRecord> detection_record;  // produced by the last tick
  teleop::TelemetryMessage telemetry;                    // produced by the last tick

  std::mt19937_64 rng;
};

WorldState initial_world(const Scenario& scenario);

/// What the link delivered for one tick.
struct Inbound {
  std::optional<teleop::CommandMessage> command;
  bool heartbeat = false;

  bool operator==(const Inbound&) const = default;
};

/// Sim time at the start of `tick`, whole milliseconds.
std::int64_t tick_time_ms(std::int64_t tick, double tick_rate);

/// One fixed-order tick: link check, translate, locomotion + conformation, arm
/// slew and gripper, stability, climb/payload gate, sensors, detection,
/// mission goals, telemetry. A world that is no longer running is returned
/// unchanged.
WorldState step(WorldState world, const Scenario& scenario, const Inbound& inbound);

struct StubDetection {
  std::vector<teleop::Detection> detections;  // nearest first
  odm::DetectionRecord record;
};

/// Draws the latency from `world.rng`.
StubDetection stub_detect(WorldState& world, const Scenario& scenario);

std::string mission_status_text(const WorldState& world, const Scenario& scenario);

/// Recorded operator input: what arrives on each tick, for `duration_ticks`.
struct CommandStream {
  std::int64_t duration_ticks = 0;
  std::map<std::int64_t, Inbound> deliveries;

  Inbound at(std::int64_t tick) const;
};

// `cmdstream v1 <duration_ticks>` then `<tick> <protocol frame>` lines. Several
// commands on one tick: the last one wins.
CommandStream read_command_stream(std::istream& in);
CommandStream load_command_stream(const std::string& path);
void write_command_stream(std::ostream& out, const CommandStream& stream);

/// `ticklog v1 <scenario name>` header plus one JSON line per tick.
struct TickLog {
  std::string scenario_name;
  std::vector<std::string> lines;

  std::string serialize() const;
  bool operator==(const TickLog&) const = default;
};

TickLog read_tick_log(std::istream& in);
TickLog load_tick_log(const std::string& path);

/// Serialized log line for the tick just completed by `world`.
std::string tick_line(const WorldState& world, const Inbound& inbound);

/// Inbound recovered from a log line.
Inbound inbound_from_line(const std::string& line);

struct Outcome {
  MissionState state = MissionState::running;
  std::string reason;  // failure reason: tip-over, climb-limit, payload-limit, out-of-bounds, goals-unmet
  std::int64_t tick = -1;

  bool success() const { return state == MissionState::success; }
};

struct MissionResult {
  Outcome outcome;
  TickLog log;
  odm::DatasetLog detections;
  WorldState final_world;
};

/// Runs until the mission ends or the stream's duration elapses.
MissionResult run_mission(const Scenario& scenario, const CommandStream& stream);

/// Re-runs the commands recorded in `log` and checks every line matches.
/// Throws ReplayMismatchError at the first divergent tick.
TickLog replay(const TickLog& log, const Scenario& scenario);

}  // namespace rescuesim::sim
