#pragma once

// Station <-> robot wire protocol: newline-delimited JSON frames tagged with
// "v":1 and a "type" discriminator. See docs/protocol.md.

#include "rescuesim/actuators.hpp"
#include "rescuesim/arm.hpp"
#include "rescuesim/chassis.hpp"
#include "rescuesim/sensors.hpp"

#include <array>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace rescuesim::teleop {

inline constexpr int kProtocolVersion = 1;
inline constexpr int kChannels = 6;

/// ch1 throttle, ch2 steer, ch3 flipper, ch4 arm joint select, ch5 arm jog,
/// ch6 gripper. Each in [-1, 1].
struct CommandMessage {
  std::int64_t seq = 0;
  std::int64_t timestamp_ms = 0;
  std::array<double, kChannels> channels{};

  bool operator==(const CommandMessage&) const = default;
};

struct Heartbeat {
  std::int64_t seq = 0;
  std::int64_t timestamp_ms = 0;

  bool operator==(const Heartbeat&) const = default;
};

struct ChassisSummary {
  double x = 0.0;
  double y = 0.0;
  double elevation = 0.0;
  double heading_deg = 0.0;
  double pitch_deg = 0.0;
  double roll_deg = 0.0;
  double flipper_deg = 0.0;
  double track_left = 0.0;
  double track_right = 0.0;
  double payload_kg = 0.0;

  bool operator==(const ChassisSummary&) const = default;
};

struct StabilitySummary {
  double margin = 0.0;
  bool tipped = false;

  bool operator==(const StabilitySummary&) const = default;
};

struct Detection {
  std::string label;
  double confidence = 0.0;

  bool operator==(const Detection&) const = default;
};

struct TelemetryMessage {
  std::int64_t seq = 0;
  std::int64_t tick = 0;
  ChassisSummary chassis;
  StabilitySummary stability;
  sensors::SensorFrame sensors;
  std::vector<Detection> detections;
  std::string mission_status;
  bool safe_stop = false;

  bool operator==(const TelemetryMessage&) const = default;
};

enum class SessionRole { authoritative, observer };

/// Sent by the service when a session connects or its role changes.
struct SessionNotice {
  SessionRole role = SessionRole::observer;

  bool operator==(const SessionNotice&) const = default;
};

/// Command acknowledged but not applied.
struct RejectNotice {
  std::int64_t seq = 0;
  std::string reason;

  bool operator==(const RejectNotice&) const = default;
};

using Message = std::variant<CommandMessage, Heartbeat, TelemetryMessage, SessionNotice, RejectNotice>;

/// One frame including the trailing newline. Throws ValidationError for
/// messages that break their invariants (channel range, non-finite numbers).
std::string encode(const Message& msg);

/// Decodes one frame (trailing newline optional). Throws ParseError for
/// malformed frames and UnknownTypeError for an unrecognised "type".
Message decode(std::string_view frame);

/// Incremental decoder for a byte stream: bad lines are reported and skipped.
class StreamDecoder {
 public:
  struct Failure {
    std::string line;
    std::string error;
  };

  void feed(std::string_view bytes);
  std::vector<Message> take_messages();
  std::vector<Failure> take_failures();
  /// Bytes of an incomplete trailing line.
  const std::string& pending() const { return buffer_; }

 private:
  std::string buffer_;
  std::vector<Message> messages_;
  std::vector<Failure> failures_;
};

struct TranslateConfig {
  double v_max = 0.5;                  // m/s
  double flipper_rate_max = 30.0;      // deg/s
  double arm_jog_rate_deg_s = 30.0;    // at |ch5| = 1
  double dt = 0.02;                    // s, one tick
};

/// Joint (1..6) selected by channel 4.
int selected_joint(double ch4);

/// Maps one command onto actuator setpoints. Non-selected joints hold their
/// current angle; the selected one moves by ch5 * jog rate * dt within limits.
ActuatorSetpoints translate(const CommandMessage& cmd, const chassis::ChassisState& current,
                            const arm::JointState& joints, const arm::ArmConfig& arm_config,
                            const TranslateConfig& config = {});

enum class LinkStatus { normal, safe_stop };

/// safe_stop iff age > timeout. Throws ValidationError for age < 0 or timeout <= 0.
LinkStatus safe_stop_check(std::int64_t last_command_age_ms, std::int64_t timeout_ms);

/// Serialized hand-off between the network side and the tick loop. Keeps
/// only the newest command (latest wins) and notes heartbeats.
class CommandMailbox {
 public:
  enum class PostResult { accepted, stale };

  PostResult post(const CommandMessage& cmd);
  void heartbeat();

  struct Delivery {
    std::optional<CommandMessage> command;
    bool heartbeat = false;
  };
  /// Empties the mailbox.
  Delivery take();

 private:
  std::mutex mutex_;
  std::optional<CommandMessage> pending_;
  bool heartbeat_ = false;
  std::optional<std::int64_t> last_seq_;
};

}  // namespace rescuesim::teleop
