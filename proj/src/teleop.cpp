#include "rescuesim/teleop.hpp"

#include "rescuesim/errors.hpp"
#include "wire.hpp"

#include <algorithm>
#include <cmath>

namespace rescuesim {
namespace wire {

const json& member(const json& j, const char* key, const std::string& line) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(std::string("missing field '") + key + "'", line);
  return *it;
}

double number(const json& j, const char* key, const std::string& line) {
  const json& v = member(j, key, line);
  if (!v.is_number()) throw ParseError(std::string("field '") + key + "' must be a number", line);
  return v.get<double>();
}

std::int64_t integer(const json& j, const char* key, const std::string& line) {
  const json& v = member(j, key, line);
  if (!v.is_number_integer()) {
    throw ParseError(std::string("field '") + key + "' must be an integer", line);
  }
  return v.get<std::int64_t>();
}

bool boolean(const json& j, const char* key, const std::string& line) {
  const json& v = member(j, key, line);
  if (!v.is_boolean()) throw ParseError(std::string("field '") + key + "' must be a boolean", line);
  return v.get<bool>();
}

std::string text(const json& j, const char* key, const std::string& line) {
  const json& v = member(j, key, line);
  if (!v.is_string()) throw ParseError(std::string("field '") + key + "' must be a string", line);
  return v.get<std::string>();
}

namespace {

void finite_or_throw(double v, const char* what) {
  if (!std::isfinite(v)) throw ValidationError(std::string(what) + " must be finite");
}

json chassis_json(const teleop::ChassisSummary& c) {
  for (double v : {c.x, c.y, c.elevation, c.heading_deg, c.pitch_deg, c.roll_deg, c.flipper_deg,
                   c.track_left, c.track_right, c.payload_kg}) {
    finite_or_throw(v, "telemetry chassis field");
  }
  return {{"x", c.x},
          {"y", c.y},
          {"elevation", c.elevation},
          {"heading_deg", c.heading_deg},
          {"pitch_deg", c.pitch_deg},
          {"roll_deg", c.roll_deg},
          {"flipper_deg", c.flipper_deg},
          {"track_left", c.track_left},
          {"track_right", c.track_right},
          {"payload_kg", c.payload_kg}};
}

teleop::ChassisSummary chassis_from(const json& j, const std::string& l) {
  return {number(j, "x", l),           number(j, "y", l),          number(j, "elevation", l),
          number(j, "heading_deg", l), number(j, "pitch_deg", l),  number(j, "roll_deg", l),
          number(j, "flipper_deg", l), number(j, "track_left", l), number(j, "track_right", l),
          number(j, "payload_kg", l)};
}

json sensors_json(const sensors::SensorFrame& f) {
  for (double v : {f.temperature_c, f.humidity_pct, f.gas_ppm, f.heading_deg}) {
    finite_or_throw(v, "telemetry sensor field");
  }
  if (f.ultrasonic_m) finite_or_throw(*f.ultrasonic_m, "ultrasonic_m");
  return {{"tick", f.tick},
          {"ultrasonic_m", f.ultrasonic_m ? json(*f.ultrasonic_m) : json(nullptr)},
          {"temperature_c", f.temperature_c},
          {"humidity_pct", f.humidity_pct},
          {"gas_ppm", f.gas_ppm},
          {"heading_deg", f.heading_deg}};
}

sensors::SensorFrame sensors_from(const json& j, const std::string& l) {
  sensors::SensorFrame f;
  f.tick = integer(j, "tick", l);
  const json& u = member(j, "ultrasonic_m", l);
  if (u.is_null()) {
    f.ultrasonic_m.reset();
  } else if (u.is_number()) {
    f.ultrasonic_m = u.get<double>();
  } else {
    throw ParseError("field 'ultrasonic_m' must be a number or null", l);
  }
  f.temperature_c = number(j, "temperature_c", l);
  f.humidity_pct = number(j, "humidity_pct", l);
  f.gas_ppm = number(j, "gas_ppm", l);
  f.heading_deg = number(j, "heading_deg", l);
  return f;
}

const char* role_name(teleop::SessionRole r) {
  return r == teleop::SessionRole::authoritative ? "authoritative" : "observer";
}

}  // namespace

json command_body(const teleop::CommandMessage& c) {
  for (double ch : c.channels) {
    if (!(ch >= -1.0 && ch <= 1.0)) throw ValidationError("command channels must be in [-1, 1]");
  }
  return {{"v", teleop::kProtocolVersion},
          {"type", "command"},
          {"seq", c.seq},
          {"timestamp_ms", c.timestamp_ms},
          {"channels", c.channels}};
}

json telemetry_body(const teleop::TelemetryMessage& t) {
  json dets = json::array();
  for (const auto& d : t.detections) {
    finite_or_throw(d.confidence, "detection confidence");
    dets.push_back({{"label", d.label}, {"confidence", d.confidence}});
  }
  finite_or_throw(t.stability.margin, "stability margin");
  return {{"v", teleop::kProtocolVersion},
          {"type", "telemetry"},
          {"seq", t.seq},
          {"tick", t.tick},
          {"chassis", chassis_json(t.chassis)},
          {"stability", {{"margin", t.stability.margin}, {"tipped", t.stability.tipped}}},
          {"sensors", sensors_json(t.sensors)},
          {"detections", dets},
          {"mission_status", t.mission_status},
          {"safe_stop", t.safe_stop}};
}

json to_json(const teleop::Message& msg) {
  return std::visit(
      [](const auto& m) -> json {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, teleop::CommandMessage>) {
          return command_body(m);
        } else if constexpr (std::is_same_v<T, teleop::Heartbeat>) {
          return {{"v", teleop::kProtocolVersion},
                  {"type", "heartbeat"},
                  {"seq", m.seq},
                  {"timestamp_ms", m.timestamp_ms}};
        } else if constexpr (std::is_same_v<T, teleop::TelemetryMessage>) {
          return telemetry_body(m);
        } else if constexpr (std::is_same_v<T, teleop::SessionNotice>) {
          return {{"v", teleop::kProtocolVersion}, {"type", "session"}, {"role", role_name(m.role)}};
        } else {
          return {{"v", teleop::kProtocolVersion},
                  {"type", "reject"},
                  {"seq", m.seq},
                  {"reason", m.reason}};
        }
      },
      msg);
}

teleop::Message from_json(const json& j, const std::string& l) {
  if (!j.is_object()) throw ParseError("frame is not a JSON object", l);
  if (integer(j, "v", l) != teleop::kProtocolVersion) throw ParseError("unsupported version", l);
  const std::string type = text(j, "type", l);

  if (type == "command") {
    teleop::CommandMessage c;
    c.seq = integer(j, "seq", l);
    c.timestamp_ms = integer(j, "timestamp_ms", l);
    const json& ch = member(j, "channels", l);
    if (!ch.is_array() || ch.size() != teleop::kChannels) {
      throw ParseError("command needs exactly 6 channels", l);
    }
    for (size_t i = 0; i < c.channels.size(); ++i) {
      if (!ch[i].is_number()) throw ParseError("channel values must be numbers", l);
      c.channels[i] = ch[i].get<double>();
      if (!(c.channels[i] >= -1.0 && c.channels[i] <= 1.0)) {
        throw ParseError("channel value outside [-1, 1]", l);
      }
    }
    return c;
  }
  if (type == "heartbeat") {
    return teleop::Heartbeat{integer(j, "seq", l), integer(j, "timestamp_ms", l)};
  }
  if (type == "telemetry") {
    teleop::TelemetryMessage t;
    t.seq = integer(j, "seq", l);
    t.tick = integer(j, "tick", l);
    t.chassis = chassis_from(member(j, "chassis", l), l);
    const json& st = member(j, "stability", l);
    t.stability = {number(st, "margin", l), boolean(st, "tipped", l)};
    t.sensors = sensors_from(member(j, "sensors", l), l);
    const json& dets = member(j, "detections", l);
    if (!dets.is_array()) throw ParseError("detections must be an array", l);
    for (const auto& d : dets) t.detections.push_back({text(d, "label", l), number(d, "confidence", l)});
    t.mission_status = text(j, "mission_status", l);
    t.safe_stop = boolean(j, "safe_stop", l);
    return t;
  }
  if (type == "session") {
    const std::string role = text(j, "role", l);
    if (role == "authoritative") return teleop::SessionNotice{teleop::SessionRole::authoritative};
    if (role == "observer") return teleop::SessionNotice{teleop::SessionRole::observer};
    throw ParseError("unknown session role", l);
  }
  if (type == "reject") {
    return teleop::RejectNotice{integer(j, "seq", l), text(j, "reason", l)};
  }
  throw UnknownTypeError("unknown frame type '" + type + "'", l);
}

}  // namespace wire

namespace teleop {

std::string encode(const Message& msg) { return wire::to_json(msg).dump() + '\n'; }

Message decode(std::string_view frame) {
  std::string line(frame);
  if (!line.empty() && line.back() == '\n') line.pop_back();
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.find('\n') != std::string::npos) throw ParseError("frame spans several lines", line);
  nlohmann::json j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw ParseError("malformed JSON frame", line);
  return wire::from_json(j, line);
}

void StreamDecoder::feed(std::string_view bytes) {
  buffer_.append(bytes);
  size_t start = 0;
  for (size_t nl = buffer_.find('\n'); nl != std::string::npos; nl = buffer_.find('\n', start)) {
    const std::string line = buffer_.substr(start, nl - start);
    start = nl + 1;
    if (line.empty() || line == "\r") continue;
    try {
      messages_.push_back(decode(line));
    } catch (const ParseError& e) {
      failures_.push_back({e.line(), e.what()});
    }
  }
  buffer_.erase(0, start);
}

std::vector<Message> StreamDecoder::take_messages() { return std::exchange(messages_, {}); }

std::vector<StreamDecoder::Failure> StreamDecoder::take_failures() {
  return std::exchange(failures_, {});
}

int selected_joint(double ch4) {
  const double bin = std::floor((std::clamp(ch4, -1.0, 1.0) + 1.0) / 2.0 * arm::kJoints);
  return static_cast<int>(std::clamp(bin, 0.0, static_cast<double>(arm::kJoints - 1))) + 1;
}

ActuatorSetpoints translate(const CommandMessage& cmd, const chassis::ChassisState&,
                            const arm::JointState& joints, const arm::ArmConfig& arm_config,
                            const TranslateConfig& config) {
  const auto& ch = cmd.channels;
  ActuatorSetpoints out;
  out.track_left = config.v_max * std::clamp(ch[0] + ch[1], -1.0, 1.0);
  out.track_right = config.v_max * std::clamp(ch[0] - ch[1], -1.0, 1.0);
  out.flipper_rate = ch[2] * config.flipper_rate_max;

  out.arm_joint_targets = joints.angles_deg;
  const auto j = static_cast<size_t>(selected_joint(ch[3]) - 1);
  const auto& link = arm_config.links[j];
  out.arm_joint_targets[j] = std::clamp(
      joints.angles_deg[j] + ch[4] * config.arm_jog_rate_deg_s * config.dt, link.min_deg, link.max_deg);

  if (ch[5] > 0.5) {
    out.gripper = GripperCommand::close;
  } else if (ch[5] < -0.5) {
    out.gripper = GripperCommand::open;
  } else {
    out.gripper = GripperCommand::hold;
  }
  return out;
}

LinkStatus safe_stop_check(std::int64_t last_command_age_ms, std::int64_t timeout_ms) {
  if (last_command_age_ms < 0 || timeout_ms <= 0) {
    throw ValidationError("safe_stop_check needs age >= 0 and timeout > 0");
  }
  return last_command_age_ms > timeout_ms ? LinkStatus::safe_stop : LinkStatus::normal;
}

CommandMailbox::PostResult CommandMailbox::post(const CommandMessage& cmd) {
  std::lock_guard lock(mutex_);
  if (last_seq_ && cmd.seq <= *last_seq_) return PostResult::stale;
  last_seq_ = cmd.seq;
  pending_ = cmd;
  return PostResult::accepted;
}

void CommandMailbox::heartbeat() {
  std::lock_guard lock(mutex_);
  heartbeat_ = true;
}

CommandMailbox::Delivery CommandMailbox::take() {
  std::lock_guard lock(mutex_);
  Delivery d{std::exchange(pending_, std::nullopt), std::exchange(heartbeat_, false)};
  return d;
}

}  // namespace teleop
}  // namespace rescuesim
