#include "rescuesim/sim.hpp"

#include "rescuesim/errors.hpp"
#include "wire.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

namespace rescuesim::sim {

using nlohmann::json;

namespace {

Eigen::Vector3d gripper_world(const WorldState& w, const Scenario& sc) {
  return chassis::body_to_world(w.chassis, arm::forward_kinematics(sc.arm, w.joints).position);
}

void fail(WorldState& w, std::string reason) {
  if (w.status != MissionState::running) return;
  w.status = MissionState::failed;
  w.fail_reason = std::move(reason);
}

bool in_zone(const chassis::ChassisState& c, const Eigen::Vector2d& center, double radius) {
  return (c.position - center).norm() <= radius;
}

bool goal_met(const WorldState& w, const Scenario& sc, const Goal& goal) {
  return std::visit(
      [&](const auto& g) -> bool {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, ReachZone>) {
          return in_zone(w.chassis, g.center, g.radius);
        } else if constexpr (std::is_same_v<T, DetectLabel>) {
          return std::any_of(w.detections.begin(), w.detections.end(),
                             [&](const auto& d) { return d.label == g.label; });
        } else if constexpr (std::is_same_v<T, GraspObject>) {
          return w.held_object == g.object_id;
        } else {
          // Bring back whatever the mission grasped last.
          std::optional<std::string> carried;
          for (size_t i = 0; i < w.mission_index && i < sc.mission.size(); ++i) {
            if (const auto* gr = std::get_if<GraspObject>(&sc.mission[i])) carried = gr->object_id;
          }
          return in_zone(w.chassis, g.center, g.radius) && (!carried || w.held_object == carried);
        }
      },
      goal);
}

teleop::TelemetryMessage assemble_telemetry(const WorldState& w, const Scenario& sc,
                                            std::int64_t tick) {
  teleop::TelemetryMessage t;
  t.seq = tick;
  t.tick = tick;
  const auto& c = w.chassis;
  t.chassis = {c.position.x(), c.position.y(), c.elevation, c.heading_deg, c.pitch_deg, c.roll_deg,
               c.flipper_deg, c.track_speed_left, c.track_speed_right, c.payload_kg};
  t.stability = {w.stability.margin, w.stability.tipped};
  t.sensors = w.sensors;
  t.detections = w.detections;
  t.mission_status = mission_status_text(w, sc);
  t.safe_stop = w.safe_stop;
  return t;
}

const char* state_name(MissionState s) {
  switch (s) {
    case MissionState::running: return "running";
    case MissionState::success: return "success";
    case MissionState::failed: return "failed";
  }
  return "?";
}

}  // namespace

std::int64_t tick_time_ms(std::int64_t tick, double tick_rate) {
  return static_cast<std::int64_t>(std::floor(static_cast<double>(tick) * 1000.0 / tick_rate + 1e-9));
}

std::string mission_status_text(const WorldState& w, const Scenario& sc) {
  switch (w.status) {
    case MissionState::success: return "success";
    case MissionState::failed: return "fail: " + w.fail_reason;
    case MissionState::running: break;
  }
  if (w.mission_index >= sc.mission.size()) return "running";
  return "running: " + goal_name(sc.mission[w.mission_index]) + " (" +
         std::to_string(w.mission_index + 1) + "/" + std::to_string(sc.mission.size()) + ")";
}

WorldState initial_world(const Scenario& sc) {
  WorldState w;
  w.rng.seed(sc.seed);
  w.chassis = chassis::passive_conform(
      chassis::initial_state(sc.chassis, sc.start_position, sc.start_heading_deg), sc.terrain,
      sc.chassis);
  w.joints = sc.arm_start;
  w.objects = sc.objects;
  w.stability = chassis::compute_stability(w.chassis, sc.chassis, sc.terrain, sc.arm, w.joints);
  auto quiet = sc.sensors;
  quiet.noise = false;
  w.sensors = sensors::sample_all(0, w.chassis, sc.terrain, sc.environment, quiet, w.rng);
  w.telemetry = assemble_telemetry(w, sc, 0);
  return w;
}

StubDetection stub_detect(WorldState& w, const Scenario& sc) {
  const auto& d = sc.detector;
  const double h = w.chassis.heading_deg * std::numbers::pi / 180.0;
  const Eigen::Vector2d fwd(std::cos(h), std::sin(h));
  const Eigen::Vector3d camera =
      chassis::body_to_world(w.chassis, {d.camera_forward, 0.0, d.camera_height});

  struct Seen {
    double distance;
    const SceneObject* object;
    bool visible;
  };
  std::vector<Seen> seen;
  for (const auto& o : w.objects) {
    if (w.held_object == o.id) continue;
    const Eigen::Vector2d rel = o.position.head<2>() - w.chassis.position;
    const double dist = rel.norm();
    if (dist > d.range || rel.dot(fwd) <= 0.0) continue;
    // Aim slightly above the object's base so its own footing does not occlude it.
    const Eigen::Vector3d target = o.position + Eigen::Vector3d(0.0, 0.0, 0.05);
    const Eigen::Vector3d ray = target - camera;
    const double len = ray.norm();
    bool visible = true;
    if (len > 1e-9) {
      const auto hit = terrain::raycast(sc.terrain, camera, ray / len, len);
      visible = !hit || *hit >= len - 0.02;
    }
    seen.push_back({dist, &o, visible});
  }
  std::stable_sort(seen.begin(), seen.end(),
                   [](const Seen& a, const Seen& b) { return a.distance < b.distance; });

  StubDetection out;
  out.record.frame_id = w.tick;
  if (!seen.empty()) out.record.ground_truth = seen.front().object->label;
  for (const auto& s : seen) {
    if (!s.visible) continue;
    out.detections.push_back({s.object->label, std::max(0.0, 1.0 - s.distance / d.range)});
    if (!out.record.prediction) out.record.prediction = s.object->label;
  }
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  out.record.latency_ms = d.latency_mean_ms + d.latency_jitter_ms * jitter(w.rng);
  return out;
}

WorldState step(WorldState w, const Scenario& sc, const Inbound& inbound) {
  if (w.status != MissionState::running) return w;
  const std::int64_t t = w.tick;
  const double dt = sc.dt();
  const std::int64_t now = tick_time_ms(t, sc.tick_rate);

  // Link supervision; stale commands are ignored and do not refresh the link.
  if (inbound.command && (!w.held_command || inbound.command->seq > w.held_command->seq)) {
    w.held_command = inbound.command;
    w.last_refresh_ms = now;
  }
  if (inbound.heartbeat) w.last_refresh_ms = now;
  w.safe_stop = teleop::safe_stop_check(now - w.last_refresh_ms, sc.cmd_timeout_ms) ==
                teleop::LinkStatus::safe_stop;

  ActuatorSetpoints sp;
  sp.arm_joint_targets = w.joints.angles_deg;
  if (!w.safe_stop && w.held_command) {
    teleop::TranslateConfig tc{sc.chassis.v_max, sc.chassis.flipper_rate_max_deg_s,
                               sc.arm_jog_rate_deg_s, dt};
    sp = teleop::translate(*w.held_command, w.chassis, w.joints, sc.arm, tc);
  }

  try {
    w.chassis = chassis::step_locomotion(w.chassis, sp, sc.terrain, sc.chassis, dt);
  } catch (const BoundsError&) {
    w.chassis.track_speed_left = 0.0;
    w.chassis.track_speed_right = 0.0;
    fail(w, "out-of-bounds");
  }

  // Arm slews toward its targets.
  const double max_step = sc.arm_rate_deg_s * dt;
  for (size_t j = 0; j < static_cast<size_t>(arm::kJoints); ++j) {
    const auto& link = sc.arm.links[j];
    const double target = std::clamp(sp.arm_joint_targets[j], link.min_deg, link.max_deg);
    const double delta = std::clamp(target - w.joints.angles_deg[j], -max_step, max_step);
    w.joints.angles_deg[j] += delta;
    w.joints.velocities_deg_s[j] = delta / dt;
  }

  const Eigen::Vector3d grip = gripper_world(w, sc);
  if (sp.gripper == GripperCommand::close && w.gripper == GripperState::open) {
    w.gripper = GripperState::closed;
    const SceneObject* best = nullptr;
    double best_d = sc.grasp_epsilon;
    for (const auto& o : w.objects) {
      const double dist = (o.position - grip).norm();
      if (o.graspable && dist <= best_d) {
        best = &o;
        best_d = dist;
      }
    }
    if (best) w.held_object = best->id;
  } else if (sp.gripper == GripperCommand::open && w.gripper == GripperState::closed) {
    w.gripper = GripperState::open;
    w.held_object.reset();
  }
  w.chassis.payload_kg = 0.0;
  for (auto& o : w.objects) {
    if (w.held_object == o.id) {
      o.position = grip;
      w.chassis.payload_kg = o.mass_kg;
    }
  }

  w.stability = chassis::compute_stability(w.chassis, sc.chassis, sc.terrain, sc.arm, w.joints);
  if (w.stability.tipped) fail(w, "tip-over");
  if (!chassis::check_climbable(chassis::contact_plane_slope(w.chassis), sc.chassis.flipper_max_deg,
                                w.chassis.payload_kg, sc.chassis)) {
    fail(w, w.chassis.payload_kg > sc.chassis.payload_max_kg ? "payload-limit" : "climb-limit");
  }

  w.sensors = sensors::sample_all(t, w.chassis, sc.terrain, sc.environment, sc.sensors, w.rng);
  auto det = stub_detect(w, sc);
  w.detections = std::move(det.detections);
  w.detection_record = std::move(det.record);

  if (w.status == MissionState::running) {
    if (w.mission_index < sc.mission.size() && goal_met(w, sc, sc.mission[w.mission_index])) {
      ++w.mission_index;
    }
    if (w.mission_index >= sc.mission.size()) w.status = MissionState::success;
  }
  if (w.status != MissionState::running) w.outcome_tick = t;

  w.telemetry = assemble_telemetry(w, sc, t);
  w.tick = t + 1;
  return w;
}

Inbound CommandStream::at(std::int64_t tick) const {
  auto it = deliveries.find(tick);
  return it == deliveries.end() ? Inbound{} : it->second;
}

CommandStream read_command_stream(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing cmdstream header", "");
  CommandStream s;
  {
    std::istringstream hs(line);
    std::string magic, version;
    if (!(hs >> magic >> version >> s.duration_ticks) || magic != "cmdstream" || version != "v1" ||
        s.duration_ticks < 0) {
      throw ParseError("bad cmdstream header", line);
    }
  }
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::int64_t tick = 0;
    if (!(ls >> tick) || tick < 0) throw ParseError("cmdstream line needs a tick", line);
    std::string frame;
    std::getline(ls, frame);
    const auto msg = teleop::decode(frame);
    auto& slot = s.deliveries[tick];
    if (const auto* c = std::get_if<teleop::CommandMessage>(&msg)) {
      slot.command = *c;
    } else if (std::holds_alternative<teleop::Heartbeat>(msg)) {
      slot.heartbeat = true;
    } else {
      throw ParseError("cmdstream carries only command and heartbeat frames", line);
    }
  }
  return s;
}

CommandStream load_command_stream(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open command stream " + path);
  return read_command_stream(in);
}

void write_command_stream(std::ostream& out, const CommandStream& s) {
  out << "cmdstream v1 " << s.duration_ticks << '\n';
  std::int64_t hb_seq = 0;
  for (const auto& [tick, in] : s.deliveries) {
    if (in.command) out << tick << ' ' << teleop::encode(*in.command);
    if (in.heartbeat) out << tick << ' ' << teleop::encode(teleop::Heartbeat{hb_seq++, tick_time_ms(tick, 50.0)});
  }
}

std::string TickLog::serialize() const {
  std::string out = "ticklog v1 " + scenario_name + "\n";
  for (const auto& l : lines) {
    out += l;
    out += '\n';
  }
  return out;
}

TickLog read_tick_log(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("ticklog v1 ", 0) != 0) {
    throw ParseError("bad ticklog header", line);
  }
  TickLog log;
  log.scenario_name = line.substr(11);
  while (std::getline(in, line)) {
    if (!line.empty()) log.lines.push_back(line);
  }
  return log;
}

TickLog load_tick_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open tick log " + path);
  return read_tick_log(in);
}

std::string tick_line(const WorldState& w, const Inbound& inbound) {
  const auto& c = w.chassis;
  json joints = json::array();
  json rates = json::array();
  for (size_t i = 0; i < static_cast<size_t>(arm::kJoints); ++i) {
    joints.push_back(w.joints.angles_deg[i]);
    rates.push_back(w.joints.velocities_deg_s[i]);
  }
  json held = w.held_object ? json(*w.held_object) : json(nullptr);
  json held_pos = nullptr;
  for (const auto& o : w.objects) {
    if (w.held_object == o.id) held_pos = {o.position.x(), o.position.y(), o.position.z()};
  }
  json world = {
      {"chassis",
       {{"x", c.position.x()},
        {"y", c.position.y()},
        {"elevation", c.elevation},
        {"heading_deg", c.heading_deg},
        {"pitch_deg", c.pitch_deg},
        {"roll_deg", c.roll_deg},
        {"flipper_deg", c.flipper_deg},
        {"flipper_command_deg", c.flipper_command_deg},
        {"flipper_contact_x", c.flipper_contact_x ? json(*c.flipper_contact_x) : json(nullptr)},
        {"track_left", c.track_speed_left},
        {"track_right", c.track_speed_right},
        {"payload_kg", c.payload_kg}}},
      {"joints_deg", joints},
      {"joint_rates_deg_s", rates},
      {"gripper", w.gripper == GripperState::closed ? "closed" : "open"},
      {"held_object", held},
      {"held_position", held_pos},
      {"com", {w.stability.com.x(), w.stability.com.y(), w.stability.com.z()}},
      {"mission_index", w.mission_index},
      {"safe_stop", w.safe_stop},
      {"status", state_name(w.status)},
      {"fail_reason", w.fail_reason},
  };
  json detection = nullptr;
  if (w.detection_record) {
    const auto& r = *w.detection_record;
    detection = {{"frame_id", r.frame_id},
                 {"gt", r.ground_truth ? json(*r.ground_truth) : json(nullptr)},
                 {"pred", r.prediction ? json(*r.prediction) : json(nullptr)},
                 {"latency_ms", r.latency_ms}};
  }
  json line = {{"tick", w.telemetry.tick},
               {"cmd", inbound.command ? wire::command_body(*inbound.command) : json(nullptr)},
               {"heartbeat", inbound.heartbeat},
               {"world", world},
               {"detection", detection},
               {"telemetry", wire::telemetry_body(w.telemetry)}};
  return line.dump();
}

Inbound inbound_from_line(const std::string& line) {
  const json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParseError("tick log line is not JSON", line);
  Inbound in;
  in.heartbeat = wire::boolean(j, "heartbeat", line);
  const json& cmd = wire::member(j, "cmd", line);
  if (!cmd.is_null()) {
    in.command = std::get<teleop::CommandMessage>(wire::from_json(cmd, line));
  }
  return in;
}

MissionResult run_mission(const Scenario& sc, const CommandStream& stream) {
  MissionResult r;
  r.log.scenario_name = sc.name;
  r.detections.descriptor = {"SIM", "simulated stub detector", ""};
  WorldState w = initial_world(sc);
  for (std::int64_t t = 0; t < stream.duration_ticks && w.status == MissionState::running; ++t) {
    const Inbound in = stream.at(t);
    w = step(std::move(w), sc, in);
    r.log.lines.push_back(tick_line(w, in));
    r.detections.records.push_back(*w.detection_record);
  }
  if (w.status == MissionState::running) {
    w.status = MissionState::failed;
    w.fail_reason = "goals-unmet";
    w.outcome_tick = w.tick - 1;
  }
  r.outcome = {w.status, w.fail_reason, w.outcome_tick};
  r.final_world = std::move(w);
  return r;
}

TickLog replay(const TickLog& log, const Scenario& sc) {
  TickLog out;
  out.scenario_name = sc.name;
  WorldState w = initial_world(sc);
  for (size_t i = 0; i < log.lines.size(); ++i) {
    const auto tick = static_cast<std::int64_t>(i);
    if (w.status != MissionState::running) {
      throw ReplayMismatchError("replay ended before the recorded log", tick);
    }
    const Inbound in = inbound_from_line(log.lines[i]);
    w = step(std::move(w), sc, in);
    out.lines.push_back(tick_line(w, in));
    if (out.lines.back() != log.lines[i]) {
      throw ReplayMismatchError("replay diverges at tick " + std::to_string(tick), tick);
    }
  }
  return out;
}

}  // namespace rescuesim::sim
