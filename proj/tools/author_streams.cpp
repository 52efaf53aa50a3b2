// author_streams: drive a scenario's mission with a simple closed-loop
// operator model and write the resulting command stream.
//
//   author_streams <scenario.scn> <out.cmds>
//
// The streams under scenarios/ were produced with this tool and are frozen;
// the simulator never reads the controller, only its recorded output.

#include "rescuesim/errors.hpp"
#include "rescuesim/sim.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>

using namespace rescuesim;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
using Channels = std::array<double, teleop::kChannels>;

double wrap180(double deg) {
  deg = std::fmod(deg + 180.0, 360.0);
  if (deg < 0) deg += 360.0;
  return deg - 180.0;
}

Eigen::Vector3d world_to_body(const chassis::ChassisState& s, const Eigen::Vector3d& p) {
  const Eigen::Vector3d origin = chassis::body_to_world(s, Eigen::Vector3d::Zero());
  return chassis::body_rotation(s).transpose() * (p - origin);
}

// Drive toward `target`; returns nullopt once within `tol` of it.
std::optional<Channels> drive_to(const sim::WorldState& w, const Eigen::Vector2d& target, double tol) {
  const Eigen::Vector2d rel = target - w.chassis.position;
  const double dist = rel.norm();
  if (dist < tol) return std::nullopt;
  const double h = w.chassis.heading_deg * kDeg;
  const double along = rel.dot(Eigen::Vector2d(std::cos(h), std::sin(h)));
  const bool reverse = along < 0.0;
  double bearing = std::atan2(rel.y(), rel.x()) / kDeg;
  if (reverse) bearing += 180.0;
  const double err = wrap180(bearing - w.chassis.heading_deg);
  Channels ch{};
  ch[1] = std::clamp(-err / 20.0, -1.0, 1.0) + 0.0;  // steer: positive turns right; no -0
  if (std::abs(err) < 15.0) ch[0] = std::clamp(4.0 * dist, 0.1, 1.0) * (reverse ? -1.0 : 1.0);
  return ch;
}

// Joint targets putting the gripper on `object`, closest to the current pose.
std::optional<arm::JointState> reach_for(const sim::WorldState& w, const sim::Scenario& sc,
                                         const Eigen::Vector3d& object) {
  arm::EndEffectorPose target;
  target.position = world_to_body(w.chassis, object);
  std::optional<arm::JointState> best;
  double best_cost = 0.0;
  // Gripper axis forward, tilted down by `tilt` and turned by `roll` about itself.
  const Eigen::Matrix3d forward = (Eigen::Matrix3d() << 0, 0, 1, 0, 1, 0, -1, 0, 0).finished();
  for (int k = 0; k < 20; ++k) {
    const double tilt = 20.0 * (k / 4), roll = 90.0 * (k % 4);
    target.orientation = Eigen::AngleAxisd(tilt * kDeg, Eigen::Vector3d::UnitY()) * forward *
                         Eigen::AngleAxisd(roll * kDeg, Eigen::Vector3d::UnitZ());
    try {
      const auto q = arm::inverse_kinematics(sc.arm, target, w.joints);
      double cost = 0.0;
      for (size_t j = 0; j < static_cast<size_t>(arm::kJoints); ++j) {
        cost += std::abs(q.angles_deg[j] - w.joints.angles_deg[j]);
      }
      if (!best || cost < best_cost) {
        best = q;
        best_cost = cost;
      }
    } catch (const UnreachableTargetError&) {
    }
  }
  return best;
}

// One joint at a time, in order, at most one jog step per tick.
std::optional<Channels> jog_toward(const sim::WorldState& w, const sim::Scenario& sc,
                                   const arm::JointState& goal) {
  const double step = sc.arm_jog_rate_deg_s * sc.dt();
  for (int j = 0; j < arm::kJoints; ++j) {
    const double rem = goal.angles_deg[static_cast<size_t>(j)] - w.joints.angles_deg[static_cast<size_t>(j)];
    if (std::abs(rem) < 1e-9) continue;
    Channels ch{};
    ch[3] = -1.0 + (2.0 * j + 1.0) / arm::kJoints;  // bin centre selects joint j + 1
    ch[4] = std::clamp(rem / step, -1.0, 1.0);
    return ch;
  }
  return std::nullopt;
}

sim::CommandStream author(const sim::Scenario& sc, std::int64_t max_ticks) {
  sim::CommandStream stream;
  sim::WorldState w = sim::initial_world(sc);
  std::optional<Channels> held;
  std::optional<arm::JointState> arm_goal;
  std::int64_t seq = 0, last_sent = 0;

  while (w.status == sim::MissionState::running && w.tick < max_ticks) {
    Channels want{};
    if (w.mission_index < sc.mission.size()) {
      const auto& goal = sc.mission[w.mission_index];
      if (const auto* z = std::get_if<sim::ReachZone>(&goal)) {
        want = drive_to(w, z->center, 0.3 * z->radius).value_or(Channels{});
      } else if (const auto* r = std::get_if<sim::ReturnTo>(&goal)) {
        want = drive_to(w, r->center, 0.3 * r->radius).value_or(Channels{});
        if (w.held_object) want[5] = 1.0;
      } else if (const auto* g = std::get_if<sim::GraspObject>(&goal)) {
        const auto* obj = &*std::find_if(w.objects.begin(), w.objects.end(),
                                         [&](const auto& o) { return o.id == g->object_id; });
        if (!arm_goal) {
          arm_goal = reach_for(w, sc, obj->position);
          if (!arm_goal) {
            const auto b = world_to_body(w.chassis, obj->position);
            throw Error("object " + obj->id + " is out of the arm's reach at body (" +
                        std::to_string(b.x()) + ", " + std::to_string(b.y()) + ", " + std::to_string(b.z()) + ")");
          }
        }
        if (auto jog = jog_toward(w, sc, *arm_goal)) {
          want = *jog;
        } else {
          want[5] = 1.0;  // close
        }
      }
      // detect: hold still and look.
    }

    const std::int64_t now = sim::tick_time_ms(w.tick, sc.tick_rate);
    sim::Inbound in;
    if (!held || *held != want) {
      in.command = teleop::CommandMessage{++seq, now, want};
      held = want;
      last_sent = now;
    } else if (now - last_sent >= 200) {
      in.heartbeat = true;
      last_sent = now;
    }
    if (in.command || in.heartbeat) stream.deliveries[w.tick] = in;
    w = sim::step(std::move(w), sc, in);
  }
  stream.duration_ticks = w.tick;
  std::cerr << "authored " << w.tick << " ticks, " << stream.deliveries.size() << " deliveries: "
            << sim::mission_status_text(w, sc) << '\n';
  return stream;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::cerr << "usage: author_streams <scenario.scn> <out.cmds>\n";
    return 2;
  }
  try {
    const auto sc = sim::load_scenario(argv[1]);
    const auto stream = author(sc, 20000);
    std::ofstream out(argv[2]);
    sim::write_command_stream(out, stream);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
