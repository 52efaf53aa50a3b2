#include "rescuesim/errors.hpp"
#include "rescuesim/sim.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <sstream>

using namespace rescuesim;
using namespace rescuesim::sim;

namespace {

const std::string kRoot = RESCUESIM_SOURCE_ROOT;

Scenario scn(const std::string& json) {
  std::istringstream in("scenario v1\n" + json);
  return read_scenario(in);
}

Scenario golden(const std::string& name) { return load_scenario(kRoot + "/scenarios/" + name + ".scn"); }
CommandStream golden_stream(const std::string& name) {
  return load_command_stream(kRoot + "/scenarios/" + name + ".cmds");
}

teleop::CommandMessage cmd(std::int64_t seq, std::array<double, 6> ch) { return {seq, 0, ch}; }

// Zero-order-hold resampling of a 50 Hz stream to `rate`: each coarse tick
// receives the newest command delivered during its interval.
CommandStream resample(const CommandStream& s, double from, double to) {
  CommandStream out;
  out.duration_ticks = static_cast<std::int64_t>(std::ceil(static_cast<double>(s.duration_ticks) * to / from));
  for (const auto& [tick, in] : s.deliveries) {
    const auto coarse = static_cast<std::int64_t>(std::floor(static_cast<double>(tick) * to / from));
    auto& slot = out.deliveries[coarse];
    if (in.command) slot.command = in.command;
    slot.heartbeat = slot.heartbeat || in.heartbeat;
  }
  return out;
}

}  // namespace

TEST(Scenario, GoldenFilesLoad) {
  const auto sc = golden("stair_rescue");
  EXPECT_EQ(sc.name, "stair-rescue");
  EXPECT_EQ(sc.tick_rate, 50.0);
  EXPECT_EQ(sc.mission.size(), 4u);
  ASSERT_NE(sc.find_object("victim"), nullptr);
  EXPECT_NEAR(terrain::effective_slope_deg(golden("stair_steep").terrain_kind), 45.0, 1e-12);
}

TEST(Scenario, Validation) {
  EXPECT_THROW(scn(R"({"mission":[{"goal":"grasp","object":"ghost"}], "start":{"x":3,"y":3}})"),
               ValidationError);
  EXPECT_THROW(scn(R"({"start":{"x":30,"y":3}})"), ValidationError);
  EXPECT_THROW(scn(R"({"start":{"x":3,"y":3}, "tick_rate": 0})"), ValidationError);
  EXPECT_THROW(scn(R"({"start":{"x":3,"y":3}, "terrain":{"kind":"lava"}})"), ValidationError);
  EXPECT_THROW(scn(R"({"start":{"x":3,"y":3},)"), ValidationError);
  std::istringstream bad_header("scenario v2\n{}");
  EXPECT_THROW(read_scenario(bad_header), ValidationError);
  EXPECT_NO_THROW(scn(R"({"start":{"x":3,"y":3}})"));
}

TEST(Step, QuiescentWithoutCommands) {
  const auto sc = scn(R"({"start":{"x":3,"y":3,"heading_deg":30},
                          "mission":[{"goal":"reach_zone","center":[5,5]}]})");
  const auto w0 = initial_world(sc);
  auto w = w0;
  for (int i = 0; i < 100; ++i) w = step(std::move(w), sc, {});
  EXPECT_EQ(w.tick, 100);
  EXPECT_EQ(w.chassis, w0.chassis);
  EXPECT_EQ(w.joints, w0.joints);
  EXPECT_EQ(w.status, MissionState::running);
}

TEST(Step, FullThrottleOneSecond) {
  const auto sc = scn(R"({"start":{"x":2,"y":3,"heading_deg":0},
                          "mission":[{"goal":"reach_zone","center":[5,5]}]})");
  auto w = initial_world(sc);
  const double x0 = w.chassis.position.x();
  for (int i = 0; i < 50; ++i) w = step(std::move(w), sc, {cmd(i + 1, {1, 0, 0, 0, 0, 0}), false});
  EXPECT_NEAR(w.chassis.position.x() - x0, sc.chassis.v_max, 1e-9);
  EXPECT_EQ(w.chassis.position.y(), 3.0);
}

TEST(Step, GapMidClimbStopsOnSlope) {
  const auto sc = golden("stair_rescue");
  auto w = initial_world(sc);
  int t = 0;
  for (; t < 150; ++t) w = step(std::move(w), sc, {t == 0 ? cmd(1, {1, 0, 0, 0, 0, 0}) : std::optional<teleop::CommandMessage>{}, t % 10 == 0});
  ASSERT_GT(std::abs(w.chassis.pitch_deg), 5.0);  // on the stair
  // Link goes silent: safe stop once the age passes 500 ms (25 ticks).
  const std::int64_t last = 140;
  Eigen::Vector2d stopped;
  for (; t < 260; ++t) {
    w = step(std::move(w), sc, {});
    const std::int64_t age = tick_time_ms(t, 50.0) - tick_time_ms(last, 50.0);
    EXPECT_EQ(w.safe_stop, age > 500) << t;
    EXPECT_TRUE(std::isfinite(w.stability.margin));
    if (age > 500) {
      EXPECT_EQ(w.chassis.track_speed_left, 0.0);
      EXPECT_EQ(w.chassis.track_speed_right, 0.0);
      if (age == 520) stopped = w.chassis.position;
      if (age > 520) EXPECT_EQ(w.chassis.position, stopped);
    }
  }
  EXPECT_GT(std::abs(w.chassis.pitch_deg), 5.0);
  EXPECT_EQ(w.status, MissionState::running);
  // A fresh command recovers on the same tick.
  w = step(std::move(w), sc, {cmd(2, {1, 0, 0, 0, 0, 0}), false});
  EXPECT_FALSE(w.safe_stop);
  EXPECT_EQ(w.chassis.track_speed_left, 0.5);
}

TEST(Step, StaleCommandIgnored) {
  const auto sc = scn(R"({"start":{"x":2,"y":3}, "mission":[{"goal":"reach_zone","center":[5,5]}]})");
  auto w = initial_world(sc);
  w = step(std::move(w), sc, {cmd(5, {0.5, 0, 0, 0, 0, 0}), false});
  w = step(std::move(w), sc, {cmd(4, {-1, 0, 0, 0, 0, 0}), false});
  EXPECT_EQ(w.held_command->seq, 5);
  EXPECT_EQ(w.chassis.track_speed_left, 0.25);
}

TEST(StubDetect, RangeHalfPlaneAndOcclusion) {
  auto sc = scn(R"({"start":{"x":2,"y":3,"heading_deg":0},
                    "objects":[{"id":"a","label":"person","position":[3.0,3.0]}]})");
  auto w = initial_world(sc);
  auto d = stub_detect(w, sc);
  ASSERT_EQ(d.detections.size(), 1u);
  EXPECT_NEAR(d.detections[0].confidence, 1.0 - 1.0 / 3.0, 1e-12);
  EXPECT_EQ(d.record.ground_truth, "person");
  EXPECT_EQ(d.record.prediction, "person");
  EXPECT_GE(d.record.latency_ms, 54.8);
  EXPECT_LE(d.record.latency_ms, 62.8);

  w.objects[0].position = {1.0, 3.0, 0.0};  // behind
  d = stub_detect(w, sc);
  EXPECT_TRUE(d.detections.empty());
  EXPECT_FALSE(d.record.ground_truth);
  EXPECT_FALSE(d.record.prediction);

  // A 2 m wall between robot and object.
  Eigen::MatrixXd h = sc.terrain.heights();
  for (Eigen::Index c = 0; c < h.cols(); ++c) {
    const double x = sc.terrain.min_x() + static_cast<double>(c) * sc.terrain.cell_size();
    if (x >= 2.5 && x <= 2.6) h.col(c).setConstant(2.0);
  }
  sc.terrain = terrain::TerrainGrid(sc.terrain.cell_size(), {sc.terrain.min_x(), sc.terrain.min_y()}, h);
  w.objects[0].position = {3.0, 3.0, 0.0};
  d = stub_detect(w, sc);
  EXPECT_TRUE(d.detections.empty());
  EXPECT_EQ(d.record.ground_truth, "person");
  EXPECT_FALSE(d.record.prediction);
}

TEST(RunMission, FlatRoomGolden) {
  const auto r = run_mission(golden("flat_room"), golden_stream("flat_room"));
  EXPECT_TRUE(r.outcome.success()) << r.outcome.reason;
  EXPECT_EQ(r.final_world.held_object, "dummy");
  EXPECT_EQ(r.log.lines.size(), r.detections.records.size());
}

TEST(RunMission, StairGoldenSucceedsDeterministically) {
  const auto sc = golden("stair_rescue");
  const auto stream = golden_stream("stair_rescue");
  const auto a = run_mission(sc, stream);
  ASSERT_TRUE(a.outcome.success()) << a.outcome.reason;
  EXPECT_EQ(a.final_world.chassis.elevation, 0.75);
  EXPECT_EQ(a.final_world.held_object, "victim");
  EXPECT_EQ(run_mission(sc, stream).log.serialize(), a.log.serialize());

  // Progress never goes backwards; one detection record per tick.
  std::size_t prev = 0;
  for (const auto& line : a.log.lines) {
    const auto pos = line.find("\"mission_index\":");
    ASSERT_NE(pos, std::string::npos);
    const std::size_t idx = std::stoul(line.substr(pos + 16));
    EXPECT_GE(idx, prev);
    prev = idx;
  }
  for (size_t i = 0; i < a.detections.records.size(); ++i) {
    EXPECT_EQ(a.detections.records[i].frame_id, static_cast<std::int64_t>(i));
  }
}

TEST(RunMission, SteepStairFailsClimbLimit) {
  const auto r = run_mission(golden("stair_steep"), golden_stream("stair_steep"));
  EXPECT_EQ(r.outcome.state, MissionState::failed);
  EXPECT_EQ(r.outcome.reason, "climb-limit");
  EXPECT_EQ(r.final_world.telemetry.mission_status, "fail: climb-limit");
}

TEST(RunMission, EmptyStreamLeavesGoalsUnmet) {
  CommandStream empty;
  empty.duration_ticks = 100;
  const auto r = run_mission(golden("stair_rescue"), empty);
  EXPECT_EQ(r.outcome.reason, "goals-unmet");
  EXPECT_EQ(r.outcome.tick, 99);
  EXPECT_EQ(r.log.lines.size(), 100u);
}

TEST(RunMission, HeavyObjectFailsPayloadLimit) {
  auto sc = golden("flat_room");
  sc.objects[0].mass_kg = 12.5;
  const auto r = run_mission(sc, golden_stream("flat_room"));
  EXPECT_EQ(r.outcome.reason, "payload-limit");
}

TEST(RunMission, HighCentreOfMassTipsOver) {
  // atan(0.225 / 0.5) is about 24 degrees, below the 30 degree ramp.
  const auto sc = scn(R"({"terrain":{"kind":"slope","angle_deg":30},
                          "chassis":{"com_height":0.5},
                          "start":{"x":3.0,"y":1.5},
                          "mission":[{"goal":"reach_zone","center":[4,1.5]}]})");
  CommandStream s;
  s.duration_ticks = 10;
  const auto r = run_mission(sc, s);
  EXPECT_EQ(r.outcome.reason, "tip-over");
  EXPECT_EQ(r.outcome.tick, 0);
}

TEST(RunMission, LeavingTheMapFailsOutOfBounds) {
  const auto sc = scn(R"({"start":{"x":0.5,"y":3,"heading_deg":180},
                          "mission":[{"goal":"reach_zone","center":[4,3]}]})");
  CommandStream s;
  s.duration_ticks = 100;
  for (std::int64_t t = 0; t < 100; t += 5) s.deliveries[t].command = cmd(t + 1, {1, 0, 0, 0, 0, 0});
  const auto r = run_mission(sc, s);
  EXPECT_EQ(r.outcome.reason, "out-of-bounds");
  EXPECT_EQ(r.final_world.chassis.track_speed_left, 0.0);
  EXPECT_GE(r.final_world.chassis.position.x() - 0.225, sc.terrain.min_x());
}

TEST(RunMission, GatesIndependentOfTickRate) {
  for (const std::string name : {"stair_rescue", "stair_steep"}) {
    auto sc = golden(name);
    const auto stream = golden_stream(name);
    const auto fine = run_mission(sc, stream);
    sc.tick_rate = 25.0;
    const auto coarse = run_mission(sc, resample(stream, 50.0, 25.0));
    const auto gate = [](const Outcome& o) {
      return o.reason == "climb-limit" || o.reason == "payload-limit" ? o.reason : std::string("pass");
    };
    EXPECT_EQ(gate(fine.outcome), gate(coarse.outcome)) << name;
  }
}

TEST(Replay, ReproducesAndDetectsDivergence) {
  auto sc = golden("stair_rescue");
  sc.sensors.noise = true;
  const auto r = run_mission(sc, golden_stream("stair_rescue"));
  EXPECT_EQ(replay(r.log, sc), r.log);

  TickLog prefix = r.log;
  prefix.lines.resize(120);
  EXPECT_EQ(replay(prefix, sc).lines.size(), 120u);

  sc.seed += 1;
  try {
    replay(r.log, sc);
    FAIL() << "expected a mismatch";
  } catch (const ReplayMismatchError& e) {
    EXPECT_EQ(e.tick(), 0);
  }
}

TEST(Replay, TamperedLineReported) {
  const auto sc = golden("flat_room");
  auto r = run_mission(sc, golden_stream("flat_room"));
  auto& line = r.log.lines[57];
  line.replace(line.find("\"tick\":57"), 9, "\"tick\":58");
  try {
    replay(r.log, sc);
    FAIL();
  } catch (const ReplayMismatchError& e) {
    EXPECT_EQ(e.tick(), 57);
  }
}

TEST(TickLogFile, RoundTrip) {
  const auto r = run_mission(golden("flat_room"), golden_stream("flat_room"));
  std::istringstream in(r.log.serialize());
  EXPECT_EQ(read_tick_log(in), r.log);
  std::istringstream bad("ticklog v0 x\n");
  EXPECT_THROW(read_tick_log(bad), ParseError);
}

TEST(TickLogFile, SafeStopLivenessOnRecordedLog) {
  // Commands for 1 s, silence for 2 s, then one more command.
  CommandStream s;
  s.duration_ticks = 200;
  for (std::int64_t t = 0; t < 50; t += 10) s.deliveries[t].command = cmd(t + 1, {0.4, 0, 0, 0, 0, 0});
  s.deliveries[50].command = cmd(100, {0.4, 0.1, 0, 0, 0, 0});
  s.deliveries[150].command = cmd(101, {0.4, 0, 0, 0, 0, 0});
  const auto sc = scn(R"({"start":{"x":1,"y":3}, "mission":[{"goal":"reach_zone","center":[5,5]}]})");
  const auto r = run_mission(sc, s);
  std::int64_t last_ms = 0;
  std::vector<std::int64_t> edges;
  bool prev = false;
  for (const auto& line : r.log.lines) {
    const auto j = nlohmann::json::parse(line);
    const auto tick = j["tick"].get<std::int64_t>();
    if (!j["cmd"].is_null()) last_ms = tick * 20;
    const bool stopped = j["telemetry"]["safe_stop"].get<bool>();
    EXPECT_EQ(stopped, tick * 20 - last_ms > 500) << tick;
    if (stopped) EXPECT_EQ(j["world"]["chassis"]["track_left"].get<double>(), 0.0);
    if (stopped != prev) edges.push_back(tick);
    prev = stopped;
  }
  // Engages one tick past 500 ms of silence, releases on the next command.
  EXPECT_EQ(edges, (std::vector<std::int64_t>{76, 150, 176}));
}

TEST(CommandStreamFile, RoundTripAndErrors) {
  const auto s = golden_stream("stair_rescue");
  std::stringstream buf;
  write_command_stream(buf, s);
  const auto back = read_command_stream(buf);
  EXPECT_EQ(back.duration_ticks, s.duration_ticks);
  EXPECT_EQ(back.deliveries, s.deliveries);

  std::istringstream bad("cmdstream v1 10\n3 {\"v\":1,\"type\":\"session\",\"role\":\"observer\"}\n");
  EXPECT_THROW(read_command_stream(bad), ParseError);
  std::istringstream bad_header("cmdstream v1\n");
  EXPECT_THROW(read_command_stream(bad_header), ParseError);
}

TEST(Telemetry, SeqStrictlyIncreases) {
  const auto r = run_mission(golden("flat_room"), golden_stream("flat_room"));
  std::int64_t prev = -1;
  for (const auto& line : r.log.lines) {
    const auto seq = nlohmann::json::parse(line)["telemetry"]["seq"].get<std::int64_t>();
    EXPECT_GT(seq, prev);
    prev = seq;
  }
}
