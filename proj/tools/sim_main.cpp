// sim: run, replay, evaluate and check rescue scenarios.
//
// Exit codes: 0 success, 1 mission failure / replay mismatch, 2 invalid input.

#include "rescuesim/errors.hpp"
#include "rescuesim/odm.hpp"
#include "rescuesim/scenario.hpp"
#include "rescuesim/service.hpp"
#include "rescuesim/sim.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <thread>

using namespace rescuesim;

namespace {

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  out << content;
}

int report_outcome(const sim::Outcome& o) {
  if (o.success()) {
    std::cout << "outcome: success at tick " << o.tick << '\n';
    return 0;
  }
  std::cout << "outcome: fail (" << o.reason << ") at tick " << o.tick << '\n';
  return 1;
}

struct RunArgs {
  std::string scenario;
  std::string listen;
  std::string record;
  std::string commands;
  std::string odmlog;
  std::int64_t seed = -1;
  double telemetry_hz = 10.0;
  std::int64_t cmd_timeout_ms = -1;
  bool keep_alive = false;
};

int cmd_run(const RunArgs& a) {
  auto sc = sim::load_scenario(a.scenario);
  if (a.seed >= 0) sc.seed = static_cast<std::uint64_t>(a.seed);
  if (a.cmd_timeout_ms >= 0) {
    sc.cmd_timeout_ms = a.cmd_timeout_ms;
    sc.validate();
  }

  if (!a.commands.empty()) {
    const auto stream = sim::load_command_stream(a.commands);
    const auto result = sim::run_mission(sc, stream);
    if (!a.record.empty()) write_file(a.record, result.log.serialize());
    if (!a.odmlog.empty()) {
      std::ofstream out(a.odmlog);
      odm::write_log(out, result.detections);
    }
    return report_outcome(result.outcome);
  }
  if (a.listen.empty()) throw ValidationError("run needs --listen or --commands");

  service::ServiceOptions opts = service::parse_listen(a.listen);
  opts.telemetry_hz = a.telemetry_hz;
  opts.stop_when_done = !a.keep_alive;
  service::Service svc(sc, opts);
  svc.start();
  std::cout << "listening on " << opts.address << ':' << svc.port() << std::endl;

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const auto period = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(sc.dt()));
  auto next = std::chrono::steady_clock::now();
  while (!g_interrupted) {
    next += period;
    svc.tick();
    if (svc.snapshot().status != sim::MissionState::running && !a.keep_alive) break;
    std::this_thread::sleep_until(next);
  }
  svc.stop();
  if (!a.record.empty()) write_file(a.record, svc.log().serialize());

  const auto w = svc.snapshot();
  if (w.status == sim::MissionState::running) {
    std::cout << "outcome: interrupted at tick " << w.tick << '\n';
    return 1;
  }
  return report_outcome({w.status, w.fail_reason, w.outcome_tick});
}

int cmd_replay(const std::string& log_path, const std::string& scenario_path, std::int64_t seed) {
  auto sc = sim::load_scenario(scenario_path);
  if (seed >= 0) sc.seed = static_cast<std::uint64_t>(seed);
  const auto log = sim::load_tick_log(log_path);
  try {
    const auto again = sim::replay(log, sc);
    std::cout << "replay identical: " << again.lines.size() << " ticks\n";
    return 0;
  } catch (const ReplayMismatchError& e) {
    std::cerr << "replay mismatch at tick " << e.tick() << '\n';
    return 1;
  }
}

int cmd_eval(const std::vector<std::string>& paths) {
  std::vector<odm::DatasetLog> logs;
  for (const auto& p : paths) logs.push_back(odm::load_log(p));
  odm::write_report(std::cout, odm::evaluate(logs));
  return 0;
}

int cmd_check(const std::string& scenario_path) {
  const auto sc = sim::load_scenario(scenario_path);
  const auto& c = sc.chassis;
  const double slope = sc.terrain_file ? 0.0 : terrain::effective_slope_deg(sc.terrain_kind);
  std::printf("scenario: %s\n", sc.name.c_str());
  std::printf("terrain: %lld x %lld cells of %.3f m\n", static_cast<long long>(sc.terrain.rows()),
              static_cast<long long>(sc.terrain.cols()), sc.terrain.cell_size());
  if (!sc.terrain_file) std::printf("effective slope: %.2f deg\n", slope);
  std::printf("total mass: %.2f kg, arm %.2f kg\n", c.total_mass(), sc.arm.total_mass());
  std::printf("tip-over angle: pitch %.2f deg, roll %.2f deg\n",
              chassis::tip_over_angle(c, chassis::TipDirection::pitch),
              chassis::tip_over_angle(c, chassis::TipDirection::roll));
  double heaviest = 0.0;
  for (const auto& o : sc.objects) heaviest = std::max(heaviest, o.mass_kg);
  std::printf("climbable: %s (payload up to %.2f kg)\n",
              chassis::check_climbable(slope, c.flipper_max_deg, heaviest, c) ? "yes" : "no", heaviest);
  std::printf("mission goals: %zu, objects: %zu\n", sc.mission.size(), sc.objects.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rescue robot simulator"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "run a scenario live or from a recorded command stream");
  run_cmd->add_option("--scenario", run.scenario, "scenario file")->required();
  run_cmd->add_option("--listen", run.listen, "serve operators on host:port");
  run_cmd->add_option("--commands", run.commands, "recorded command stream (offline run)");
  run_cmd->add_option("--seed", run.seed, "override the scenario seed");
  run_cmd->add_option("--record", run.record, "write the tick log here");
  run_cmd->add_option("--odmlog", run.odmlog, "write the detection log here");
  run_cmd->add_option("--telemetry-hz", run.telemetry_hz, "telemetry rate, sim time");
  run_cmd->add_option("--cmd-timeout-ms", run.cmd_timeout_ms, "command link timeout");
  run_cmd->add_flag("--keep-alive", run.keep_alive, "keep serving after the mission ends");

  std::string log_path, replay_scenario;
  std::int64_t replay_seed = -1;
  auto* replay_cmd = app.add_subcommand("replay", "re-run a tick log and verify it");
  replay_cmd->add_option("--log", log_path, "tick log")->required();
  replay_cmd->add_option("--scenario", replay_scenario, "scenario file")->required();
  replay_cmd->add_option("--seed", replay_seed, "override the scenario seed");

  std::vector<std::string> odmlogs;
  auto* eval_cmd = app.add_subcommand("eval", "detection metrics report");
  eval_cmd->add_option("--odmlog", odmlogs, "detection logs")->required();

  std::string check_scenario;
  auto* check_cmd = app.add_subcommand("check", "validate a scenario and print its limits");
  check_cmd->add_option("--scenario", check_scenario, "scenario file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*replay_cmd) return cmd_replay(log_path, replay_scenario, replay_seed);
    if (*eval_cmd) return cmd_eval(odmlogs);
    if (*check_cmd) return cmd_check(check_scenario);
  } catch (const service::StartupError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
