#pragma once

// Robot-side endpoint: HTTP + WebSocket on one port. Streams telemetry to
// every session, takes commands from the single authoritative session.

#include "rescuesim/errors.hpp"
#include "rescuesim/scenario.hpp"
#include "rescuesim/sim.hpp"

#include <cstdint>
#include <memory>
#include <string>

namespace rescuesim::service {

class StartupError : public Error {
 public:
  using Error::Error;
};

struct ServiceOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 0;     // 0 picks a free port
  double telemetry_hz = 10.0;  // sim time
  /// Ticks only advance through Service::tick() when set (tests).
  bool manual_tick = false;
  /// Keep ticking after the mission ends (live sessions stay up).
  bool stop_when_done = true;
};

/// Parses "host:port" (":port" and "port" allowed).
ServiceOptions parse_listen(const std::string& listen, ServiceOptions base = {});

class Service {
 public:
  Service(sim::Scenario scenario, ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds and starts accepting. Throws StartupError when the endpoint is unusable.
  void start();
  unsigned short port() const;

  /// Runs one tick with whatever the mailbox holds (manual mode).
  void tick();
  /// Real-time loop at the scenario tick rate until the mission ends (when
  /// stop_when_done) or stop() is called.
  void run();
  void stop();

  sim::WorldState snapshot() const;
  sim::TickLog log() const;
  std::size_t session_count() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace rescuesim::service
