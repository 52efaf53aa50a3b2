#include "rescuesim/service.hpp"

#include <boost/asio/dispatch.hpp>
#include <boost/asio/executor_work_guard.hpp>
#include <boost/asio/io_context.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <deque>
#include <map>
#include <mutex>
#include <thread>

namespace rescuesim::service {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

ServiceOptions parse_listen(const std::string& listen, ServiceOptions base) {
  std::string host = base.address;
  std::string port = listen;
  if (const auto colon = listen.rfind(':'); colon != std::string::npos) {
    if (colon > 0) host = listen.substr(0, colon);
    port = listen.substr(colon + 1);
  }
  try {
    size_t used = 0;
    const int p = std::stoi(port, &used);
    if (used != port.size() || p < 0 || p > 65535) throw std::invalid_argument(port);
    base.port = static_cast<unsigned short>(p);
  } catch (const std::logic_error&) {
    throw ValidationError("bad --listen value '" + listen + "', expected host:port");
  }
  base.address = host;
  return base;
}

namespace {

class Session;

// State shared between the network sessions and the tick loop.
struct Hub {
  std::mutex mutex;
  std::map<std::uint64_t, std::weak_ptr<Session>> sessions;
  std::optional<std::uint64_t> authority;
  std::uint64_t next_id = 1;
  teleop::CommandMailbox mailbox;
  std::function<std::string()> status;

  teleop::SessionRole attach(const std::shared_ptr<Session>& s, std::uint64_t& id);
  void detach(std::uint64_t id);
  bool is_authority(std::uint64_t id) {
    std::lock_guard lock(mutex);
    return authority == id;
  }
  void broadcast(const std::string& frame);
};

class Session : public std::enable_shared_from_this<Session> {
 public:
  Session(tcp::socket socket, std::shared_ptr<Hub> hub)
      : ws_(std::move(socket)), hub_(std::move(hub)) {}

  void run() {
    net::dispatch(ws_.get_executor(), [self = shared_from_this()] { self->read_request(); });
  }

  void send(std::string frame) {
    net::post(ws_.get_executor(), [self = shared_from_this(), f = std::move(frame)]() mutable {
      self->queue_.push_back(std::move(f));
      if (self->queue_.size() == 1) self->write_next();
    });
  }

 private:
  void read_request() {
    http::async_read(ws_.next_layer(), buffer_, request_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) {
                       if (!ec) self->on_request();
                     });
  }

  void on_request() {
    if (websocket::is_upgrade(request_)) {
      ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
      ws_.async_accept(request_, [self = shared_from_this()](beast::error_code ec) {
        if (!ec) self->on_open();
      });
      return;
    }
    // Plain HTTP: a small status document.
    auto res = std::make_shared<http::response<http::string_body>>(http::status::ok,
                                                                   request_.version());
    res->set(http::field::content_type, "application/json");
    res->body() = hub_->status ? hub_->status() : "{}";
    res->prepare_payload();
    res->keep_alive(false);
    http::async_write(ws_.next_layer(), *res,
                      [self = shared_from_this(), res](beast::error_code, std::size_t) {
                        beast::error_code ignored;
                        self->ws_.next_layer().socket().shutdown(tcp::socket::shutdown_send, ignored);
                      });
  }

  void on_open() {
    const auto role = hub_->attach(shared_from_this(), id_);
    send(teleop::encode(teleop::SessionNotice{role}));
    read_frame();
  }

  void read_frame() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->hub_->detach(self->id_);
        return;
      }
      self->decoder_.feed(beast::buffers_to_string(self->buffer_.data()));
      self->buffer_.consume(self->buffer_.size());
      // A WebSocket message is one frame even without the trailing newline.
      if (!self->decoder_.pending().empty()) self->decoder_.feed("\n");
      self->handle_frames();
      self->read_frame();
    });
  }

  void handle_frames() {
    for (const auto& failure : decoder_.take_failures()) {
      send(teleop::encode(teleop::RejectNotice{-1, "parse-error: " + failure.error}));
    }
    for (const auto& msg : decoder_.take_messages()) {
      if (const auto* cmd = std::get_if<teleop::CommandMessage>(&msg)) {
        if (!hub_->is_authority(id_)) {
          send(teleop::encode(teleop::RejectNotice{cmd->seq, "not-authoritative"}));
        } else if (hub_->mailbox.post(*cmd) == teleop::CommandMailbox::PostResult::stale) {
          send(teleop::encode(teleop::RejectNotice{cmd->seq, "stale"}));
        }
      } else if (const auto* hb = std::get_if<teleop::Heartbeat>(&msg)) {
        if (hub_->is_authority(id_)) hub_->mailbox.heartbeat();
        (void)hb;
      } else {
        send(teleop::encode(teleop::RejectNotice{-1, "unexpected-type"}));
      }
    }
  }

  void write_next() {
    ws_.text(true);
    ws_.async_write(net::buffer(queue_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      if (ec) {
                        self->queue_.clear();
                        return;
                      }
                      self->queue_.pop_front();
                      if (!self->queue_.empty()) self->write_next();
                    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> request_;
  std::deque<std::string> queue_;
  std::shared_ptr<Hub> hub_;
  teleop::StreamDecoder decoder_;
  std::uint64_t id_ = 0;
};

teleop::SessionRole Hub::attach(const std::shared_ptr<Session>& s, std::uint64_t& id) {
  std::lock_guard lock(mutex);
  id = next_id++;
  sessions[id] = s;
  if (!authority) {
    authority = id;
    return teleop::SessionRole::authoritative;
  }
  return teleop::SessionRole::observer;
}

void Hub::detach(std::uint64_t id) {
  std::shared_ptr<Session> promoted;
  {
    std::lock_guard lock(mutex);
    if (sessions.erase(id) == 0) return;
    if (authority != id) return;
    authority.reset();
    // Authority passes to the longest-connected remaining session.
    for (auto it = sessions.begin(); it != sessions.end(); ++it) {
      if (auto s = it->second.lock()) {
        authority = it->first;
        promoted = std::move(s);
        break;
      }
    }
  }
  if (promoted) promoted->send(teleop::encode(teleop::SessionNotice{teleop::SessionRole::authoritative}));
}

void Hub::broadcast(const std::string& frame) {
  std::vector<std::shared_ptr<Session>> live;
  {
    std::lock_guard lock(mutex);
    for (auto& [id, weak] : sessions) {
      if (auto s = weak.lock()) live.push_back(std::move(s));
    }
  }
  for (auto& s : live) s->send(frame);
}

}  // namespace

struct Service::Impl {
  sim::Scenario scenario;
  ServiceOptions options;
  net::io_context ioc{1};
  net::executor_work_guard<net::io_context::executor_type> work = net::make_work_guard(ioc);
  tcp::acceptor acceptor{ioc};
  std::thread io_thread;
  std::shared_ptr<Hub> hub = std::make_shared<Hub>();

  mutable std::mutex world_mutex;
  sim::WorldState world;
  sim::TickLog log;
  std::int64_t telemetry_period = 5;
  std::atomic<bool> stopping{false};
  unsigned short bound_port = 0;

  void accept() {
    acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;  // acceptor closed
      std::make_shared<Session>(std::move(socket), hub)->run();
      accept();
    });
  }
};

Service::Service(sim::Scenario scenario, ServiceOptions options) : impl_(std::make_unique<Impl>()) {
  if (!(options.telemetry_hz > 0.0)) throw ValidationError("telemetry rate must be positive");
  impl_->scenario = std::move(scenario);
  impl_->options = std::move(options);
  impl_->world = sim::initial_world(impl_->scenario);
  impl_->log.scenario_name = impl_->scenario.name;
  impl_->telemetry_period = std::max<std::int64_t>(
      1, std::llround(impl_->scenario.tick_rate / impl_->options.telemetry_hz));
  impl_->hub->status = [impl = impl_.get()] {
    std::lock_guard lock(impl->world_mutex);
    nlohmann::json j = {{"service", "rescuesim"},
                        {"protocol", teleop::kProtocolVersion},
                        {"scenario", impl->scenario.name},
                        {"tick", impl->world.tick},
                        {"mission_status", sim::mission_status_text(impl->world, impl->scenario)}};
    return j.dump();
  };
}

Service::~Service() { stop(); }

void Service::start() {
  auto& im = *impl_;
  beast::error_code ec;
  const auto address = net::ip::make_address(im.options.address, ec);
  if (ec) throw StartupError("bad listen address '" + im.options.address + "': " + ec.message());
  const tcp::endpoint endpoint(address, im.options.port);
  im.acceptor.open(endpoint.protocol(), ec);
  if (!ec) im.acceptor.set_option(net::socket_base::reuse_address(true), ec);
  if (!ec) im.acceptor.bind(endpoint, ec);
  if (!ec) im.acceptor.listen(net::socket_base::max_listen_connections, ec);
  if (ec) throw StartupError("cannot listen on " + im.options.address + ":" +
                             std::to_string(im.options.port) + ": " + ec.message());
  im.bound_port = im.acceptor.local_endpoint().port();
  im.accept();
  im.io_thread = std::thread([&im] { im.ioc.run(); });
}

unsigned short Service::port() const { return impl_->bound_port; }

void Service::tick() {
  auto& im = *impl_;
  const auto delivery = im.hub->mailbox.take();
  const sim::Inbound inbound{delivery.command, delivery.heartbeat};
  std::string frame;
  {
    std::lock_guard lock(im.world_mutex);
    if (im.world.status != sim::MissionState::running) return;
    im.world = sim::step(std::move(im.world), im.scenario, inbound);
    im.log.lines.push_back(sim::tick_line(im.world, inbound));
    if (im.world.telemetry.tick % im.telemetry_period == 0 ||
        im.world.status != sim::MissionState::running) {
      frame = teleop::encode(im.world.telemetry);
    }
  }
  if (!frame.empty()) im.hub->broadcast(frame);
}

void Service::run() {
  auto& im = *impl_;
  const auto period = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(im.scenario.dt()));
  auto next = std::chrono::steady_clock::now();
  while (!im.stopping) {
    next += period;
    tick();
    {
      std::lock_guard lock(im.world_mutex);
      if (im.world.status != sim::MissionState::running && im.options.stop_when_done) break;
    }
    std::this_thread::sleep_until(next);
  }
}

void Service::stop() {
  auto& im = *impl_;
  if (im.stopping.exchange(true)) return;
  net::post(im.ioc, [&im] {
    beast::error_code ignored;
    im.acceptor.close(ignored);
  });
  im.work.reset();
  im.ioc.stop();
  if (im.io_thread.joinable()) im.io_thread.join();
}

sim::WorldState Service::snapshot() const {
  std::lock_guard lock(impl_->world_mutex);
  return impl_->world;
}

sim::TickLog Service::log() const {
  std::lock_guard lock(impl_->world_mutex);
  return impl_->log;
}

std::size_t Service::session_count() const {
  std::lock_guard lock(impl_->hub->mutex);
  return impl_->hub->sessions.size();
}

}  // namespace rescuesim::service
