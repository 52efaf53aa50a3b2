#pragma once

// JSON mapping of protocol messages, shared by the codec and the tick log.

#include "rescuesim/teleop.hpp"

#include <nlohmann/json.hpp>

#include <string>

namespace rescuesim::wire {

using nlohmann::json;

json to_json(const teleop::Message& msg);
/// `line` is only used for error reporting.
teleop::Message from_json(const json& j, const std::string& line);

json command_body(const teleop::CommandMessage& c);
json telemetry_body(const teleop::TelemetryMessage& t);

// Typed field readers; throw ParseError naming the field.
double number(const json& j, const char* key, const std::string& line);
std::int64_t integer(const json& j, const char* key, const std::string& line);
bool boolean(const json& j, const char* key, const std::string& line);
std::string text(const json& j, const char* key, const std::string& line);
const json& member(const json& j, const char* key, const std::string& line);

}  // namespace rescuesim::wire
