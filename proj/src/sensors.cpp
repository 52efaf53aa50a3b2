#include "rescuesim/sensors.hpp"

#include "rescuesim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rescuesim::sensors {

namespace {
constexpr double kDeg = std::numbers::pi / 180.0;
}

void EnvironmentField::validate() const {
  if (!std::isfinite(ambient_temperature_c) || !std::isfinite(ambient_gas_ppm) ||
      ambient_gas_ppm < 0.0) {
    throw ValidationError("environment ambient values must be finite, gas >= 0");
  }
  if (!(ambient_humidity_pct >= 0.0 && ambient_humidity_pct <= 100.0)) {
    throw ValidationError("ambient humidity must be in [0, 100]");
  }
  for (const auto& s : sources) {
    if (!(s.sigma > 0.0) || !(s.intensity >= 0.0) || !s.position.allFinite()) {
      throw ValidationError("hazard source needs sigma > 0 and intensity >= 0");
    }
  }
}

std::optional<double> sample_ultrasonic(const chassis::ChassisState& state,
                                        const terrain::TerrainGrid& terrain,
                                        const SensorMount& mount, double max_range) {
  const Eigen::Matrix3d r = chassis::body_rotation(state);
  const Eigen::Vector3d origin = chassis::body_to_world(state, mount.position);
  const double p = mount.pitch_deg * kDeg;
  const Eigen::Vector3d dir = (r * Eigen::Vector3d(std::cos(p), 0.0, std::sin(p))).normalized();
  auto d = terrain::raycast(terrain, origin, dir, max_range);
  if (d && !(*d > 0.0)) return std::nullopt;  // beam starts inside the surface
  return d;
}

EnvironmentReading sample_environment_at(const Eigen::Vector3d& point,
                                         const EnvironmentField& field) {
  EnvironmentReading out{field.ambient_temperature_c, field.ambient_humidity_pct,
                         field.ambient_gas_ppm};
  for (const auto& s : field.sources) {
    const double d2 = (point - s.position).squaredNorm();
    const double contribution = s.intensity * std::exp(-d2 / (2.0 * s.sigma * s.sigma));
    if (s.kind == HazardKind::heat) {
      out.temperature_c += contribution;
    } else {
      out.gas_ppm += contribution;
    }
  }
  out.humidity_pct = std::clamp(out.humidity_pct, 0.0, 100.0);
  return out;
}

EnvironmentReading sample_environment(const chassis::ChassisState& state,
                                      const EnvironmentField& field, double probe_height) {
  return sample_environment_at(chassis::body_to_world(state, {0.0, 0.0, probe_height}), field);
}

double wrap_degrees(double deg) {
  double w = std::fmod(deg, 360.0);
  if (w < 0.0) w += 360.0;
  if (w >= 360.0) w = 0.0;  // -1e-17 + 360 rounds to 360
  return w;
}

double sample_compass(const chassis::ChassisState& state, double declination_deg) {
  return wrap_degrees(state.heading_deg + declination_deg);
}

SensorFrame sample_all(std::int64_t tick, const chassis::ChassisState& state,
                       const terrain::TerrainGrid& terrain, const EnvironmentField& field,
                       const SensorSuiteConfig& config, std::mt19937_64& rng) {
  SensorFrame f;
  f.tick = tick;
  f.ultrasonic_m = sample_ultrasonic(state, terrain, config.ultrasonic, config.ultrasonic_max_range);
  const auto env = sample_environment(state, field, config.probe_height);
  f.temperature_c = env.temperature_c;
  f.humidity_pct = env.humidity_pct;
  f.gas_ppm = env.gas_ppm;
  f.heading_deg = sample_compass(state, config.declination_deg);

  if (config.noise) {
    // Draw a fixed number of variates per tick so the stream stays aligned.
    std::normal_distribution<double> n01(0.0, 1.0);
    const double nu = n01(rng), nt = n01(rng), nh = n01(rng), ng = n01(rng);
    if (f.ultrasonic_m) {
      const double d = *f.ultrasonic_m + config.noise_ultrasonic_m * nu;
      f.ultrasonic_m = (d > 0.0 && d <= config.ultrasonic_max_range) ? std::optional(d) : std::nullopt;
    }
    f.temperature_c += config.noise_temperature_c * nt;
    f.humidity_pct = std::clamp(f.humidity_pct + config.noise_humidity_pct * nh, 0.0, 100.0);
    f.gas_ppm = std::max(0.0, f.gas_ppm + config.noise_gas_ppm * ng);
  }
  return f;
}

}  // namespace rescuesim::sensors
