#pragma once

#include "rescuesim/chassis.hpp"
#include "rescuesim/terrain.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace rescuesim::sensors {

enum class HazardKind { heat, gas };

struct HazardSource {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  HazardKind kind = HazardKind::gas;
  double intensity = 0.0;  // degC for heat, ppm for gas, at the centre
  double sigma = 1.0;      // m
};

struct EnvironmentField {
  double ambient_temperature_c = 25.0;
  double ambient_humidity_pct = 50.0;
  double ambient_gas_ppm = 0.0;
  std::vector<HazardSource> sources;

  void validate() const;
};

struct SensorMount {
  Eigen::Vector3d position{0.225, 0.0, 0.10};  // body frame, m
  double pitch_deg = 0.0;                      // beam elevation, nose up positive
};

struct SensorSuiteConfig {
  SensorMount ultrasonic;
  double ultrasonic_max_range = 4.0;  // m
  double declination_deg = 0.0;
  /// Height of the temperature/gas probe above the body origin.
  double probe_height = 0.15;
  bool noise = false;
  double noise_ultrasonic_m = 0.003;
  double noise_temperature_c = 0.2;
  double noise_humidity_pct = 0.5;
  double noise_gas_ppm = 2.0;
};

struct EnvironmentReading {
  double temperature_c = 0.0;
  double humidity_pct = 0.0;
  double gas_ppm = 0.0;
};

struct SensorFrame {
  std::int64_t tick = 0;
  std::optional<double> ultrasonic_m;  // nullopt: out of range
  double temperature_c = 0.0;
  double humidity_pct = 0.0;
  double gas_ppm = 0.0;
  double heading_deg = 0.0;

  bool operator==(const SensorFrame&) const = default;
};

/// Forward-looking single beam. nullopt when nothing is hit within max_range.
std::optional<double> sample_ultrasonic(const chassis::ChassisState& state,
                                        const terrain::TerrainGrid& terrain,
                                        const SensorMount& mount, double max_range = 4.0);

/// Gaussian-plume field evaluated at a world point.
EnvironmentReading sample_environment_at(const Eigen::Vector3d& point, const EnvironmentField& field);

/// Field evaluated at the probe point above the body origin.
EnvironmentReading sample_environment(const chassis::ChassisState& state,
                                      const EnvironmentField& field, double probe_height = 0.15);

/// (heading + declination) wrapped to [0, 360).
double sample_compass(const chassis::ChassisState& state, double declination_deg);

double wrap_degrees(double deg);

/// Samples every sensor. `rng` is only drawn from when noise is enabled.
SensorFrame sample_all(std::int64_t tick, const chassis::ChassisState& state,
                       const terrain::TerrainGrid& terrain, const EnvironmentField& field,
                       const SensorSuiteConfig& config, std::mt19937_64& rng);

}  // namespace rescuesim::sensors
