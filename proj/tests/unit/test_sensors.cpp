#include "rescuesim/errors.hpp"
#include "rescuesim/sensors.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace rescuesim;
using namespace rescuesim::sensors;

namespace {

// Flat floor with a 2 m step whose face node sits at x = wall_x.
terrain::TerrainGrid wall_at(double wall_x, double length = 8.0) {
  const double cell = 0.004;
  const auto cols = static_cast<Eigen::Index>(std::lround(length / cell)) + 1;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(101, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    if (static_cast<double>(c) * cell >= wall_x - 1e-12) h.col(c).setConstant(2.0);
  }
  return terrain::TerrainGrid(cell, {0.0, 0.0}, h);
}

chassis::ChassisState standing(double x, double y, double heading = 0.0) {
  chassis::ChassisState s;
  s.position = {x, y};
  s.heading_deg = heading;
  return s;
}

}  // namespace

TEST(Ultrasonic, WallOneMetreAhead) {
  SensorMount mount;
  const double x = 1.0;
  const auto g = wall_at(x + mount.position.x() + 1.0);
  const auto r = sample_ultrasonic(standing(x, 0.2), g, mount);
  ASSERT_TRUE(r.has_value());
  EXPECT_NEAR(*r, 1.0, 0.005);
}

TEST(Ultrasonic, OpenGroundAndFarWall) {
  SensorMount mount;
  const auto open = terrain::build_scenario_terrain(terrain::Flat{});
  EXPECT_FALSE(sample_ultrasonic(standing(1.0, 3.0), open, mount).has_value());
  const auto far = wall_at(1.0 + mount.position.x() + 5.0, 9.0);
  EXPECT_FALSE(sample_ultrasonic(standing(1.0, 0.2), far, mount).has_value());
  // Within an extended range the same wall is seen.
  const auto r = sample_ultrasonic(standing(1.0, 0.2), far, mount, 6.0);
  ASSERT_TRUE(r.has_value());
  EXPECT_NEAR(*r, 5.0, 0.005);
}

TEST(Ultrasonic, ReadingsStayInRange) {
  SensorMount mount;
  for (double d = 0.1; d < 4.5; d += 0.25) {
    const auto g = wall_at(1.0 + mount.position.x() + d, 7.0);
    const auto r = sample_ultrasonic(standing(1.0, 0.2), g, mount);
    if (r) {
      EXPECT_GT(*r, 0.0);
      EXPECT_LE(*r, 4.0);
    } else {
      EXPECT_GT(d, 3.99);
    }
  }
}

TEST(Environment, NoSourcesIsAmbient) {
  EnvironmentField f;
  f.ambient_temperature_c = 31.5;
  f.ambient_humidity_pct = 64.0;
  const auto r = sample_environment(standing(2.0, 3.0), f);
  EXPECT_EQ(r.temperature_c, 31.5);
  EXPECT_EQ(r.humidity_pct, 64.0);
  EXPECT_EQ(r.gas_ppm, 0.0);
}

TEST(Environment, GaussianSource) {
  EnvironmentField f;
  f.ambient_gas_ppm = 5.0;
  f.sources.push_back({{2.0, 3.0, 0.15}, HazardKind::gas, 400.0, 0.5});
  EXPECT_NEAR(sample_environment(standing(2.0, 3.0), f).gas_ppm, 405.0, 1e-12);
  const auto at_sigma = sample_environment(standing(2.5, 3.0), f);
  EXPECT_NEAR(at_sigma.gas_ppm - 5.0, 400.0 * std::exp(-0.5), 1e-12);
  EXPECT_NEAR((at_sigma.gas_ppm - 5.0) / 400.0, 0.6065, 5e-5);
  EXPECT_EQ(at_sigma.temperature_c, f.ambient_temperature_c);  // gas does not heat
}

TEST(Environment, ContinuousAndDecreasing) {
  EnvironmentField f;
  f.sources.push_back({{1.0, 1.0, 0.0}, HazardKind::heat, 40.0, 0.8});
  double prev = std::numeric_limits<double>::infinity();
  for (double d = 0.0; d <= 4.0; d += 0.01) {
    const double t = sample_environment_at({1.0 + d, 1.0, 0.0}, f).temperature_c;
    EXPECT_LT(t, prev + 1e-15);
    if (d > 0) EXPECT_LT(prev - t, 40.0 * 0.01 / 0.8);  // bounded by the max gradient
    prev = t;
  }
}

TEST(Environment, HumidityClampedAndValidated) {
  EnvironmentField f;
  f.ambient_humidity_pct = 100.0;
  EXPECT_NO_THROW(f.validate());
  f.ambient_humidity_pct = 101.0;
  EXPECT_THROW(f.validate(), ValidationError);
  f.ambient_humidity_pct = 50.0;
  f.sources.push_back({{0, 0, 0}, HazardKind::gas, 1.0, 0.0});
  EXPECT_THROW(f.validate(), ValidationError);
  f.sources.back().sigma = 1.0;
  f.sources.back().intensity = -1.0;
  EXPECT_THROW(f.validate(), ValidationError);
}

TEST(Compass, Examples) {
  EXPECT_EQ(sample_compass(standing(0, 0, 0.0), 0.0), 0.0);
  EXPECT_EQ(sample_compass(standing(0, 0, 350.0), 20.0), 10.0);
  EXPECT_EQ(sample_compass(standing(0, 0, 90.0), -90.0), 0.0);
}

TEST(Compass, RangeAndPeriodicity) {
  for (double h = -720.0; h <= 720.0; h += 7.3) {
    const double c = wrap_degrees(h);
    EXPECT_GE(c, 0.0);
    EXPECT_LT(c, 360.0);
    EXPECT_NEAR(wrap_degrees(h + 360.0), c, 1e-9);
  }
  EXPECT_LT(wrap_degrees(-1e-18), 360.0);
}

TEST(SampleAll, SeededNoiseIsReproducible) {
  const auto g = terrain::build_scenario_terrain(terrain::WalledRoom{});
  EnvironmentField f;
  SensorSuiteConfig cfg;
  cfg.noise = true;
  std::mt19937_64 a(42), b(42), c(43);
  const auto s = standing(3.0, 3.0, 30.0);
  bool differs = false;
  for (int t = 0; t < 50; ++t) {
    const auto fa = sample_all(t, s, g, f, cfg, a);
    EXPECT_EQ(fa, sample_all(t, s, g, f, cfg, b));
    differs = differs || !(fa == sample_all(t, s, g, f, cfg, c));
    EXPECT_GE(fa.humidity_pct, 0.0);
    EXPECT_LE(fa.humidity_pct, 100.0);
    EXPECT_GE(fa.gas_ppm, 0.0);
  }
  EXPECT_TRUE(differs);
}

TEST(SampleAll, NoiseOffDoesNotDraw) {
  const auto g = terrain::build_scenario_terrain(terrain::Flat{});
  std::mt19937_64 rng(1), fresh(1);
  sample_all(0, standing(3.0, 3.0), g, {}, {}, rng);
  EXPECT_EQ(rng(), fresh());
}
