#include "rescuesim/chassis.hpp"

#include "rescuesim/errors.hpp"

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace rescuesim::chassis {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
// Angular slack when deciding whether the terrain holds the flipper.
constexpr double kContactToleranceDeg = 0.5;

struct Plane {
  double a = 0.0;  // height at the body centre
  double b = 0.0;  // dz/du along the heading
  double c = 0.0;  // dz/dv to the left
};

struct PlaneSample {
  double u;
  double v;
  double z;
};

Plane fit_plane(const std::vector<PlaneSample>& samples) {
  Eigen::MatrixXd A(static_cast<Eigen::Index>(samples.size()), 3);
  Eigen::VectorXd z(static_cast<Eigen::Index>(samples.size()));
  for (size_t i = 0; i < samples.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    A(r, 0) = 1.0;
    A(r, 1) = samples[i].u;
    A(r, 2) = samples[i].v;
    z(r) = samples[i].z;
  }
  const Eigen::Vector3d x = A.colPivHouseholderQr().solve(z);
  return {x(0), x(1), x(2)};
}

Eigen::Vector2d forward_dir(double heading_deg) {
  return {std::cos(heading_deg * kDeg), std::sin(heading_deg * kDeg)};
}

Eigen::Vector2d left_dir(double heading_deg) {
  return {-std::sin(heading_deg * kDeg), std::cos(heading_deg * kDeg)};
}

Eigen::Vector2d horizontal(const ChassisState& s, double u, double v) {
  return s.position + u * forward_dir(s.heading_deg) + v * left_dir(s.heading_deg);
}

void require_footprint_in_bounds(const ChassisState& s, const terrain::TerrainGrid& terrain,
                                 const ChassisConfig& config) {
  const double half_l = 0.5 * config.length;
  const double half_w = 0.5 * config.width;
  for (double u : {-half_l, config.hinge_x, half_l}) {
    for (double v : {-half_w, half_w}) {
      const Eigen::Vector2d p = horizontal(s, u, v);
      if (!terrain.contains(p.x(), p.y())) {
        throw BoundsError("chassis footprint leaves the terrain");
      }
    }
  }
}

void apply_plane(ChassisState& s, const Plane& plane) {
  s.elevation = plane.a;
  s.pitch_deg = std::atan(plane.b) / kDeg;
  s.roll_deg = std::atan(plane.c * std::cos(s.pitch_deg * kDeg)) / kDeg;
}

struct FlipperProbe {
  double demand_deg = -90.0;  // steepest terrain angle seen from the hinge
  double contact_radius = 0.0;
  // Per side: horizontal world position, terrain height and body-frame run of
  // the steepest sample.
  struct Side {
    bool valid = false;
    double angle_deg = -90.0;
    Eigen::Vector2d xy = Eigen::Vector2d::Zero();
    double z = 0.0;
    double run = 0.0;
  };
  std::array<Side, 2> sides{};
};

// Terrain points within flipper reach, expressed in the body frame of `s`,
// give the angle the flipper would rest at.
FlipperProbe probe_flipper(const ChassisState& s, const terrain::TerrainGrid& terrain,
                           const ChassisConfig& config) {
  const double lf = config.flipper_length();
  const double half_w = 0.5 * config.width;
  const Eigen::Matrix3d r = body_rotation(s);
  const Eigen::Vector3d origin(s.position.x(), s.position.y(), s.elevation);
  const Eigen::Vector2d fwd = forward_dir(s.heading_deg);

  const double span = lf / std::max(std::cos(s.pitch_deg * kDeg), 0.2);
  const double spacing = std::min(0.5 * terrain.cell_size(), lf / 32.0);
  const int n = std::max(1, static_cast<int>(std::ceil(span / spacing)));

  struct Hit {
    double angle_deg;
    double radius;
  };
  std::vector<Hit> hits;
  FlipperProbe probe;

  for (size_t side = 0; side < 2; ++side) {
    const double v = side == 0 ? half_w : -half_w;
    const Eigen::Vector3d hinge_body(config.hinge_x, v, 0.0);
    const Eigen::Vector3d hinge_world = origin + r * hinge_body;
    auto& best = probe.sides[side];
    for (int k = 1; k <= n; ++k) {
      const double s_h = span * static_cast<double>(k) / static_cast<double>(n);
      const Eigen::Vector2d xy = hinge_world.head<2>() + s_h * fwd;
      if (!terrain.contains(xy.x(), xy.y())) continue;
      const double z = terrain::height_at(terrain, xy.x(), xy.y());
      const Eigen::Vector3d rel = r.transpose() * (Eigen::Vector3d(xy.x(), xy.y(), z) - origin) - hinge_body;
      if (rel.x() <= 0.0) continue;
      const double radius = std::hypot(rel.x(), rel.z());
      if (radius > lf + 1e-9) continue;
      const double angle = std::atan2(rel.z(), rel.x()) / kDeg;
      hits.push_back({angle, radius});
      if (angle > best.angle_deg) {
        best = {true, angle, xy, z, rel.x()};
      }
    }
  }
  for (const auto& h : hits) probe.demand_deg = std::max(probe.demand_deg, h.angle_deg);
  for (const auto& h : hits) {
    if (h.angle_deg >= probe.demand_deg - kContactToleranceDeg) {
      probe.contact_radius = std::max(probe.contact_radius, h.radius);
    }
  }
  if (probe.contact_radius >= lf - 1.5 * spacing) probe.contact_radius = lf;
  return probe;
}

}  // namespace

void ChassisConfig::validate() const {
  auto positive = [](double x) { return std::isfinite(x) && x > 0.0; };
  if (!positive(length) || !positive(width) || !positive(height) || !positive(com_height)) {
    throw ValidationError("chassis dimensions must be positive");
  }
  if (mass_arm_g < 0 || mass_tracks_g < 0 || mass_others_g < 0) {
    throw ValidationError("chassis masses must be non-negative");
  }
  if (!(front_fraction > 0.0 && front_fraction < 1.0)) {
    throw ValidationError("front_fraction must be in (0, 1)");
  }
  if (!(flipper_max_deg > 0.0 && flipper_max_deg < 90.0)) {
    throw ValidationError("flipper_max must be in (0, 90) degrees");
  }
  if (!(climb_max_deg > 0.0 && climb_max_deg < flipper_max_deg)) {
    throw ValidationError("climb_max must be positive and below flipper_max");
  }
  if (!(payload_max_kg >= 0.0)) throw ValidationError("payload_max must be non-negative");
  if (!(std::abs(hinge_x) < 0.5 * length)) throw ValidationError("hinge must lie inside the footprint");
  if (!positive(v_max) || !positive(flipper_rate_max_deg_s) || !positive(track_width_factor)) {
    throw ValidationError("chassis rates must be positive");
  }
}

ChassisState initial_state(const ChassisConfig& config, Eigen::Vector2d position,
                           double heading_deg) {
  ChassisState s;
  s.position = std::move(position);
  s.heading_deg = heading_deg;
  s.flipper_contact_x = 0.5 * config.length;
  return s;
}

Eigen::Matrix3d body_rotation(const ChassisState& state) {
  return (Eigen::AngleAxisd(state.heading_deg * kDeg, Eigen::Vector3d::UnitZ()) *
          Eigen::AngleAxisd(-state.pitch_deg * kDeg, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(state.roll_deg * kDeg, Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

Eigen::Vector3d body_to_world(const ChassisState& state, const Eigen::Vector3d& body_point) {
  return Eigen::Vector3d(state.position.x(), state.position.y(), state.elevation) +
         body_rotation(state) * body_point;
}

std::array<Eigen::Vector3d, 2> front_contact_edge(const ChassisConfig& config, double alpha_deg) {
  const double a = alpha_deg * kDeg;
  const double lf = config.flipper_length();
  const double x = config.hinge_x + lf * std::cos(a);
  const double z = lf * std::sin(a);
  const double half_w = 0.5 * config.width;
  return {Eigen::Vector3d(x, half_w, z), Eigen::Vector3d(x, -half_w, z)};
}

ChassisState passive_conform(const ChassisState& state, const terrain::TerrainGrid& terrain,
                             const ChassisConfig& config) {
  require_footprint_in_bounds(state, terrain, config);
  ChassisState s = state;

  const double half_l = 0.5 * config.length;
  const double half_w = 0.5 * config.width;
  std::vector<PlaneSample> contacts;
  for (double u : {-half_l, config.hinge_x}) {
    for (double v : {-half_w, half_w}) {
      const Eigen::Vector2d p = horizontal(s, u, v);
      contacts.push_back({u, v, terrain::height_at(terrain, p.x(), p.y())});
    }
  }
  apply_plane(s, fit_plane(contacts));

  auto probe = probe_flipper(s, terrain, config);
  const double alpha_max = config.flipper_max_deg;
  if (probe.demand_deg > alpha_max) {
    // Flipper at its stop cannot clear the terrain: it carries the front and
    // joins the rear corners in the plane fit.
    const double lift = std::tan(alpha_max * kDeg);
    const Eigen::Vector2d fwd = forward_dir(s.heading_deg);
    const Eigen::Vector2d left = left_dir(s.heading_deg);
    for (const auto& side : probe.sides) {
      if (!side.valid) continue;
      const Eigen::Vector2d d = side.xy - s.position;
      contacts.push_back({d.dot(fwd), d.dot(left), side.z - side.run * lift});
    }
    apply_plane(s, fit_plane(contacts));
    probe = probe_flipper(s, terrain, config);
  }

  const double commanded = std::clamp(s.flipper_command_deg, 0.0, alpha_max);
  s.flipper_deg = std::clamp(std::max(commanded, probe.demand_deg), 0.0, alpha_max);
  if (probe.demand_deg >= s.flipper_deg - kContactToleranceDeg && probe.contact_radius > 0.0) {
    s.flipper_contact_x = config.hinge_x + probe.contact_radius * std::cos(s.flipper_deg * kDeg);
  } else {
    s.flipper_contact_x.reset();
  }
  return s;
}

Eigen::Vector3d compute_com(const ChassisState& state, const ChassisConfig& config,
                            const arm::ArmConfig& arm_config, const arm::JointState& joints) {
  const double half_l = 0.5 * config.length;
  const double h = config.com_height;
  const double lf = config.flipper_length();
  const double a = state.flipper_deg * kDeg;

  const double m_front = config.front_fraction * config.mass_tracks();
  const double m_rear = (1.0 - config.front_fraction) * config.mass_tracks();
  const double m_others = config.mass_others();
  const double m_arm = config.mass_arm();
  const double m_payload = state.payload_kg;

  const Eigen::Vector3d rear(0.5 * (config.hinge_x - half_l), 0.0, h);
  // Front body CoM sits mid-flipper at com_height when lowered and rotates
  // rigidly about the hinge axis.
  const Eigen::Vector3d front(config.hinge_x + 0.5 * lf * std::cos(a) - h * std::sin(a), 0.0,
                              0.5 * lf * std::sin(a) + h * std::cos(a));
  const Eigen::Vector3d centre(0.0, 0.0, h);

  arm::JointState home;
  for (size_t i = 0; i < static_cast<size_t>(arm::kJoints); ++i) {
    const auto& l = arm_config.links[i];
    home.angles_deg[i] = std::clamp(0.0, l.min_deg, l.max_deg);
  }
  const Eigen::Vector3d arm_point =
      centre + arm::arm_center_of_mass(arm_config, joints) - arm::arm_center_of_mass(arm_config, home);

  Eigen::Vector3d weighted = m_rear * rear + m_front * front + m_others * centre + m_arm * arm_point;
  double total = m_rear + m_front + m_others + m_arm;
  if (m_payload > 0.0) {
    weighted += m_payload * arm::forward_kinematics(arm_config, joints).position;
    total += m_payload;
  }
  return weighted / total;
}

std::vector<Eigen::Vector2d> convex_hull(std::vector<Eigen::Vector2d> pts) {
  std::sort(pts.begin(), pts.end(), [](const auto& p, const auto& q) {
    return p.x() < q.x() || (p.x() == q.x() && p.y() < q.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  auto cross = [](const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<Eigen::Vector2d> hull(2 * pts.size());
  size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  for (size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

double signed_margin(const std::vector<Eigen::Vector2d>& polygon, const Eigen::Vector2d& p) {
  double inside = std::numeric_limits<double>::infinity();
  double outside = std::numeric_limits<double>::infinity();
  bool is_inside = true;
  for (size_t i = 0; i < polygon.size(); ++i) {
    const Eigen::Vector2d& a = polygon[i];
    const Eigen::Vector2d& b = polygon[(i + 1) % polygon.size()];
    const Eigen::Vector2d e = b - a;
    const double len = e.norm();
    const double d = (e.x() * (p.y() - a.y()) - e.y() * (p.x() - a.x())) / len;
    if (d < 0.0) is_inside = false;
    inside = std::min(inside, d);
    const double t = std::clamp((p - a).dot(e) / (len * len), 0.0, 1.0);
    outside = std::min(outside, (a + t * e - p).norm());
  }
  return is_inside ? inside : -outside;
}

StabilityReport compute_stability(const ChassisState& state, const ChassisConfig& config,
                                  const terrain::TerrainGrid& terrain,
                                  const arm::ArmConfig& arm_config,
                                  const arm::JointState& joints) {
  require_footprint_in_bounds(state, terrain, config);
  StabilityReport report;
  report.com = compute_com(state, config, arm_config, joints);

  // Quasi-static ZMP: the CoM projected along gravity onto the contact plane.
  const Eigen::Vector3d g = body_rotation(state).transpose() * Eigen::Vector3d(0.0, 0.0, -1.0);
  const double down = std::max(-g.z(), 1e-9);
  const double t = report.com.z() / down;
  report.zmp_projection = (report.com + t * g).head<2>();

  const double half_l = 0.5 * config.length;
  const double half_w = 0.5 * config.width;
  std::vector<Eigen::Vector2d> contacts{{-half_l, -half_w},
                                        {-half_l, half_w},
                                        {config.hinge_x, -half_w},
                                        {config.hinge_x, half_w}};
  if (state.flipper_contact_x && *state.flipper_contact_x > config.hinge_x) {
    contacts.emplace_back(*state.flipper_contact_x, -half_w);
    contacts.emplace_back(*state.flipper_contact_x, half_w);
  }
  report.support_polygon = convex_hull(std::move(contacts));
  if (report.support_polygon.size() < 3) {
    throw SingularSupportError("support polygon needs three non-collinear contacts");
  }
  report.margin = signed_margin(report.support_polygon, report.zmp_projection);
  report.tipped = report.margin < 0.0;
  return report;
}

bool check_climbable(double slope_deg, double flipper_max_deg, double payload_kg,
                     const ChassisConfig& config) {
  if (!(slope_deg >= 0.0) || !(payload_kg >= 0.0)) {
    throw ValidationError("check_climbable needs slope >= 0 and payload >= 0");
  }
  const double limit = std::min(config.climb_max_deg, flipper_max_deg);
  return slope_deg <= limit && payload_kg <= config.payload_max_kg;
}

ChassisState step_locomotion(const ChassisState& state, const ActuatorSetpoints& setpoints,
                             const terrain::TerrainGrid& terrain, const ChassisConfig& config,
                             double dt) {
  if (!(dt > 0.0 && dt <= 0.1)) throw ValidationError("locomotion dt must be in (0, 0.1] s");
  ChassisState s = state;
  s.track_speed_left = std::clamp(setpoints.track_left, -config.v_max, config.v_max);
  s.track_speed_right = std::clamp(setpoints.track_right, -config.v_max, config.v_max);

  const double v = 0.5 * (s.track_speed_left + s.track_speed_right);
  const double omega =
      (s.track_speed_right - s.track_speed_left) / (config.width * config.track_width_factor);
  const double advance = v * dt * std::cos(s.pitch_deg * kDeg);
  s.position += advance * forward_dir(s.heading_deg);
  s.heading_deg += omega * dt / kDeg;
  if (s.heading_deg >= 360.0) s.heading_deg -= 360.0;
  if (s.heading_deg < 0.0) s.heading_deg += 360.0;

  const double rate = std::clamp(setpoints.flipper_rate, -config.flipper_rate_max_deg_s,
                                 config.flipper_rate_max_deg_s);
  s.flipper_command_deg = std::clamp(s.flipper_command_deg + rate * dt, 0.0, config.flipper_max_deg);

  return passive_conform(s, terrain, config);
}

double tip_over_angle(const ChassisConfig& config, TipDirection direction) {
  if (!(config.com_height > 0.0)) throw ValidationError("tip_over_angle needs com_height > 0");
  const double half = direction == TipDirection::pitch ? 0.5 * config.length : 0.5 * config.width;
  return std::atan(half / config.com_height) / kDeg;
}

double contact_plane_slope(const ChassisState& state) {
  const double c = std::cos(state.pitch_deg * kDeg) * std::cos(state.roll_deg * kDeg);
  return std::acos(std::clamp(c, -1.0, 1.0)) / kDeg;
}

}  // namespace rescuesim::chassis
