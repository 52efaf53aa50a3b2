#include "rescuesim/arm.hpp"

#include "rescuesim/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

namespace rescuesim::arm {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double radical_inverse(int index, int base) {
  double f = 1.0;
  double r = 0.0;
  while (index > 0) {
    f /= base;
    r += f * (index % base);
    index /= base;
  }
  return r;
}

// Halton point `k` mapped into the joint limit box.
JointState restart_seed(const ArmConfig& config, int k) {
  static constexpr std::array<int, kJoints> kPrimes{2, 3, 5, 7, 11, 13};
  JointState s;
  for (int i = 0; i < kJoints; ++i) {
    const auto& l = config.links[static_cast<size_t>(i)];
    s.angles_deg[static_cast<size_t>(i)] =
        l.min_deg + (l.max_deg - l.min_deg) * radical_inverse(k, kPrimes[static_cast<size_t>(i)]);
  }
  return s;
}

Eigen::Vector3d rotation_error_vector(const Eigen::Matrix3d& target, const Eigen::Matrix3d& current) {
  const Eigen::AngleAxisd aa(target * current.transpose());
  return aa.angle() * aa.axis();
}

struct Attempt {
  bool converged = false;
  JointState joints;
  double position_residual = 0.0;
  double orientation_residual = 0.0;
};

Attempt solve_from(const ArmConfig& config, const EndEffectorPose& target, JointState q,
                   const IkOptions& opt) {
  for (auto& v : q.velocities_deg_s) v = 0.0;
  Attempt best;
  best.position_residual = std::numeric_limits<double>::infinity();
  best.orientation_residual = std::numeric_limits<double>::infinity();

  for (int it = 0;; ++it) {
    const auto kin = forward_kinematics_full(config, q);
    Eigen::Matrix<double, 6, 1> err;
    err.head<3>() = target.position - kin.pose.position;
    err.tail<3>() = rotation_error_vector(target.orientation, kin.pose.orientation);
    const double ep = err.head<3>().norm();
    const double eo = err.tail<3>().norm();
    if (ep + eo < best.position_residual + best.orientation_residual) {
      best.joints = q;
      best.position_residual = ep;
      best.orientation_residual = eo;
    }
    if (ep < opt.position_tolerance && eo < opt.orientation_tolerance) {
      best.converged = true;
      best.joints = q;
      return best;
    }
    if (it >= opt.max_iterations) return best;

    // Damping fades with the residual so the last iterations are undamped
    // Gauss-Newton steps; the step cap keeps them bounded near singularities.
    const double lambda = opt.damping * std::min(1.0, err.norm() / opt.damping_scale);
    const double lambda2 = lambda * lambda;
    const Jacobian J = jacobian(config, q);
    const Eigen::Matrix<double, 6, 6> jjt =
        J * J.transpose() + lambda2 * Eigen::Matrix<double, 6, 6>::Identity();
    Eigen::Matrix<double, kJoints, 1> dq = J.transpose() * jjt.ldlt().solve(err);
    dq /= kDeg;
    const double largest = dq.cwiseAbs().maxCoeff();
    if (largest > opt.max_step_deg) dq *= opt.max_step_deg / largest;
    for (int i = 0; i < kJoints; ++i) {
      const auto& l = config.links[static_cast<size_t>(i)];
      auto& a = q.angles_deg[static_cast<size_t>(i)];
      a = std::clamp(a + dq(i), l.min_deg, l.max_deg);
    }
  }
}

}  // namespace

double ArmConfig::total_mass() const {
  double m = gripper_mass;
  for (const auto& l : links) m += l.mass;
  return m;
}

double ArmConfig::total_reach() const {
  double r = reach.norm();
  for (const auto& l : links) r += std::abs(l.a) + std::abs(l.d);
  return r;
}

void ArmConfig::validate() const {
  for (size_t i = 0; i < links.size(); ++i) {
    const auto& l = links[i];
    const bool finite = std::isfinite(l.a) && std::isfinite(l.twist_deg) && std::isfinite(l.d) &&
                        std::isfinite(l.offset_deg) && std::isfinite(l.min_deg) &&
                        std::isfinite(l.max_deg) && std::isfinite(l.mass);
    if (!finite) throw ValidationError("arm row " + std::to_string(i + 1) + " is not finite");
    if (!(l.min_deg < l.max_deg)) {
      throw ValidationError("arm row " + std::to_string(i + 1) + " needs min < max");
    }
    if (l.mass < 0.0) throw ValidationError("arm row " + std::to_string(i + 1) + " has negative mass");
  }
  if (!(gripper_mass >= 0.0) || !reach.allFinite() || !mount.allFinite()) {
    throw ValidationError("arm gripper parameters are invalid");
  }
}

void ArmConfig::validate_mass_budget(double expected_kg) const {
  validate();
  if (std::abs(total_mass() - expected_kg) > 1e-9) {
    std::ostringstream s;
    s << "arm link and gripper masses sum to " << total_mass() << " kg, expected " << expected_kg;
    throw ValidationError(s.str());
  }
}

ArmConfig default_arm_config() {
  ArmConfig c;
  //            a     twist   d     offset  min    max    mass
  c.links[0] = {0.00, 90.0, 0.08, 0.0, -160.0, 160.0, 0.9};
  c.links[1] = {0.20, 0.0, 0.00, 90.0, -100.0, 100.0, 0.9};
  c.links[2] = {0.00, 90.0, 0.00, 0.0, -135.0, 135.0, 0.7};
  c.links[3] = {0.00, -90.0, 0.20, 0.0, -160.0, 160.0, 0.6};
  c.links[4] = {0.00, 90.0, 0.00, 45.0, -110.0, 110.0, 0.4};
  c.links[5] = {0.00, 0.0, 0.07, 0.0, -160.0, 160.0, 0.3};
  c.gripper_mass = 0.5;
  c.reach = Eigen::Vector3d(0.0, 0.0, 0.08);
  c.mount = Eigen::Vector3d(0.05, 0.0, 0.21);
  return c;
}

void check_limits(const ArmConfig& config, const JointState& joints) {
  for (size_t i = 0; i < kJoints; ++i) {
    const double a = joints.angles_deg[i];
    const auto& l = config.links[i];
    if (!std::isfinite(a) || a < l.min_deg || a > l.max_deg) {
      std::ostringstream s;
      s << "joint " << i + 1 << " angle " << a << " deg outside [" << l.min_deg << ", " << l.max_deg
        << "]";
      throw LimitError(s.str());
    }
  }
}

Eigen::Isometry3d link_transform(const LinkParams& link, double angle_deg) {
  const double theta = (angle_deg + link.offset_deg) * kDeg;
  const double alpha = link.twist_deg * kDeg;
  const double ct = std::cos(theta), st = std::sin(theta);
  const double ca = std::cos(alpha), sa = std::sin(alpha);
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.linear() << ct, -st * ca, st * sa,
                st, ct * ca, -ct * sa,
                0.0, sa, ca;
  t.translation() << link.a * ct, link.a * st, link.d;
  return t;
}

ArmKinematics forward_kinematics_full(const ArmConfig& config, const JointState& joints) {
  check_limits(config, joints);
  ArmKinematics k;
  k.frames[0] = Eigen::Isometry3d::Identity();
  k.frames[0].translation() = config.mount;
  for (size_t i = 0; i < kJoints; ++i) {
    k.frames[i + 1] = k.frames[i] * link_transform(config.links[i], joints.angles_deg[i]);
  }
  const auto& last = k.frames[kJoints];
  k.pose.position = last * config.reach;
  k.pose.orientation = last.linear();
  return k;
}

EndEffectorPose forward_kinematics(const ArmConfig& config, const JointState& joints) {
  return forward_kinematics_full(config, joints).pose;
}

std::array<Eigen::Vector3d, kJoints + 1> link_mass_points(const ArmConfig&,
                                                          const ArmKinematics& kin) {
  std::array<Eigen::Vector3d, kJoints + 1> pts;
  for (int i = 1; i <= kJoints; ++i) {
    pts[static_cast<size_t>(i - 1)] = 0.5 * (kin.origin(i - 1) + kin.origin(i));
  }
  pts[kJoints] = kin.pose.position;
  return pts;
}

Eigen::Vector3d arm_center_of_mass(const ArmConfig& config, const JointState& joints) {
  const auto kin = forward_kinematics_full(config, joints);
  const auto pts = link_mass_points(config, kin);
  Eigen::Vector3d weighted = config.gripper_mass * pts[kJoints];
  for (size_t i = 0; i < kJoints; ++i) weighted += config.links[i].mass * pts[i];
  const double m = config.total_mass();
  return m > 0.0 ? Eigen::Vector3d(weighted / m) : config.mount;
}

Jacobian jacobian(const ArmConfig& config, const JointState& joints) {
  const auto kin = forward_kinematics_full(config, joints);
  const Eigen::Vector3d p = kin.pose.position;
  Jacobian J;
  for (int j = 1; j <= kJoints; ++j) {
    const Eigen::Vector3d z = kin.joint_axis(j);
    J.col(j - 1).head<3>() = z.cross(p - kin.origin(j - 1));
    J.col(j - 1).tail<3>() = z;
  }
  return J;
}

double orientation_error(const Eigen::Matrix3d& target, const Eigen::Matrix3d& current) {
  return Eigen::AngleAxisd(target * current.transpose()).angle();
}

JointState inverse_kinematics(const ArmConfig& config, const EndEffectorPose& target,
                              const JointState& seed, const IkOptions& options) {
  const Eigen::Matrix3d& r = target.orientation;
  if (!target.position.allFinite() || !r.allFinite() ||
      (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9 ||
      std::abs(r.determinant() - 1.0) > 1e-9) {
    throw ValidationError("IK target orientation is not a rotation matrix");
  }

  JointState start = seed;
  for (size_t i = 0; i < kJoints; ++i) {
    const auto& l = config.links[i];
    start.angles_deg[i] = std::clamp(start.angles_deg[i], l.min_deg, l.max_deg);
  }

  Attempt best = solve_from(config, target, start, options);
  for (int k = 1; !best.converged && k <= options.restarts; ++k) {
    Attempt next = solve_from(config, target, restart_seed(config, k), options);
    if (next.converged || next.position_residual + next.orientation_residual <
                              best.position_residual + best.orientation_residual) {
      best = next;
    }
  }
  if (!best.converged) {
    std::ostringstream s;
    s << "IK did not converge: best position residual " << best.position_residual
      << " m, orientation residual " << best.orientation_residual << " rad";
    throw UnreachableTargetError(s.str(), best.position_residual, best.orientation_residual);
  }
  return best.joints;
}

Eigen::Vector3d angular_momentum(const ArmConfig& config, const JointState& joints) {
  const auto kin = forward_kinematics_full(config, joints);
  const auto pts = link_mass_points(config, kin);
  const Eigen::Vector3d base = kin.origin(0);

  Eigen::Vector3d total = Eigen::Vector3d::Zero();
  for (size_t k = 0; k <= kJoints; ++k) {
    const double m = k < kJoints ? config.links[k].mass : config.gripper_mass;
    if (m == 0.0) continue;
    // Link k (0-based) moves with joints 1..k+1; the gripper with all six.
    const int moving = k < kJoints ? static_cast<int>(k) + 1 : kJoints;
    Eigen::Vector3d v = Eigen::Vector3d::Zero();
    for (int j = 1; j <= moving; ++j) {
      const double rate = joints.velocities_deg_s[static_cast<size_t>(j - 1)] * kDeg;
      v += rate * kin.joint_axis(j).cross(pts[k] - kin.origin(j - 1));
    }
    total += m * (pts[k] - base).cross(v);
  }
  return total;
}

double power_estimate(const ArmConfig& config, const JointState& joints, double gravity) {
  const auto kin = forward_kinematics_full(config, joints);
  const auto pts = link_mass_points(config, kin);
  const Eigen::Vector3d g(0.0, 0.0, -gravity);

  double power = 0.0;
  for (int j = 1; j <= kJoints; ++j) {
    const double rate = joints.velocities_deg_s[static_cast<size_t>(j - 1)] * kDeg;
    if (rate == 0.0) continue;
    Eigen::Vector3d moment = Eigen::Vector3d::Zero();
    // Everything distal to joint j: links j..6 and the gripper.
    for (size_t k = static_cast<size_t>(j - 1); k <= kJoints; ++k) {
      const double m = k < kJoints ? config.links[k].mass : config.gripper_mass;
      moment += (pts[k] - kin.origin(j - 1)).cross(m * g);
    }
    const double torque = kin.joint_axis(j).dot(moment);
    power += std::abs(torque * rate);
  }
  return power;
}

}  // namespace rescuesim::arm
