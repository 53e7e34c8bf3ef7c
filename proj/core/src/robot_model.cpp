#include "ctbc/robot_model.hpp"

#include <cmath>

namespace ctbc {

std::vector<std::string> RobotModel::validate() const {
  std::vector<std::string> errs;
  auto require = [&errs](bool ok, const std::string& msg) {
    if (!ok) errs.push_back(msg);
  };
  require(wheel_radius > 0.0, "wheel_radius must be > 0");
  require(base_mass > 0.0 && thigh_mass > 0.0 && shank_mass > 0.0 && wheel_mass > 0.0,
          "all masses must be > 0");
  require(thigh_length > 0.0 && shank_length > 0.0, "link lengths must be > 0");
  require(base_inertia > 0.0 && wheel_inertia > 0.0, "inertias must be > 0");
  for (int j = 0; j < 4; ++j) {
    if (!(joint_lower[j] < joint_upper[j]))
      errs.push_back("joint_limits lower must be < upper (joint " + std::to_string(j) + ")");
    if (!(default_pose[j] > joint_lower[j] && default_pose[j] < joint_upper[j]))
      errs.push_back("default_pose must be strictly inside joint_limits (joint " +
                     std::to_string(j) + ")");
  }
  require(nominal_base_height <= wheel_radius + leg_length() + 1e-12,
          "nominal_base_height exceeds wheel_radius + leg length");
  return errs;
}

std::array<double, 2> leg_ik(const RobotModel& model, double dx, double dz) {
  const double l1 = model.thigh_length, l2 = model.shank_length;
  const double r2 = dx * dx + dz * dz;
  const double r = std::sqrt(r2);
  if (r > l1 + l2 || r < std::abs(l1 - l2))
    throw std::invalid_argument("leg_ik: target out of reach");
  // q measured from straight-down; knee-back branch (knee angle <= 0).
  const double cos_knee = (r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
  const double knee = -std::acos(std::clamp(cos_knee, -1.0, 1.0));
  const double alpha = std::atan2(dx, -dz);  // target direction from vertical down
  const double beta = std::atan2(l2 * std::sin(-knee), l1 + l2 * std::cos(knee));
  const double hip = alpha + beta;
  return {hip, knee};
}

RobotModel default_model() {
  RobotModel m;
  // Fore-aft stance split: left foot forward, right foot back.
  const double stance_split = 0.12;  // m, half distance between feet
  const double drop = m.nominal_base_height - m.wheel_radius;
  auto left = leg_ik(m, stance_split, -drop);
  auto right = leg_ik(m, -stance_split, -drop);
  m.default_pose << left[0], left[1], right[0], right[1];
  return m;
}

RobotModel model_from_config(const Config& cfg) {
  RobotModel d = default_model();
  RobotModel m = d;
  m.base_mass = cfg.get_double("base_mass", d.base_mass);
  m.base_inertia = cfg.get_double("base_inertia", d.base_inertia);
  m.thigh_length = cfg.get_double("thigh_length", d.thigh_length);
  m.shank_length = cfg.get_double("shank_length", d.shank_length);
  m.thigh_mass = cfg.get_double("thigh_mass", d.thigh_mass);
  m.shank_mass = cfg.get_double("shank_mass", d.shank_mass);
  m.wheel_mass = cfg.get_double("wheel_mass", d.wheel_mass);
  m.wheel_radius = cfg.get_double("wheel_radius", d.wheel_radius);
  m.wheel_inertia = cfg.get_double("wheel_inertia", 0.5 * m.wheel_mass * m.wheel_radius * m.wheel_radius);
  const double jl_hip = cfg.get_double("joint_lower_hip", d.joint_lower[0]);
  const double ju_hip = cfg.get_double("joint_upper_hip", d.joint_upper[0]);
  const double jl_knee = cfg.get_double("joint_lower_knee", d.joint_lower[1]);
  const double ju_knee = cfg.get_double("joint_upper_knee", d.joint_upper[1]);
  m.joint_lower << jl_hip, jl_knee, jl_hip, jl_knee;
  m.joint_upper << ju_hip, ju_knee, ju_hip, ju_knee;
  m.leg_torque_limit.setConstant(cfg.get_double("leg_torque_limit", d.leg_torque_limit[0]));
  m.wheel_torque_limit = cfg.get_double("wheel_torque_limit", d.wheel_torque_limit);
  m.wheel_speed_limit = cfg.get_double("wheel_speed_limit", d.wheel_speed_limit);
  m.nominal_base_height = cfg.get_double("nominal_base_height", d.nominal_base_height);
  m.kp.setConstant(cfg.get_double("kp", d.kp[0]));
  m.kd.setConstant(cfg.get_double("kd", d.kd[0]));
  m.wheel_vel_gain = cfg.get_double("wheel_vel_gain", d.wheel_vel_gain);
  m.wheel_vel_ki = cfg.get_double("wheel_vel_ki", d.wheel_vel_ki);
  m.contact_kn = cfg.get_double("contact_kn", d.contact_kn);
  m.contact_cn = cfg.get_double("contact_cn", d.contact_cn);
  m.friction = cfg.get_double("friction", d.friction);
  m.penetration_tolerance = cfg.get_double("penetration_tolerance", d.penetration_tolerance);
  const double split = cfg.get_double("stance_split", 0.12);
  const double drop = m.nominal_base_height - m.wheel_radius;
  auto left = leg_ik(m, split, -drop);
  auto right = leg_ik(m, -split, -drop);
  m.default_pose << left[0], left[1], right[0], right[1];
  return m;
}

std::array<Vec2, kNumLegs> forward_kinematics(const RobotModel& model,
                                              const Eigen::VectorXd& q,
                                              const BasePose& base) {
  if (q.size() != model.n_leg_joints())
    throw std::invalid_argument("forward_kinematics: joint vector has size " +
                                std::to_string(q.size()) + ", expected " +
                                std::to_string(model.n_leg_joints()));
  std::array<Vec2, kNumLegs> feet;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const double hip = q[2 * leg];
    const double knee = q[2 * leg + 1];
    const double phi1 = base.pitch + hip;
    const double phi2 = phi1 + knee;
    feet[leg].x = base.x + model.thigh_length * std::sin(phi1) +
                  model.shank_length * std::sin(phi2);
    feet[leg].z = base.z - model.thigh_length * std::cos(phi1) -
                  model.shank_length * std::cos(phi2);
  }
  return feet;
}

}  // namespace ctbc
