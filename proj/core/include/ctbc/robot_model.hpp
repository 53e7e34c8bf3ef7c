#pragma once

#include <Eigen/Core>
#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "ctbc/config.hpp"

namespace ctbc {

inline constexpr int kNumLegs = 2;
inline constexpr int kJointsPerLeg = 2;  // hip pitch, knee pitch

struct Vec2 {
  double x = 0.0, z = 0.0;
};

struct BasePose {
  double x = 0.0, z = 0.0, pitch = 0.0;
};

// Parametric planar wheeled biped: per leg hip pitch + knee pitch + wheel.
// Leg joints are position controlled, wheels velocity controlled.
// Joint vector layout: [hipL, kneeL, hipR, kneeR]; wheels [L, R].
struct RobotModel {
  double base_mass = 12.0;       // kg
  double base_inertia = 0.25;    // kg m^2 about base com
  Vec2 base_com_offset{0.0, 0.15};  // com relative to hip pivot, base frame

  double thigh_length = 0.30;  // m
  double shank_length = 0.30;  // m
  double thigh_mass = 1.5;     // kg, lumped at link midpoint
  double shank_mass = 1.0;     // kg, lumped at link midpoint
  double wheel_mass = 1.0;     // kg, at axle
  double wheel_radius = 0.127; // m
  double wheel_inertia = 0.5 * 1.0 * 0.127 * 0.127;  // kg m^2, spin axis

  Eigen::Vector4d joint_lower{-1.2, -2.2, -1.2, -2.2};  // rad
  Eigen::Vector4d joint_upper{1.5, 0.4, 1.5, 0.4};      // rad
  Eigen::Vector4d leg_torque_limit{40.0, 40.0, 40.0, 40.0};  // N m
  double wheel_torque_limit = 40.0;  // N m
  double wheel_speed_limit = 25.0;   // rad/s

  Eigen::Vector4d default_pose = Eigen::Vector4d::Zero();  // rad, set by default_model
  double nominal_base_height = 0.69;  // m, hip pivot above ground when standing

  // stiff enough to hold the fore-aft stance statically; at 40 N m/rad the
  // sag under gravity tips the robot over
  Eigen::Vector4d kp{80.0, 80.0, 80.0, 80.0};  // N m/rad
  Eigen::Vector4d kd{3.0, 3.0, 3.0, 3.0};      // N m s/rad
  double wheel_vel_gain = 2.0;                 // N m s/rad
  double wheel_vel_ki = 60.0;                  // N m/rad, velocity-servo integrator

  // Penalty contact parameters (wheel vs heightfield).
  double contact_kn = 6.0e4;   // N/m
  double contact_cn = 400.0;   // N s/m
  double friction = 1.0;       // default mu, randomized per episode
  double penetration_tolerance = 0.005;  // m

  int n_leg_joints() const { return kNumLegs * kJointsPerLeg; }
  int n_wheels() const { return kNumLegs; }
  int action_dim() const { return n_leg_joints() + n_wheels(); }
  double total_mass() const {
    return base_mass + kNumLegs * (thigh_mass + shank_mass + wheel_mass);
  }
  double weight() const { return total_mass() * 9.81; }
  double leg_length() const { return thigh_length + shank_length; }

  // Empty when the model satisfies all invariants.
  std::vector<std::string> validate() const;
};

struct ActuatorCommand {
  Eigen::Vector4d leg_targets = Eigen::Vector4d::Zero();   // rad, absolute PD targets
  Eigen::Vector2d wheel_targets = Eigen::Vector2d::Zero(); // rad/s
};

// Valid default model echoing the Tron1 scale (wheel radius 0.127 m).
// The default stance splits the feet fore-aft so the robot is statically
// stable in the sagittal plane.
RobotModel default_model();

// Same as default_model but with any recognized key overridden from cfg.
// Keys: base_mass, base_inertia, thigh_length, shank_length, thigh_mass,
// shank_mass, wheel_mass, wheel_radius, wheel_inertia, joint_lower_hip,
// joint_upper_hip, joint_lower_knee, joint_upper_knee, leg_torque_limit,
// wheel_torque_limit, wheel_speed_limit, nominal_base_height, kp, kd,
// wheel_vel_gain, wheel_vel_ki, contact_kn, contact_cn, friction,
// stance_split, penetration_tolerance.
RobotModel model_from_config(const Config& cfg);

// World-frame wheel-axle centers for both legs. q = [hipL,kneeL,hipR,kneeR].
// Throws std::invalid_argument on dimension mismatch.
std::array<Vec2, kNumLegs> forward_kinematics(const RobotModel& model,
                                              const Eigen::VectorXd& q,
                                              const BasePose& base);

// Hip/knee angles placing the wheel axle at (dx, dz) relative to the hip
// pivot (base frame, z down negative). Knee-back solution.
// Throws std::invalid_argument if the point is out of reach.
std::array<double, 2> leg_ik(const RobotModel& model, double dx, double dz);

}  // namespace ctbc
