#pragma once

#include <Eigen/Core>
#include <array>
#include <optional>

#include "ctbc/robot_model.hpp"
#include "ctbc/terrain.hpp"

namespace ctbc {

// Full physical state of the planar biped. Generalized coordinates are
// [base x, base z, pitch, hipL, kneeL, hipR, kneeR] plus absolute wheel
// spin angles. Pitch is CCW in the x-z plane (x right, z up).
struct SimState {
  BasePose base;
  Eigen::Vector3d base_vel = Eigen::Vector3d::Zero();  // vx, vz, pitch rate
  Eigen::Vector4d q = Eigen::Vector4d::Zero();
  Eigen::Vector4d qd = Eigen::Vector4d::Zero();
  Eigen::Vector2d wheel_angle = Eigen::Vector2d::Zero();
  Eigen::Vector2d wheel_angvel = Eigen::Vector2d::Zero();
  // integrator of the wheel velocity servo (N m); lets the drive hold
  // position at zero command and reach the commanded speed under load
  Eigen::Vector2d wheel_integral = Eigen::Vector2d::Zero();
  // tangential bristle deflection per foot (m); zero when out of contact
  Eigen::Vector2d contact_xi = Eigen::Vector2d::Zero();
  Eigen::Vector2d contact_fx = Eigen::Vector2d::Zero();  // N, per foot
  Eigen::Vector2d contact_fz = Eigen::Vector2d::Zero();  // N, per foot
  double time = 0.0;

  bool finite() const;
};

struct ContactInfo {
  bool in_contact = false;
  double fx = 0.0, fz = 0.0;   // world-frame force on the wheel
  double moment = 0.0;          // about the axle, on the wheel spin dof
  double slip = 0.0;            // m/s tangential slip at the contact point
  double penetration = 0.0;     // m
  double nx = 0.0, nz = 1.0;    // contact normal (surface -> wheel center)
};

struct StepResult {
  SimState next_state;
  Eigen::Vector4d leg_torques = Eigen::Vector4d::Zero();
  Eigen::Vector2d wheel_torques = Eigen::Vector2d::Zero();
  std::array<ContactInfo, kNumLegs> contacts;
  // ||F|| on penalized bodies: [base, kneeL, kneeR]
  Eigen::Vector3d collision_forces = Eigen::Vector3d::Zero();
  std::array<Vec2, kNumLegs> foot_pos;
  std::array<Vec2, kNumLegs> foot_vel;
  bool diverged = false;
};

// tau = kp (target - q) - kd qd, clamped to the torque limits.
Eigen::Vector4d pd_torque(const RobotModel& model, const Eigen::Vector4d& q,
                          const Eigen::Vector4d& qd, const Eigen::Vector4d& targets);

// Proportional part of the wheel velocity servo:
// tau = gain (target - angvel), clamped; targets clamped to the speed limit.
// step() additionally carries the servo integrator (SimState::wheel_integral)
// so the drive holds position at zero command and tracks under load.
Eigen::Vector2d wheel_torque(const RobotModel& model, const Eigen::Vector2d& angvel,
                             const Eigen::Vector2d& targets);

// Penalty contact of both wheels (circles) against the profile. Normal force
// is a spring-damper with fz >= 0; tangential force is regularized Coulomb
// friction with the model's mu. Vertical riser faces yield horizontal
// normal components.
std::array<ContactInfo, kNumLegs> resolve_contacts(const SimState& state,
                                                   const Profile& terrain,
                                                   const RobotModel& model);

// One semi-implicit Euler substep. dt must be in (0, 0.01]. An optional push
// adds the given velocity to the base before integrating. Pure in its inputs.
StepResult step(const SimState& state, const ActuatorCommand& command, double dt,
                const Profile& terrain, const RobotModel& model,
                std::optional<double> push_vx = std::nullopt);

// Kinetic + potential energy, for conservation checks.
double mechanical_energy(const SimState& state, const RobotModel& model);

// State with the robot at the default pose, hips at (x, ground + nominal
// height + settle offset), at rest.
SimState spawn_state(const RobotModel& model, const Profile& terrain, double x);

}  // namespace ctbc
