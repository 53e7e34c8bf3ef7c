#pragma once

#include <Eigen/Core>
#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "ctbc/config.hpp"
#include "ctbc/robot_model.hpp"

namespace ctbc {

// Everything a reward term reads, collected once per control tick.
// Wheel speeds are rolling-forward-positive.
struct RewardContext {
  // commands
  double v_cmd_x = 0.0, v_cmd_y = 0.0, w_cmd = 0.0;
  // base twist (v_y and w_yaw are identically 0 in the planar model)
  double v_x = 0.0, v_y = 0.0, v_z = 0.0;
  double w_roll = 0.0, w_pitch = 0.0, w_yaw = 0.0;
  double h_base = 0.0, h_target = 0.0;  // above terrain / nominal
  double grav_x = 0.0, grav_y = 0.0;    // projected gravity components
  // joints (leg joints only for q; q_dot/q_ddot/torques cover all actuators)
  Eigen::Vector4d q = Eigen::Vector4d::Zero();
  Eigen::Vector4d q_default = Eigen::Vector4d::Zero();
  Eigen::Vector4d q_target = Eigen::Vector4d::Zero();  // composite PD targets
  Eigen::Matrix<double, 6, 1> qd = Eigen::Matrix<double, 6, 1>::Zero();
  Eigen::Matrix<double, 6, 1> qdd = Eigen::Matrix<double, 6, 1>::Zero();
  Eigen::Matrix<double, 6, 1> tau = Eigen::Matrix<double, 6, 1>::Zero();
  Eigen::Vector4d q_lower = Eigen::Vector4d::Zero();
  Eigen::Vector4d q_upper = Eigen::Vector4d::Zero();
  // actions (normalized composite actions, current and two previous)
  Eigen::Matrix<double, 6, 1> a = Eigen::Matrix<double, 6, 1>::Zero();
  Eigen::Matrix<double, 6, 1> a_prev = Eigen::Matrix<double, 6, 1>::Zero();
  Eigen::Matrix<double, 6, 1> a_prev2 = Eigen::Matrix<double, 6, 1>::Zero();
  // per foot
  std::array<bool, kNumLegs> contact{false, false};
  std::array<bool, kNumLegs> stance{true, true};  // designated phase
  std::array<double, kNumLegs> air_time{0.0, 0.0};
  std::array<bool, kNumLegs> first_contact{false, false};
  std::array<double, kNumLegs> foot_clearance{0.0, 0.0};  // above terrain
  std::array<double, kNumLegs> foot_x{0.0, 0.0};
  std::array<double, kNumLegs> foot_z_rel{0.0, 0.0};  // relative to base
  std::array<double, kNumLegs> foot_speed{0.0, 0.0};  // ||v_foot||
  std::array<double, kNumLegs> wheel_speed{0.0, 0.0}; // rad/s, forward positive
  std::array<double, kNumLegs> contact_fz{0.0, 0.0};
  // penalized-body contact force magnitudes (base, kneeL, kneeR)
  Eigen::Vector3d collision_forces = Eigen::Vector3d::Zero();
  double wheel_radius = 0.127;
  double dt = 0.02;
};

// Potentials carried across ticks for the potential-based shaping terms.
struct RewardState {
  double phi_x = 0.0, phi_y = 0.0, phi_w = 0.0;
  bool initialized = false;
};

struct RewardTermValue {
  std::string_view name;  // points at the static registry entry
  double raw = 0.0;
  double weighted = 0.0;
};

struct RewardBreakdown {
  std::vector<RewardTermValue> terms;
  double total = 0.0;
  const RewardTermValue* find(const std::string& name) const;
};

// Term coefficients; defaults are the published table values.
struct RewardCoeffs {
  std::vector<std::pair<std::string, double>> values;  // registry order
  double get(const std::string& name) const;
  void set(const std::string& name, double v);

  static RewardCoeffs defaults();
  // defaults with the lateral (y) tracking terms zero-weighted
  static RewardCoeffs planar_defaults();
  // reads reward_<name> keys on top of planar defaults
  static RewardCoeffs from_config(const Config& cfg);
};

struct RewardShapingParams {
  double sigma_z = 0.05;   // m, nominal foot position kernel
  double sigma_v = 0.5;    // m/s
  double d_min = 0.25;     // m, feet distance band
  double d_max = 0.60;
  double h_clear_min = 0.10;  // m, feet clearance band
  double h_clear_max = 0.20;
  double f_max = 372.78;   // N, 2 x default robot weight; the env overrides
  double soft_limit_fraction = 0.9;  // dof pos soft-limit band
};

// Ordered list of the registry's term names (30 entries).
const std::vector<std::string>& reward_term_names();

// Evaluates every term; pb terms use (phi_now - phi_prev) / dt with phi the
// matching exponential kernel. The first call after a RewardState reset
// yields zero pb terms.
RewardBreakdown evaluate_rewards(const RewardContext& ctx, RewardState& state,
                                 const RewardCoeffs& coeffs,
                                 const RewardShapingParams& shaping = {});

// exp(-20 (v_cmd - v)^2), the kernel behind the pb terms.
double tracking_potential(double v_cmd, double v);

// Number of swing feet with clearance strictly inside (h_min, h_max).
int feet_clearance_count(const RewardContext& ctx, double h_min = 0.10,
                         double h_max = 0.20);

}  // namespace ctbc
