#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ctbc/robot_model.hpp"

using namespace ctbc;

TEST_CASE("default model satisfies all invariants") {
  RobotModel m = default_model();
  auto errs = m.validate();
  for (const auto& e : errs) MESSAGE(e);
  CHECK(errs.empty());
  CHECK(m.wheel_radius == doctest::Approx(0.127));
}

TEST_CASE("default pose is strictly inside joint limits") {
  RobotModel m = default_model();
  for (int j = 0; j < 4; ++j) {
    CHECK(m.default_pose[j] > m.joint_lower[j]);
    CHECK(m.default_pose[j] < m.joint_upper[j]);
  }
}

TEST_CASE("standing height at default pose matches nominal_base_height") {
  RobotModel m = default_model();
  auto feet = forward_kinematics(m, m.default_pose, BasePose{0.0, 0.0, 0.0});
  // wheel-bottom to hip distance equals nominal height for both legs
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const double standing = -feet[leg].z + m.wheel_radius;
    CHECK(standing == doctest::Approx(m.nominal_base_height).epsilon(1e-9));
  }
}

TEST_CASE("straight-leg geometry") {
  RobotModel m = default_model();
  m.thigh_length = 0.3;
  m.shank_length = 0.3;
  Eigen::VectorXd q = Eigen::VectorXd::Zero(4);
  auto feet = forward_kinematics(m, q, BasePose{0.0, 1.0, 0.0});
  for (int leg = 0; leg < kNumLegs; ++leg) {
    CHECK(feet[leg].x == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(feet[leg].z == doctest::Approx(0.4).epsilon(1e-12));
  }
}

TEST_CASE("hip at pi/2 with zero knee displaces foot by the full leg length") {
  RobotModel m = default_model();
  Eigen::VectorXd q = Eigen::VectorXd::Zero(4);
  q[0] = M_PI / 2.0;
  auto feet = forward_kinematics(m, q, BasePose{0.0, 0.0, 0.0});
  CHECK(feet[0].x == doctest::Approx(m.thigh_length + m.shank_length).epsilon(1e-12));
  CHECK(feet[0].z == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("forward kinematics is exactly mirror-consistent") {
  RobotModel m = default_model();
  Eigen::VectorXd q(4);
  // property over a grid of joint configurations
  for (double h = -1.0; h <= 1.0; h += 0.37) {
    for (double k = -2.0; k <= 0.3; k += 0.53) {
      q << h, k, -0.2 * h, 0.5 * k;
      Eigen::VectorXd qm(4);
      qm << 0.2 * h, -0.5 * k, -h, -k;  // legs swapped, angles negated
      auto feet = forward_kinematics(m, q, BasePose{0.0, 0.8, 0.0});
      auto feetm = forward_kinematics(m, qm, BasePose{0.0, 0.8, 0.0});
      CHECK(feet[0].x == doctest::Approx(-feetm[1].x).epsilon(1e-12));
      CHECK(feet[0].z == doctest::Approx(feetm[1].z).epsilon(1e-12));
    }
  }
}

TEST_CASE("foot height above base bounded by the leg length") {
  RobotModel m = default_model();
  Eigen::VectorXd q(4);
  for (double h = m.joint_lower[0]; h <= m.joint_upper[0]; h += 0.31) {
    for (double k = m.joint_lower[1]; k <= m.joint_upper[1]; k += 0.29) {
      q << h, k, h, k;
      auto feet = forward_kinematics(m, q, BasePose{0.0, 0.0, 0.0});
      CHECK(std::abs(feet[0].z) <= m.leg_length() + 1e-12);
      CHECK(std::hypot(feet[0].x, feet[0].z) <= m.leg_length() + 1e-12);
    }
  }
}

TEST_CASE("dimension mismatch raises") {
  RobotModel m = default_model();
  Eigen::VectorXd q = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(forward_kinematics(m, q, BasePose{}), std::invalid_argument);
}

TEST_CASE("leg_ik inverts forward kinematics") {
  RobotModel m = default_model();
  for (double dx = -0.3; dx <= 0.3; dx += 0.1) {
    auto [hip, knee] = leg_ik(m, dx, -0.5);
    Eigen::VectorXd q(4);
    q << hip, knee, 0.0, 0.0;
    auto feet = forward_kinematics(m, q, BasePose{0.0, 0.0, 0.0});
    CHECK(feet[0].x == doctest::Approx(dx).epsilon(1e-9));
    CHECK(feet[0].z == doctest::Approx(-0.5).epsilon(1e-9));
  }
  CHECK_THROWS_AS(leg_ik(m, 1.0, -1.0), std::invalid_argument);
}

TEST_CASE("model load from config with fallback to defaults") {
  Config cfg;
  cfg.set_double("base_mass", 14.0);
  cfg.set_double("wheel_radius", 0.15);
  RobotModel m = model_from_config(cfg);
  CHECK(m.base_mass == doctest::Approx(14.0));
  CHECK(m.wheel_radius == doctest::Approx(0.15));
  CHECK(m.thigh_length == doctest::Approx(0.30));  // fell back
  CHECK(!cfg.defaulted_keys().empty());  // fallbacks are recorded
  CHECK(m.validate().empty());
}
