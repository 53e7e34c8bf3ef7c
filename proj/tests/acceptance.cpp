// Acceptance gate: one test case per criterion, each printing a single
// [PASS]/[FAIL] line. The training-dependent criteria read the artifacts left
// by ablation_runner (directory from CTBC_ABLATION_DIR, default
// "ablation_runs").
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ctbc/checkpoint.hpp"
#include "ctbc/env.hpp"
#include "ctbc/evaluation.hpp"
#include "ctbc/reflex.hpp"
#include "ctbc/rewards.hpp"
#include "ctbc/terrain.hpp"
#include "ctbc/trainer.hpp"

using namespace ctbc;

namespace {

struct Criterion {
  const char* name;
  bool ok = true;
  ~Criterion() { std::printf("%s %s\n", ok ? "[PASS]" : "[FAIL]", name); }
  void expect(bool c) {
    ok = ok && c;
    CHECK(c);
  }
};

std::string ablation_dir() {
  const char* d = std::getenv("CTBC_ABLATION_DIR");
  return d ? d : "ablation_runs";
}

// summary.txt is "key value" per line
std::map<std::string, double> read_summary(const std::string& path) {
  std::map<std::string, double> out;
  std::ifstream is(path);
  std::string key, value;
  while (is >> key >> value) {
    try {
      out[key] = std::stod(value);
    } catch (...) {
    }
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------- trigger

namespace {
// Independent enumeration of the lift-selection rules:
//   exactly one foot in contact -> lift it; both in contact: the stable one
//   wins, ties broken by the larger latest force. Swing feet never qualify.
LiftChoice lift_oracle(const bool w[2][3], const double latest[2],
                       const Phase phase[2]) {
  bool contact[2], stable[2];
  for (int f = 0; f < 2; ++f) {
    contact[f] = phase[f] == Phase::Stance && w[f][2];
    stable[f] = phase[f] == Phase::Stance && w[f][0] && w[f][1] && w[f][2];
  }
  if (!contact[0] && !contact[1]) return LiftChoice::None;
  if (contact[0] != contact[1])
    return contact[0] ? LiftChoice::LiftLeft : LiftChoice::LiftRight;
  if (stable[0] != stable[1])
    return stable[0] ? LiftChoice::LiftLeft : LiftChoice::LiftRight;
  return latest[0] >= latest[1] ? LiftChoice::LiftLeft : LiftChoice::LiftRight;
}
}  // namespace

TEST_CASE("criterion: trigger truth table") {
  Criterion c{"trigger truth table (exhaustive select_lift oracle)"};
  const double th = 10.0;
  const double above[2] = {20.0, 30.0};
  for (int pattern = 0; pattern < 64; ++pattern)
    for (int order = 0; order < 2; ++order)
      for (int ph = 0; ph < 4; ++ph) {
        bool w[2][3];
        for (int f = 0; f < 2; ++f)
          for (int i = 0; i < 3; ++i) w[f][i] = (pattern >> (f * 3 + i)) & 1;
        const Phase phase[2] = {(ph & 1) ? Phase::Swing : Phase::Stance,
                                (ph & 2) ? Phase::Swing : Phase::Stance};
        ReflexState r;
        r.params.trigger_threshold = th;
        double latest[2];
        for (int f = 0; f < 2; ++f) {
          const double hi = above[(f + order) % 2];
          for (int i = 0; i < 3; ++i)
            r.windows[f].push(w[f][i] ? hi : 1.0, 0.0);
          latest[f] = w[f][2] ? hi : 1.0;
          r.phase[f] = phase[f];
        }
        c.expect(select_lift(r) == lift_oracle(w, latest, phase));
      }
}

// ------------------------------------------------------------ feedforward

TEST_CASE("criterion: feedforward exactness") {
  Criterion c{"feedforward exactness (quarter points + identity blend)"};
  const double T = 0.6;
  const double t_pts[5] = {0.0, T / 4, T / 2, 3 * T / 4, T};
  const double expected[5] = {0.0, 0.5, 1.0, 0.5, 0.0};
  for (int i = 0; i < 5; ++i)
    c.expect(std::abs(feedforward_value(t_pts[i], T) - expected[i]) < 1e-12);

  Eigen::Matrix<double, 6, 1> pol;
  pol << 0.1, -0.2, 0.3, -0.4, 5.0, -6.0;
  Eigen::Vector4d ff;
  ff << 0.2, -0.4, 0.1, -0.2;
  const CompositeAction a = blend(pol, ff, 1.0, 0.0);
  c.expect((a.leg - pol.head<4>()).norm() == 0.0);
  c.expect((a.wheel - pol.tail<2>()).norm() == 0.0);
}

// ----------------------------------------------------------- reward suite

namespace {

double sgn_or0(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

// Independent evaluation of every registry row from the published formulas.
// pb rows are zero on a fresh RewardState (phi_prev == phi_now).
std::map<std::string, double> reward_oracle(const RewardContext& x,
                                            const RewardShapingParams& s) {
  std::map<std::string, double> o;
  const double phix = std::exp(-20.0 * std::pow(x.v_cmd_x - x.v_x, 2));
  const double phiy = std::exp(-20.0 * std::pow(x.v_cmd_y - x.v_y, 2));
  o["lin_vel_tracking_x"] = phix;
  o["lin_vel_tracking_y"] = phiy;
  o["lin_vel_tracking_x_pb"] = 0.0;
  o["lin_vel_tracking_y_pb"] = 0.0;
  o["ang_vel_tracking"] = std::exp(-20.0 * std::abs(x.w_cmd - x.w_yaw));
  o["ang_vel_tracking_pb"] = 0.0;
  {
    const double d = (x.q - x.q_target).norm();
    o["tracking_target_pos"] = std::exp(-2.0 * d) - 0.2 * d;
  }
  {
    double r = 0.0;
    for (int f = 0; f < 2; ++f)
      if (x.first_contact[f]) r += std::min(x.air_time[f], 0.5);
    o["feet_air_time"] = r;
  }
  {
    double r = 0.0;
    for (int f = 0; f < 2; ++f) r += x.contact[f] == x.stance[f] ? 1.0 : -1.3;
    o["feet_contact_number"] = r;
  }
  {
    int n = 0;
    for (int f = 0; f < 2; ++f)
      if (!x.stance[f] && x.foot_clearance[f] > s.h_clear_min &&
          x.foot_clearance[f] < s.h_clear_max)
        ++n;
    o["feet_clearance"] = n;
  }
  {
    const double vc2 = x.v_cmd_x * x.v_cmd_x + x.v_cmd_y * x.v_cmd_y;
    const double z_nom = -(x.h_target - x.wheel_radius);
    double r = 0.0;
    for (int f = 0; f < 2; ++f) {
      const double dz = x.foot_z_rel[f] - z_nom;
      r += std::exp(-(dz * dz / (s.sigma_z * s.sigma_z) +
                      vc2 / (s.sigma_v * s.sigma_v)));
    }
    o["nominal_foot_position"] = r / 2.0;
  }
  o["default_pose"] = (x.q - x.q_default).cwiseAbs().sum();
  {
    const double d = std::hypot(x.foot_x[0] - x.foot_x[1],
                                x.foot_z_rel[0] - x.foot_z_rel[1]);
    o["feet_distance"] = std::max(0.0, s.d_min - d) + std::max(0.0, d - s.d_max);
  }
  {
    double q = 0.0;
    for (int f = 0; f < 2; ++f)
      if (!x.stance[f]) q += x.wheel_speed[f] * x.wheel_speed[f];
    o["wheel_zero_velocity"] = std::exp(-q);
  }
  o["same_foot_x_position"] = std::abs(x.foot_x[0] - x.foot_x[1]);
  o["base_height"] = std::abs(x.h_base - x.h_target);
  o["orientation"] = x.grav_x * x.grav_x + x.grav_y * x.grav_y;
  {
    double r = 0.0;
    for (int f = 0; f < 2; ++f)
      r += std::max(0.0, 0.8 * std::abs(x.wheel_radius * x.wheel_speed[f]) -
                             x.foot_speed[f] - 0.1);
    o["wheel_spin"] = r;
  }
  o["opposite_base_vel"] = std::max(0.0, -sgn_or0(x.v_cmd_x) * x.v_x);
  {
    double r = 0.0;
    for (int f = 0; f < 2; ++f)
      r += std::max(0.0, -sgn_or0(x.v_cmd_x) * x.wheel_speed[f]);
    o["opposite_wheel_vel"] = r;
  }
  o["lin_vel_z"] = x.v_z * x.v_z;
  o["ang_vel_xy"] = x.w_roll * x.w_roll + x.w_pitch * x.w_pitch;
  o["torques"] = x.tau.squaredNorm();
  o["dof_acc"] = x.qdd.squaredNorm();
  o["dof_vel"] = x.qd.squaredNorm();
  o["action_rate"] = (x.a - x.a_prev).squaredNorm();
  o["action_smooth"] = (x.a - 2.0 * x.a_prev + x.a_prev2).squaredNorm();
  {
    double r = 0.0;
    for (int i = 0; i < x.collision_forces.size(); ++i)
      if (x.collision_forces[i] > 1.0) r += 1.0;
    o["collision"] = r;
  }
  o["feet_contact_forces"] =
      std::max(0.0, 0.5 * (x.contact_fz[0] + x.contact_fz[1]) - s.f_max);
  {
    double r = 0.0;
    for (int j = 0; j < 4; ++j) {
      const double mid = 0.5 * (x.q_lower[j] + x.q_upper[j]);
      const double soft = 0.5 * (x.q_upper[j] - x.q_lower[j]) *
                          s.soft_limit_fraction;
      r += std::max(0.0, x.q[j] - (mid + soft)) +
           std::max(0.0, (mid - soft) - x.q[j]);
    }
    o["dof_pos_limits"] = r;
  }
  return o;
}

RewardContext ctx_neutral() {
  RewardContext c;
  c.h_base = c.h_target = 0.69;
  c.q_lower << -1.2, -2.2, -1.2, -2.2;
  c.q_upper << 1.5, 0.4, 1.5, 0.4;
  c.foot_z_rel = {-(0.69 - 0.127), -(0.69 - 0.127)};
  c.contact = {true, true};
  c.stance = {true, true};
  return c;
}

RewardContext ctx_moving() {
  RewardContext c = ctx_neutral();
  c.v_cmd_x = 1.0;
  c.v_x = 0.8;
  c.v_z = 0.15;
  c.w_pitch = 0.4;
  c.w_cmd = 0.1;
  c.q << 0.2, -0.5, -0.1, -0.3;
  c.q_target << 0.25, -0.55, -0.05, -0.35;
  c.qd << 1, -2, 3, -4, 8, -8;
  c.qdd << 10, -20, 30, -40, 50, -60;
  c.tau << 5, -4, 3, -2, 1, -0.5;
  c.a << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6;
  c.a_prev << 0.0, 0.1, 0.2, 0.3, 0.4, 0.5;
  c.a_prev2 << 0.1, 0.0, 0.1, 0.2, 0.3, 0.4;
  c.foot_x = {0.4, -0.1};
  c.wheel_speed = {6.3, 6.3};
  c.foot_speed = {0.8, 0.8};
  c.air_time = {0.3, 0.7};
  c.first_contact = {true, true};
  return c;
}

RewardContext ctx_stress() {
  RewardContext c = ctx_neutral();
  c.v_cmd_x = -0.5;
  c.v_x = 0.3;
  c.h_base = 0.45;
  c.grav_x = 0.3;
  c.grav_y = -0.1;
  c.q << 1.49, 0.39, -1.19, -2.19;  // near the hard limits
  c.stance = {false, true};
  c.contact = {false, false};
  c.foot_clearance = {0.15, 0.02};
  c.wheel_speed = {-3.0, 4.0};
  c.foot_speed = {0.0, 0.0};
  c.collision_forces << 120.0, 2.0, 0.5;
  c.contact_fz = {900.0, 100.0};
  c.foot_x = {0.25, 0.05};
  c.foot_z_rel = {-0.35, -0.6};
  return c;
}

}  // namespace

TEST_CASE("criterion: reward suite") {
  Criterion c{"reward suite (30 rows vs independent oracle, pb telescoping)"};
  const std::vector<std::string>& names = reward_term_names();
  c.expect(names.size() == 30);
  c.expect(std::set<std::string>(names.begin(), names.end()).size() == 30);

  const RewardShapingParams shaping;
  const RewardCoeffs coeffs = RewardCoeffs::defaults();
  for (const RewardContext& ctx : {ctx_neutral(), ctx_moving(), ctx_stress()}) {
    RewardState st;
    const RewardBreakdown bd = evaluate_rewards(ctx, st, coeffs, shaping);
    c.expect(bd.terms.size() == 30);
    const auto oracle = reward_oracle(ctx, shaping);
    for (const auto& t : bd.terms) {
      const auto it = oracle.find(std::string(t.name));
      c.expect(it != oracle.end());
      if (it != oracle.end()) {
        CAPTURE(t.name);
        c.expect(std::abs(t.raw - it->second) < 1e-9);
        c.expect(std::abs(t.weighted -
                          it->second * coeffs.get(std::string(t.name))) < 1e-9);
      }
    }
  }

  // pb terms telescope: sum of pb * dt over an episode = phi_last - phi_first
  RewardContext ctx = ctx_neutral();
  ctx.v_cmd_x = 1.0;
  ctx.dt = 0.02;
  RewardState st;
  double pb_sum = 0.0, phi_first = 0.0, phi_last = 0.0;
  for (int k = 0; k < 60; ++k) {
    ctx.v_x = 0.2 + 0.012 * k + 0.08 * std::sin(0.4 * k);
    phi_last = std::exp(-20.0 * std::pow(ctx.v_cmd_x - ctx.v_x, 2));
    if (k == 0) phi_first = phi_last;
    const RewardBreakdown bd = evaluate_rewards(ctx, st, coeffs, shaping);
    pb_sum += bd.find("lin_vel_tracking_x_pb")->raw * ctx.dt;
  }
  c.expect(std::abs(pb_sum - (phi_last - phi_first)) < 1e-9);
}

// --------------------------------------------------------------- Table I

TEST_CASE("criterion: observation table fidelity") {
  Criterion c{"observation scaling (Table I) + actor excludes privileged"};
  const ObservationSpec spec = ObservationSpec::planar();
  c.expect(spec.dim() == 19);
  const double want_coeff[5] = {1.0, 1.0, 1.0, 0.05, 1.0};
  const double want_noise[5] = {0.02, 0.05, 0.01, 0.50, 0.0};
  const int want_size[5] = {1, 2, 4, 6, 6};
  for (int b = 0; b < 5; ++b) {
    c.expect(spec.blocks[b].coeff == want_coeff[b]);
    c.expect(spec.blocks[b].noise_pct == want_noise[b]);
    c.expect(spec.blocks[b].size == want_size[b]);
  }
  c.expect(PrivilegedSpec::kVelCoeff == 2.0);

  // round trip: noiseless observation reproduces state x coefficient
  EnvConfig cfg;
  cfg.noise_on = false;
  cfg.randomize = false;
  cfg.reflex.mode = TriggerMode::Off;
  Env env(default_model(), make_flat_profile(20.0), cfg,
          RewardCoeffs::planar_defaults(), Rng(3));
  env.reset();
  Eigen::Matrix<double, 6, 1> a;
  a << 0.05, -0.05, 0.02, -0.02, -0.3, -0.3;
  for (int t = 0; t < 10; ++t) env.step(a);
  const Eigen::VectorXd obs = env.build_observation(false);
  const SimState& s = env.state();
  c.expect(std::abs(obs[0] - s.base_vel[2]) < 1e-15);
  c.expect(std::abs(obs[1] - (-std::sin(s.base.pitch))) < 1e-15);
  c.expect(std::abs(obs[2] - (-std::cos(s.base.pitch))) < 1e-15);
  const Eigen::Vector4d jp = s.q - env.model().default_pose;
  c.expect((obs.segment(3, 4) - jp).cwiseAbs().maxCoeff() < 1e-15);
  Eigen::Matrix<double, 6, 1> jv;
  jv << s.qd, s.wheel_angvel;
  c.expect((obs.segment(7, 6) - 0.05 * jv).cwiseAbs().maxCoeff() < 1e-15);
  const Eigen::VectorXd priv = env.build_privileged();
  c.expect(std::abs(priv[0] - 2.0 * s.base_vel[0]) < 1e-15);
  c.expect(std::abs(priv[1] - 2.0 * s.base_vel[1]) < 1e-15);

  // the actor's input is observation + estimated velocity only; adding the
  // privileged block would change its input dimension
  Rng rng(5);
  const PolicyBundle bundle =
      PolicyBundle::make(19, PrivilegedSpec::kDim, 6, 2, {16}, {16}, {16},
                         3e-4, rng);
  c.expect(int(bundle.actor.W.front().cols()) == 19 + 2);
  c.expect(int(bundle.critic.W.front().cols()) == 19 + PrivilegedSpec::kDim);
}

// -------------------------------------------------------------- Table III

TEST_CASE("criterion: randomization table fidelity") {
  Criterion c{"randomization ranges (Table III) + push at 8 s, 1.0 m/s"};
  Rng rng(17);
  for (int i = 0; i < 10000; ++i) {
    const RandomizedParams p = RandomizedParams::sample(rng);
    c.expect(p.payload_mass >= -0.5 && p.payload_mass <= 2.0);
    c.expect(std::abs(p.com_shift_x) <= 0.03);
    c.expect(std::abs(p.com_shift_y) <= 0.02);
    c.expect(std::abs(p.com_shift_z) <= 0.03);
    c.expect(p.kp_factor >= 0.8 && p.kp_factor <= 1.2);
    c.expect(p.kd_factor >= 0.8 && p.kd_factor <= 1.2);
    c.expect(p.friction >= 0.2 && p.friction <= 1.6);
    c.expect(p.restitution >= 0.0 && p.restitution <= 1.0);
    c.expect(p.inertia_factor >= 0.8 && p.inertia_factor <= 1.2);
    c.expect(p.motor_torque_factor >= 0.8 && p.motor_torque_factor <= 1.2);
    c.expect(std::abs(p.imu_offset) <= 1.2 * M_PI / 180.0 + 1e-15);
    c.expect(p.default_dof_offset.cwiseAbs().maxCoeff() <= 0.05);
    c.expect(p.action_delay >= 0.0 && p.action_delay <= 0.020);
    if (!c.ok) break;
  }

  // the scheduled push fires on the control tick containing t = 8 s with the
  // exact magnitude
  EnvConfig cfg;
  cfg.noise_on = false;
  cfg.randomize = false;
  cfg.reflex.mode = TriggerMode::Off;
  Env env(default_model(), make_flat_profile(20.0), cfg,
          RewardCoeffs::planar_defaults(), Rng(9));
  env.reset();
  const Eigen::Matrix<double, 6, 1> zero = Eigen::Matrix<double, 6, 1>::Zero();
  int push_tick = -1;
  double push_value = 0.0;
  for (int t = 0; t < 450 && push_tick < 0; ++t) {
    const EnvStepResult r = env.step(zero);
    if (r.push_applied) {
      push_tick = t;
      push_value = *r.push_applied;
    }
    if (r.done) break;
  }
  c.expect(push_tick >= 0);
  if (push_tick >= 0) {
    const double t0 = push_tick * cfg.control_dt;
    c.expect(t0 < 8.0 + 1e-12 && t0 + cfg.control_dt >= 8.0 - 1e-12);
    c.expect(push_value == 1.0);
  }
}

// ----------------------------------------------------------------- terrain

TEST_CASE("criterion: terrain geometry") {
  Criterion c{"terrain geometry (stair endpoints, histogram, riser scan)"};
  c.expect(stair_params(0).step_height == 0.08);
  c.expect(stair_params(0).step_width == 0.50);
  c.expect(stair_params(9).step_height == 0.20);
  c.expect(stair_params(9).step_width == 0.28);

  const TerrainGrid grid = generate(42, GridSpec{});
  int counts[4] = {0, 0, 0, 0};
  for (CellType t : grid.col_types) ++counts[int(t)];
  c.expect(counts[int(CellType::SmoothSlope)] == 1);
  c.expect(counts[int(CellType::RoughSlope)] == 1);
  c.expect(counts[int(CellType::Stairs)] == 6);
  c.expect(counts[int(CellType::Discrete)] == 2);

  // every riser jump strictly inside a stairs cell equals that level's step
  // height
  int stairs_col = -1;
  for (size_t i = 0; i < grid.col_types.size(); ++i)
    if (grid.col_types[i] == CellType::Stairs) {
      stairs_col = int(i);
      break;
    }
  c.expect(stairs_col >= 0);
  const Profile& prof = grid.columns[stairs_col];
  int risers_checked = 0;
  for (int level = 0; level < grid.spec.n_rows; ++level) {
    const double x0 = grid.cell_start(level), x1 = x0 + grid.spec.cell_size;
    const double want = stair_params(level).step_height;
    double prev = prof.height_at(x0 + 1e-6);
    for (double x = x0 + 0.001; x < x1 - 1e-9; x += 0.001) {
      const double h = prof.height_at(x);
      const double jump = h - prev;
      if (std::abs(jump) > 0.5 * want) {
        c.expect(std::abs(std::abs(jump) - want) < 1e-9);
        ++risers_checked;
      }
      prev = h;
    }
  }
  c.expect(risers_checked > 0);
}

// ---------------------------------------------------------------- dynamics

TEST_CASE("criterion: dynamics sanity") {
  Criterion c{"dynamics sanity (drift, speed tracking, energy)"};
  const RobotModel m = default_model();
  const Profile flat = make_flat_profile(40.0);
  ActuatorCommand hold;
  hold.leg_targets = m.default_pose;

  // settled drift < 1 mm/s
  SimState s = spawn_state(m, flat, 5.0);
  for (int i = 0; i < 3000; ++i) s = step(s, hold, 0.001, flat, m).next_state;
  c.expect(std::abs(s.base_vel[0]) < 1e-3);
  c.expect(std::abs(s.base_vel[1]) < 1e-3);

  // commanded 1.0 m/s reached within 2 s +- 0.1 (ramped command, slight aft
  // lean against the acceleration as an active balancer would produce)
  s = spawn_state(m, flat, 2.0);
  for (int i = 0; i < 2000; ++i) s = step(s, hold, 0.001, flat, m).next_state;
  ActuatorCommand cmd = hold;
  const double v_cmd = 1.0, ramp = 2.0;
  const double drop = m.nominal_base_height - m.wheel_radius;
  double v_at_2s = 0.0;
  for (int i = 0; i < 2000; ++i) {
    const double t = i * 0.001;
    const double accel = t < ramp ? v_cmd / ramp : 0.0;
    const double lean = -0.09 * accel;
    const auto legL = leg_ik(m, 0.12 + lean, -drop);
    const auto legR = leg_ik(m, -0.12 + lean, -drop);
    cmd.leg_targets << legL[0], legL[1], legR[0], legR[1];
    cmd.wheel_targets.setConstant(-std::min(1.0, t / ramp) * v_cmd /
                                  m.wheel_radius);
    s = step(s, cmd, 0.001, flat, m).next_state;
    if (i == 1999) v_at_2s = s.base_vel[0];
  }
  c.expect(std::abs(v_at_2s - v_cmd) <= 0.1);

  // passive frictionless (airborne, zero gains) energy drift < 1% over 1 s
  RobotModel free = m;
  free.kp.setZero();
  free.kd.setZero();
  free.wheel_vel_gain = 0.0;
  SimState air = spawn_state(free, flat, 5.0);
  air.base.z += 8.0;
  air.qd << 1.0, -0.5, -0.8, 0.3;
  air.base_vel << 0.2, 0.0, 0.5;
  const double e0 = mechanical_energy(air, free);
  ActuatorCommand none;
  for (int i = 0; i < 1000; ++i)
    air = step(air, none, 0.001, flat, free).next_state;
  const double e1 = mechanical_energy(air, free);
  c.expect(std::abs(e1 - e0) / std::max(1.0, std::abs(e0)) < 0.01);
}

// ----------------------------------------------------------------- learner

TEST_CASE("criterion: learner numerics") {
  Criterion c{"learner numerics (GAE oracle, gradient check, checkpoint)"};

  // GAE vs brute-force discounted sums on short episodes
  Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const int T = 1 + int(rng.uniform(0.0, 4.999));
    Eigen::VectorXd rew(T), val(T);
    std::vector<uint8_t> dones(T, 0);
    for (int t = 0; t < T; ++t) {
      rew[t] = rng.uniform(-1.0, 1.0);
      val[t] = rng.uniform(-1.0, 1.0);
      dones[t] = rng.uniform(0.0, 1.0) < 0.3 ? 1 : 0;
    }
    const double boot = rng.uniform(-1.0, 1.0);
    const double gamma = 0.97, lam = 0.93;
    Eigen::VectorXd adv, ret;
    gae(rew, val, dones, gamma, lam, boot, &adv, &ret);
    for (int t = 0; t < T; ++t) {
      // brute force: A_t = sum_l (gamma lam)^l delta_{t+l} up to the first
      // terminal
      double a = 0.0, w = 1.0;
      for (int l = t; l < T; ++l) {
        const double next_v = dones[l] ? 0.0 : (l + 1 < T ? val[l + 1] : boot);
        a += w * (rew[l] + gamma * next_v - val[l]);
        if (dones[l]) break;
        w *= gamma * lam;
      }
      c.expect(std::abs(adv[t] - a) < 1e-10);
      c.expect(std::abs(ret[t] - (a + val[t])) < 1e-10);
    }
  }

  // analytic gradients vs central finite differences
  Rng grng(31);
  PolicyBundle bundle =
      PolicyBundle::make(5, 3, 2, 2, {12, 8}, {12}, {10}, 3e-4, grng);
  const Eigen::MatrixXd obs = Eigen::MatrixXd::Random(5, 16);
  const Eigen::MatrixXd stacked = Eigen::MatrixXd::Random(25, 16);
  const Eigen::MatrixXd priv = Eigen::MatrixXd::Random(3, 16);
  const double max_rel = gradient_check(bundle, obs, stacked, priv, 1e-5, grng);
  c.expect(max_rel < 1e-4);

  // checkpoint round trip is bit-exact
  bundle.obs_norm.update(Eigen::MatrixXd::Random(5, 64));
  const std::string path = "acceptance_ckpt.bin";
  save_checkpoint(bundle, path);
  const PolicyBundle loaded = load_checkpoint(path);
  bool same = true;
  for (size_t l = 0; l < bundle.actor.W.size(); ++l)
    same = same && bundle.actor.W[l] == loaded.actor.W[l] &&
           bundle.actor.b[l] == loaded.actor.b[l];
  same = same && bundle.log_std == loaded.log_std &&
         bundle.obs_norm.mean == loaded.obs_norm.mean &&
         bundle.obs_norm.var == loaded.obs_norm.var &&
         bundle.obs_norm.count == loaded.obs_norm.count &&
         bundle.actor_opt.m == loaded.actor_opt.m &&
         bundle.actor_opt.v == loaded.actor_opt.v;
  c.expect(same);
  const Eigen::VectorXd o = Eigen::VectorXd::Random(5);
  const Eigen::VectorXd st = Eigen::VectorXd::Random(25);
  const ActResult a1 = act(bundle, o, st, true);
  const ActResult a2 = act(loaded, o, st, true);
  c.expect(a1.action == a2.action);
  std::remove(path.c_str());
}

// ------------------------------------------------- trained-policy criteria

namespace {

struct VariantStats {
  double mean_final = 0.0;
  double mean_pre = 0.0;
  bool complete = true;
};

VariantStats variant_stats(const std::string& variant) {
  VariantStats v;
  int n = 0;
  for (int seed = 0; seed < 3; ++seed) {
    const std::string path = ablation_dir() + "/" + variant + "_s" +
                             std::to_string(seed) + "/summary.txt";
    const auto s = read_summary(path);
    if (!s.count("final_level")) {
      v.complete = false;
      continue;
    }
    v.mean_final += s.at("final_level");
    if (s.count("pre_anneal_level")) v.mean_pre += s.at("pre_anneal_level");
    ++n;
  }
  if (n > 0) {
    v.mean_final /= n;
    v.mean_pre /= n;
  }
  v.complete = v.complete && n == 3;
  return v;
}

}  // namespace

TEST_CASE("criterion: ablation ordering") {
  Criterion c{"desk-scale ablation ordering (3 seeds, final terrain level)"};
  const VariantStats ctbc = variant_stats("ctbc");
  const VariantStats no_ff = variant_stats("no_ff");
  const VariantStats no_trigger = variant_stats("no_trigger");
  const VariantStats none = variant_stats("none");
  c.expect(ctbc.complete && no_ff.complete && no_trigger.complete &&
           none.complete);
  std::printf(
      "       levels: ctbc=%.3f  no_ff=%.3f  no_trigger=%.3f  none=%.3f\n",
      ctbc.mean_final, no_ff.mean_final, no_trigger.mean_final,
      none.mean_final);
  const double tol = 1e-9;
  c.expect(ctbc.mean_final + tol >= no_ff.mean_final);
  c.expect(no_ff.mean_final + tol >= no_trigger.mean_final);
  c.expect(no_trigger.mean_final + tol >= none.mean_final);
  c.expect(ctbc.mean_final - none.mean_final >= 1.0);
}

TEST_CASE("criterion: annealing retention") {
  Criterion c{"annealing retention (<= 10% level loss at k_ff = 0)"};
  const VariantStats ctbc = variant_stats("ctbc");
  c.expect(ctbc.complete);
  std::printf("       pre-anneal=%.3f  post-anneal=%.3f\n", ctbc.mean_pre,
              ctbc.mean_final);
  c.expect(ctbc.mean_pre > 0.0);
  c.expect(ctbc.mean_final >= 0.9 * ctbc.mean_pre);
}

TEST_CASE("criterion: hole escape") {
  Criterion c{"hole escape (0.05 m pit, >= 60% of 50 trials, beats no-trigger)"};
  const std::string ctbc_ckpt = ablation_dir() + "/ctbc_s0/policy.ckpt";
  const std::string nt_ckpt = ablation_dir() + "/no_trigger_s0/policy.ckpt";

  PolicyBundle ctbc, no_trigger;
  bool loaded = true;
  try {
    ctbc = load_checkpoint(ctbc_ckpt);
    no_trigger = load_checkpoint(nt_ckpt);
  } catch (const std::exception& e) {
    MESSAGE(e.what());
    loaded = false;
  }
  c.expect(loaded);
  if (!loaded) return;

  const RobotModel model = default_model();
  EnvConfig cfg;  // randomization on: seeded trial diversity
  cfg.reflex.k_ff = 0.0;  // post-annealing policies run without feedforward
  cfg.reflex.mode = TriggerMode::Triggered;
  const HoleEscapeResult r_ctbc =
      evaluate_hole_escape(ctbc, model, cfg, 0.05, 0.8, 50, 10.0, 2024);
  cfg.reflex.mode = TriggerMode::Off;
  const HoleEscapeResult r_nt =
      evaluate_hole_escape(no_trigger, model, cfg, 0.05, 0.8, 50, 10.0, 2024);
  std::printf("       ctbc %d/50, no_trigger %d/50\n", r_ctbc.successes,
              r_nt.successes);
  c.expect(r_ctbc.successes >= 30);
  c.expect(r_nt.successes < r_ctbc.successes);
}
