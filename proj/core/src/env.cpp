#include "ctbc/env.hpp"

#include <cmath>
#include <stdexcept>

namespace ctbc {

int ObservationSpec::dim() const {
  int d = 0;
  for (const auto& b : blocks) d += b.size;
  return d;
}

int ObservationSpec::offset_of(const std::string& block) const {
  int off = 0;
  for (const auto& b : blocks) {
    if (b.name == block) return off;
    off += b.size;
  }
  return -1;
}

ObservationSpec ObservationSpec::planar() {
  ObservationSpec s;
  s.blocks = {
      {"ang_vel", 1, 1.0, 0.02, 1.0},
      {"gravity", 2, 1.0, 0.05, 1.0},
      {"joint_pos", 4, 1.0, 0.01, 1.0},
      {"joint_vel", 6, 0.05, 0.50, 20.0},
      {"last_actions", 6, 1.0, 0.0, 1.0},
  };
  return s;
}

RandomizedParams RandomizedParams::sample(Rng& rng) {
  RandomizedParams p;
  p.payload_mass = rng.uniform(-0.5, 2.0);
  p.com_shift_x = rng.uniform(-0.03, 0.03);
  p.com_shift_y = rng.uniform(-0.02, 0.02);
  p.com_shift_z = rng.uniform(-0.03, 0.03);
  p.kp_factor = rng.uniform(0.8, 1.2);
  p.kd_factor = rng.uniform(0.8, 1.2);
  p.friction = rng.uniform(0.2, 1.6);
  p.restitution = rng.uniform(0.0, 1.0);
  p.inertia_factor = rng.uniform(0.8, 1.2);
  p.motor_torque_factor = rng.uniform(0.8, 1.2);
  p.imu_offset = rng.uniform(-1.2, 1.2) * M_PI / 180.0;
  for (int j = 0; j < 4; ++j) p.default_dof_offset[j] = rng.uniform(-0.05, 0.05);
  p.action_delay = rng.uniform(0.0, 0.020);
  return p;
}

RobotModel RandomizedParams::apply(const RobotModel& base) const {
  RobotModel m = base;
  m.base_mass += payload_mass;
  m.base_com_offset.x += com_shift_x;
  m.base_com_offset.z += com_shift_z;
  m.kp *= kp_factor;
  m.kd *= kd_factor;
  m.friction = friction;
  m.base_inertia *= inertia_factor;
  m.wheel_inertia *= inertia_factor;
  m.leg_torque_limit *= motor_torque_factor;
  m.wheel_torque_limit *= motor_torque_factor;
  // restitution realized as reduced contact damping (bouncier impacts)
  m.contact_cn *= (1.0 - 0.9 * restitution);
  m.default_pose += default_dof_offset;
  return m;
}

const char* term_reason_name(TermReason r) {
  switch (r) {
    case TermReason::None: return "none";
    case TermReason::Timeout: return "timeout";
    case TermReason::Fall: return "fall";
    case TermReason::Collision: return "collision";
    case TermReason::Divergence: return "divergence";
  }
  return "?";
}

EnvConfig EnvConfig::from_config(const Config& cfg) {
  EnvConfig c;
  c.control_dt = cfg.get_double("control_dt", c.control_dt);
  c.substeps = int(cfg.get_int("substeps", c.substeps));
  c.episode_seconds = cfg.get_double("episode_seconds", c.episode_seconds);
  c.push_interval = cfg.get_double("push_interval", c.push_interval);
  c.push_speed = cfg.get_double("push_speed", c.push_speed);
  c.cmd_vx_min = cfg.get_double("cmd_vx_min", c.cmd_vx_min);
  c.cmd_vx_max = cfg.get_double("cmd_vx_max", c.cmd_vx_max);
  c.action_scale_leg = cfg.get_double("action_scale_leg", c.action_scale_leg);
  c.action_scale_wheel = cfg.get_double("action_scale_wheel", c.action_scale_wheel);
  c.pitch_limit = cfg.get_double("pitch_limit", c.pitch_limit);
  c.height_fraction = cfg.get_double("height_fraction", c.height_fraction);
  c.collision_force_limit =
      cfg.get_double("collision_force_limit", c.collision_force_limit);
  c.max_level = int(cfg.get_int("max_level", c.max_level));
  c.spawn_margin = cfg.get_double("spawn_margin", c.spawn_margin);
  c.settle_seconds = cfg.get_double("settle_seconds", c.settle_seconds);
  c.noise_on = cfg.get_bool("obs_noise", c.noise_on);
  c.randomize = cfg.get_bool("domain_randomization", c.randomize);
  c.reflex.trigger_threshold =
      cfg.get_double("trigger_threshold", c.reflex.trigger_threshold);
  c.reflex.period = cfg.get_double("swing_period", c.reflex.period);
  c.reflex.hip_amplitude = cfg.get_double("hip_amplitude", c.reflex.hip_amplitude);
  c.reflex.contralateral_offset =
      cfg.get_double("contralateral_offset", c.reflex.contralateral_offset);
  c.reflex.retrigger_lockout =
      cfg.get_double("retrigger_lockout", c.reflex.retrigger_lockout);
  return c;
}

Env::Env(const RobotModel& base_model, const TerrainGrid* grid, int col,
         const EnvConfig& cfg, const RewardCoeffs& coeffs, Rng rng)
    : base_model_(base_model),
      model_(base_model),
      grid_(grid),
      cfg_(cfg),
      coeffs_(coeffs),
      spec_(ObservationSpec::planar()),
      rng_(rng) {
  if (!grid || col < 0 || col >= int(grid->columns.size()))
    throw std::invalid_argument("Env: bad terrain column");
  profile_ = grid->columns[col];
  ep_.col = col;
  reflex_.params = cfg_.reflex;
}

Env::Env(const RobotModel& base_model, Profile profile, const EnvConfig& cfg,
         const RewardCoeffs& coeffs, Rng rng)
    : base_model_(base_model),
      model_(base_model),
      profile_(std::move(profile)),
      cfg_(cfg),
      coeffs_(coeffs),
      spec_(ObservationSpec::planar()),
      rng_(rng) {
  reflex_.params = cfg_.reflex;
}

double Env::terrain_height(double x) const { return profile_.height_at(x); }

void Env::set_level(int level) {
  ep_.level = std::clamp(level, 0, cfg_.max_level);
}

void Env::spawn() {
  const double x0 = grid_ ? grid_->cell_start(ep_.level) + cfg_.spawn_margin
                          : cfg_.spawn_x.value_or(profile_.x_min() + 1.0);
  sim_ = spawn_state(model_, profile_, x0);
  // settle onto the terrain at the hold pose before the episode starts
  ActuatorCommand hold;
  hold.leg_targets = model_.default_pose;
  hold.wheel_targets.setZero();
  const double sub_dt = cfg_.control_dt / cfg_.substeps;
  const int n = int(std::round(cfg_.settle_seconds / sub_dt));
  for (int i = 0; i < n; ++i)
    sim_ = ctbc::step(sim_, hold, sub_dt, profile_, model_).next_state;
  sim_.time = 0.0;
  ep_.start_x = sim_.base.x;
}

Eigen::VectorXd Env::reset() {
  params_ = cfg_.randomize ? RandomizedParams::sample(rng_) : RandomizedParams::identity();
  model_ = params_.apply(base_model_);
  shaping_.f_max = 2.0 * model_.weight();

  ep_.v_cmd_x = rng_.uniform(cfg_.cmd_vx_min, cfg_.cmd_vx_max);
  ep_.w_cmd = 0.0;
  ep_.tick = 0;
  ep_.reason = TermReason::None;

  // reflex dynamic state cleared, params (incl. trainer-set k_ff) kept
  const ReflexParams rp = reflex_.params;
  reflex_ = ReflexState{};
  reflex_.params = rp;

  reward_state_ = RewardState{};
  last_composite_ = CompositeAction{};
  prev_composite_ = CompositeAction{};
  last_action_units_.setZero();
  prev_action_units_.setZero();
  prev2_action_units_.setZero();
  air_time_ = {0.0, 0.0};
  was_contact_ = {true, true};
  pushes_applied_ = 0;
  obs_history_.clear();

  spawn();
  prev_qd_ << sim_.qd, sim_.wheel_angvel;
  return build_observation(cfg_.noise_on);
}

bool Env::check_termination(const StepResult& last, double max_collision,
                            TermReason* reason) const {
  if (last.diverged || !sim_.finite()) {
    *reason = TermReason::Divergence;
    return true;
  }
  const double h = sim_.base.z - terrain_height(sim_.base.x);
  if (std::abs(sim_.base.pitch) > cfg_.pitch_limit ||
      h < cfg_.height_fraction * model_.nominal_base_height) {
    *reason = TermReason::Fall;
    return true;
  }
  if (max_collision > cfg_.collision_force_limit) {
    *reason = TermReason::Collision;
    return true;
  }
  if (elapsed() >= cfg_.episode_seconds - 0.5 * cfg_.control_dt) {
    *reason = TermReason::Timeout;
    return true;
  }
  return false;
}

RewardContext Env::make_context(const StepResult& last, const CompositeAction& act,
                                double max_collision) {
  RewardContext c;
  c.v_cmd_x = ep_.v_cmd_x;
  c.w_cmd = ep_.w_cmd;
  c.v_x = sim_.base_vel[0];
  c.v_z = sim_.base_vel[1];
  c.w_pitch = sim_.base_vel[2];
  c.h_base = sim_.base.z - terrain_height(sim_.base.x);
  c.h_target = model_.nominal_base_height;
  c.grav_x = -std::sin(sim_.base.pitch);
  c.q = sim_.q;
  c.q_default = model_.default_pose;
  c.q_target = model_.default_pose + cfg_.action_scale_leg * act.leg;
  c.qd << sim_.qd, sim_.wheel_angvel;
  c.qdd = (c.qd - prev_qd_) / cfg_.control_dt;
  c.tau << last.leg_torques, last.wheel_torques;
  c.q_lower = model_.joint_lower;
  c.q_upper = model_.joint_upper;
  c.a = last_action_units_;
  c.a_prev = prev_action_units_;
  c.a_prev2 = prev2_action_units_;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    c.contact[leg] = last.contacts[leg].in_contact;
    c.stance[leg] = reflex_.phase[leg] == Phase::Stance;
    c.air_time[leg] = air_time_[leg];
    c.first_contact[leg] = last.contacts[leg].in_contact && !was_contact_[leg];
    const double fx = last.foot_pos[leg].x, fz = last.foot_pos[leg].z;
    c.foot_x[leg] = fx;
    c.foot_z_rel[leg] = fz - sim_.base.z;
    c.foot_clearance[leg] = fz - terrain_height(fx) - model_.wheel_radius;
    c.foot_speed[leg] = std::hypot(last.foot_vel[leg].x, last.foot_vel[leg].z);
    c.wheel_speed[leg] = -sim_.wheel_angvel[leg];  // forward positive
    c.contact_fz[leg] = std::max(0.0, last.contacts[leg].fz);
  }
  c.collision_forces = last.collision_forces;
  c.collision_forces[0] = std::max(c.collision_forces[0], 0.0);
  (void)max_collision;
  c.wheel_radius = model_.wheel_radius;
  c.dt = cfg_.control_dt;
  return c;
}

EnvStepResult Env::step(const Eigen::Matrix<double, 6, 1>& policy_action) {
  EnvStepResult out;
  if (!policy_action.allFinite())
    throw std::invalid_argument("Env::step: non-finite action");

  // reflex sees the latest per-foot forces (|fx|, fz)
  std::array<std::pair<double, double>, kNumLegs> forces;
  for (int leg = 0; leg < kNumLegs; ++leg)
    forces[leg] = {std::abs(sim_.contact_fx[leg]), sim_.contact_fz[leg]};
  ReflexTick rt = reflex_tick(reflex_, forces, cfg_.control_dt);
  out.trigger_events = int(rt.events.size());

  CompositeAction composite =
      blend(policy_action, rt.ff_offsets, reflex_.params.k_fb, reflex_.params.k_ff);

  auto to_command = [&](const CompositeAction& a) {
    ActuatorCommand cmd;
    cmd.leg_targets = model_.default_pose + cfg_.action_scale_leg * a.leg;
    cmd.wheel_targets = cfg_.action_scale_wheel * a.wheel;
    return cmd;
  };
  const ActuatorCommand cmd_new = to_command(composite);
  const ActuatorCommand cmd_old = to_command(last_composite_);

  const double sub_dt = cfg_.control_dt / cfg_.substeps;
  const int delay_steps =
      std::clamp(int(std::round(params_.action_delay / sub_dt)), 0, cfg_.substeps);

  const double t0 = elapsed();
  double max_collision = 0.0;
  Eigen::Vector3d collision_peak = Eigen::Vector3d::Zero();
  StepResult last;
  bool diverged = false;
  for (int i = 0; i < cfg_.substeps; ++i) {
    std::optional<double> push;
    const double t_sub = t0 + i * sub_dt;
    const double next_push = (pushes_applied_ + 1) * cfg_.push_interval;
    if (t_sub + 0.5 * sub_dt >= next_push && t_sub - 0.5 * sub_dt < next_push) {
      const double sign = rng_.uniform01() < 0.5 ? 1.0 : -1.0;
      push = sign * cfg_.push_speed;
      out.push_applied = *push;
      ++pushes_applied_;
    }
    last = ctbc::step(sim_, i < delay_steps ? cmd_old : cmd_new, sub_dt, profile_,
                      model_, push);
    sim_ = last.next_state;
    collision_peak = collision_peak.cwiseMax(last.collision_forces);
    max_collision = std::max(max_collision, last.collision_forces.maxCoeff());
    if (last.diverged) { diverged = true; break; }
  }
  last.collision_forces = collision_peak;
  (void)diverged;

  // per-foot air time bookkeeping at control-tick granularity
  for (int leg = 0; leg < kNumLegs; ++leg)
    if (!last.contacts[leg].in_contact) air_time_[leg] += cfg_.control_dt;

  prev2_action_units_ = prev_action_units_;
  prev_action_units_ = last_action_units_;
  Eigen::Matrix<double, 6, 1> units;
  units << composite.leg, composite.wheel;
  last_action_units_ = units;
  prev_composite_ = last_composite_;
  last_composite_ = composite;

  RewardContext ctx = make_context(last, composite, max_collision);
  out.reward = evaluate_rewards(ctx, reward_state_, coeffs_, shaping_);
  out.composite = composite;

  // post-reward bookkeeping
  for (int leg = 0; leg < kNumLegs; ++leg) {
    if (last.contacts[leg].in_contact) air_time_[leg] = 0.0;
    was_contact_[leg] = last.contacts[leg].in_contact;
  }
  prev_qd_ << sim_.qd, sim_.wheel_angvel;
  ++ep_.tick;

  TermReason reason = TermReason::None;
  out.done = check_termination(last, max_collision, &reason);
  out.reason = reason;
  if (out.done) ep_.reason = reason;

  out.distance = sim_.base.x - ep_.start_x;
  out.true_velocity << sim_.base_vel[0], sim_.base_vel[1];
  out.obs = build_observation(cfg_.noise_on);
  out.privileged = build_privileged();
  return out;
}

int Env::curriculum_update() {
  const double forward = sim_.base.x - ep_.start_x;
  const double cell = grid_ ? grid_->spec.cell_size : 0.8;
  const double commanded = std::abs(ep_.v_cmd_x) * elapsed();
  const double along_cmd = forward * (ep_.v_cmd_x < 0.0 ? -1.0 : 1.0);
  int level = ep_.level;
  if (forward > 0.5 * cell)
    level += 1;
  else if (commanded > 1e-9 && along_cmd < 0.25 * commanded)
    level -= 1;
  ep_.level = std::clamp(level, 0, cfg_.max_level);
  return ep_.level;
}

Eigen::VectorXd Env::build_observation(bool with_noise) {
  if (!sim_.finite()) throw std::runtime_error("build_observation: non-finite state");
  Eigen::VectorXd obs(spec_.dim());
  const double th = sim_.base.pitch + params_.imu_offset;
  int k = 0;
  auto put = [&](const ObsBlock& b, const Eigen::VectorXd& raw) {
    for (int i = 0; i < b.size; ++i) {
      double v = raw[i] * b.coeff;
      if (with_noise && b.noise_pct > 0.0)
        v += rng_.uniform(-1.0, 1.0) * b.noise_pct * b.nominal * b.coeff;
      obs[k++] = v;
    }
  };
  Eigen::VectorXd ang(1), grav(2), jpos(4), jvel(6), lasta(6);
  ang << sim_.base_vel[2];
  grav << -std::sin(th), -std::cos(th);
  jpos = sim_.q - model_.default_pose;
  jvel << sim_.qd, sim_.wheel_angvel;
  lasta = last_action_units_;
  const Eigen::VectorXd* raws[5] = {&ang, &grav, &jpos, &jvel, &lasta};
  for (int b = 0; b < 5; ++b) put(spec_.blocks[b], *raws[b]);

  obs_history_.push_back(obs);
  while (obs_history_.size() > 5) obs_history_.pop_front();
  return obs;
}

Eigen::VectorXd Env::build_privileged() const {
  Eigen::VectorXd p(PrivilegedSpec::kDim);
  p[0] = PrivilegedSpec::kVelCoeff * sim_.base_vel[0];
  p[1] = PrivilegedSpec::kVelCoeff * sim_.base_vel[1];
  for (int leg = 0; leg < kNumLegs; ++leg) {
    p[2 + 2 * leg] = reflex_.windows[leg].mean_horiz();
    p[3 + 2 * leg] = reflex_.windows[leg].mean_normal();
  }
  return p;
}

Eigen::VectorXd Env::stacked_observation() const {
  const int d = spec_.dim();
  Eigen::VectorXd s = Eigen::VectorXd::Zero(5 * d);
  int slot = 5 - int(obs_history_.size());
  for (const auto& o : obs_history_) s.segment(slot++ * d, d) = o;
  return s;
}

}  // namespace ctbc
