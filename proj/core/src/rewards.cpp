#include "ctbc/rewards.hpp"

#include <cmath>
#include <stdexcept>

namespace ctbc {

namespace {

const std::vector<std::pair<std::string, double>> kTable = {
    // task
    {"lin_vel_tracking_x", 1.2},
    {"lin_vel_tracking_y", 1.0},
    {"lin_vel_tracking_x_pb", 1.0},
    {"lin_vel_tracking_y_pb", 0.8},
    {"ang_vel_tracking", 1.0},
    {"ang_vel_tracking_pb", 0.5},
    {"tracking_target_pos", 0.8},
    {"feet_air_time", 2.0},
    {"feet_contact_number", 2.0},
    {"feet_clearance", 2.0},
    // style
    {"nominal_foot_position", 1.0},
    {"default_pose", -1.0},
    {"feet_distance", -10.0},
    {"wheel_zero_velocity", 0.5},
    {"same_foot_x_position", -2.0},
    {"base_height", -20.0},
    {"orientation", -12.0},
    // regularization
    {"wheel_spin", -5.0},
    {"opposite_base_vel", -40.0},
    {"opposite_wheel_vel", -2.0},
    {"lin_vel_z", -0.3},
    {"ang_vel_xy", -0.01},
    {"torques", -1e-5},
    {"dof_acc", -2.5e-7},
    {"dof_vel", -1e-5},
    {"action_rate", -0.01},
    {"action_smooth", -0.005},
    {"collision", -50.0},
    {"feet_contact_forces", -5.0},
    {"dof_pos_limits", -2.0},
};

double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

const RewardTermValue* RewardBreakdown::find(const std::string& name) const {
  for (const auto& t : terms)
    if (t.name == name) return &t;
  return nullptr;
}

double RewardCoeffs::get(const std::string& name) const {
  for (const auto& [n, v] : values)
    if (n == name) return v;
  throw std::invalid_argument("unknown reward term: " + name);
}

void RewardCoeffs::set(const std::string& name, double v) {
  for (auto& [n, old] : values)
    if (n == name) {
      old = v;
      return;
    }
  throw std::invalid_argument("unknown reward term: " + name);
}

RewardCoeffs RewardCoeffs::defaults() {
  RewardCoeffs c;
  c.values = kTable;
  return c;
}

RewardCoeffs RewardCoeffs::planar_defaults() {
  RewardCoeffs c = defaults();
  c.set("lin_vel_tracking_y", 0.0);
  c.set("lin_vel_tracking_y_pb", 0.0);
  return c;
}

RewardCoeffs RewardCoeffs::from_config(const Config& cfg) {
  RewardCoeffs c = planar_defaults();
  for (auto& [n, v] : c.values) v = cfg.get_double("reward_" + n, v);
  return c;
}

const std::vector<std::string>& reward_term_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [name, coeff] : kTable) n.push_back(name);
    return n;
  }();
  return names;
}

double tracking_potential(double v_cmd, double v) {
  const double e = v_cmd - v;
  return std::exp(-20.0 * e * e);
}

int feet_clearance_count(const RewardContext& ctx, double h_min, double h_max) {
  int n = 0;
  for (int f = 0; f < kNumLegs; ++f)
    if (!ctx.stance[f] && ctx.foot_clearance[f] > h_min && ctx.foot_clearance[f] < h_max)
      ++n;
  return n;
}

RewardBreakdown evaluate_rewards(const RewardContext& ctx, RewardState& state,
                                 const RewardCoeffs& coeffs,
                                 const RewardShapingParams& shaping) {
  const double phi_x = tracking_potential(ctx.v_cmd_x, ctx.v_x);
  const double phi_y = tracking_potential(ctx.v_cmd_y, ctx.v_y);
  const double phi_w = std::exp(-20.0 * std::abs(ctx.w_cmd - ctx.w_yaw));
  if (!state.initialized) {
    state.phi_x = phi_x;
    state.phi_y = phi_y;
    state.phi_w = phi_w;
    state.initialized = true;
  }

  RewardBreakdown out;
  out.terms.reserve(kTable.size());
  // Terms are emitted in registry order, so the coefficient is usually at the
  // same index; fall back to a lookup if the caller reordered the table.
  size_t k = 0;
  auto emit = [&](std::string_view name, double raw) {
    const double w = (k < coeffs.values.size() && coeffs.values[k].first == name)
                         ? coeffs.values[k].second
                         : coeffs.get(std::string(name));
    ++k;
    out.terms.push_back({name, raw, raw * w});
    out.total += raw * w;
  };

  emit("lin_vel_tracking_x", phi_x);
  emit("lin_vel_tracking_y", phi_y);
  emit("lin_vel_tracking_x_pb", (phi_x - state.phi_x) / ctx.dt);
  emit("lin_vel_tracking_y_pb", (phi_y - state.phi_y) / ctx.dt);
  emit("ang_vel_tracking", phi_w);
  emit("ang_vel_tracking_pb", (phi_w - state.phi_w) / ctx.dt);

  {
    const double d = (ctx.q - ctx.q_target).norm();
    emit("tracking_target_pos", std::exp(-2.0 * d) - 0.2 * d);
  }
  {
    double r = 0.0;
    for (int f = 0; f < kNumLegs; ++f)
      if (ctx.first_contact[f]) r += std::min(ctx.air_time[f], 0.5);
    emit("feet_air_time", r);
  }
  {
    double r = 0.0;
    for (int f = 0; f < kNumLegs; ++f)
      r += (ctx.contact[f] == ctx.stance[f]) ? 1.0 : -1.3;
    emit("feet_contact_number", r);
  }
  emit("feet_clearance", double(feet_clearance_count(ctx, shaping.h_clear_min,
                                                     shaping.h_clear_max)));

  {
    double r = 0.0;
    const double vcmd2 = ctx.v_cmd_x * ctx.v_cmd_x + ctx.v_cmd_y * ctx.v_cmd_y;
    const double z_nom = -(ctx.h_target - ctx.wheel_radius);
    for (int f = 0; f < kNumLegs; ++f) {
      const double dz = ctx.foot_z_rel[f] - z_nom;
      r += std::exp(-(dz * dz / (shaping.sigma_z * shaping.sigma_z) +
                      vcmd2 / (shaping.sigma_v * shaping.sigma_v)));
    }
    emit("nominal_foot_position", r / kNumLegs);
  }
  emit("default_pose", (ctx.q - ctx.q_default).cwiseAbs().sum());
  {
    const double dx = ctx.foot_x[0] - ctx.foot_x[1];
    const double dzf = ctx.foot_z_rel[0] - ctx.foot_z_rel[1];
    const double d = std::sqrt(dx * dx + dzf * dzf);
    emit("feet_distance",
         std::max(0.0, shaping.d_min - d) + std::max(0.0, d - shaping.d_max));
  }
  {
    double s = 0.0;
    for (int f = 0; f < kNumLegs; ++f)
      if (!ctx.stance[f]) s += ctx.wheel_speed[f] * ctx.wheel_speed[f];
    emit("wheel_zero_velocity", std::exp(-s));
  }
  emit("same_foot_x_position", std::abs(ctx.foot_x[0] - ctx.foot_x[1]));
  emit("base_height", std::abs(ctx.h_base - ctx.h_target));
  emit("orientation", ctx.grav_x * ctx.grav_x + ctx.grav_y * ctx.grav_y);

  {
    double r = 0.0;
    for (int f = 0; f < kNumLegs; ++f)
      r += std::max(0.0, 0.8 * std::abs(ctx.wheel_radius * ctx.wheel_speed[f]) -
                             ctx.foot_speed[f] - 0.1);
    emit("wheel_spin", r);
  }
  emit("opposite_base_vel", std::max(0.0, -sgn(ctx.v_cmd_x) * ctx.v_x));
  {
    double r = 0.0;
    for (int f = 0; f < kNumLegs; ++f)
      r += std::max(0.0, -sgn(ctx.v_cmd_x) * ctx.wheel_speed[f]);
    emit("opposite_wheel_vel", r);
  }
  emit("lin_vel_z", ctx.v_z * ctx.v_z);
  emit("ang_vel_xy", ctx.w_roll * ctx.w_roll + ctx.w_pitch * ctx.w_pitch);
  emit("torques", ctx.tau.squaredNorm());
  emit("dof_acc", ctx.qdd.squaredNorm());
  emit("dof_vel", ctx.qd.squaredNorm());
  emit("action_rate", (ctx.a - ctx.a_prev).squaredNorm());
  emit("action_smooth", (ctx.a - 2.0 * ctx.a_prev + ctx.a_prev2).squaredNorm());
  {
    double r = 0.0;
    for (int i = 0; i < ctx.collision_forces.size(); ++i)
      if (ctx.collision_forces[i] > 1.0) r += 1.0;
    emit("collision", r);
  }
  {
    const double mean_fz = (ctx.contact_fz[0] + ctx.contact_fz[1]) / 2.0;
    emit("feet_contact_forces", std::max(0.0, mean_fz - shaping.f_max));
  }
  {
    // penetration beyond soft limits (band = soft_limit_fraction of half-range)
    double r = 0.0;
    for (int j = 0; j < 4; ++j) {
      const double mid = 0.5 * (ctx.q_lower[j] + ctx.q_upper[j]);
      const double half = 0.5 * (ctx.q_upper[j] - ctx.q_lower[j]);
      const double soft = half * shaping.soft_limit_fraction;
      r += std::max(0.0, ctx.q[j] - (mid + soft)) + std::max(0.0, (mid - soft) - ctx.q[j]);
    }
    emit("dof_pos_limits", r);
  }

  state.phi_x = phi_x;
  state.phi_y = phi_y;
  state.phi_w = phi_w;
  return out;
}

}  // namespace ctbc
