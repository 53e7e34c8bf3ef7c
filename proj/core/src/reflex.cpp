#include "ctbc/reflex.hpp"

#include <cmath>
#include <stdexcept>

namespace ctbc {

void ContactWindow::push(double fx_mag, double fz) {
  horiz[0] = horiz[1];
  horiz[1] = horiz[2];
  horiz[2] = fx_mag;
  normal[0] = normal[1];
  normal[1] = normal[2];
  normal[2] = fz;
  if (count < 3) ++count;
}

bool ContactWindow::stable(double threshold) const {
  return count >= 3 && horiz[0] > threshold && horiz[1] > threshold &&
         horiz[2] > threshold;
}

void update_windows(ReflexState& reflex,
                    const std::array<std::pair<double, double>, kNumLegs>& forces) {
  for (int f = 0; f < kNumLegs; ++f) {
    if (!std::isfinite(forces[f].first) || !std::isfinite(forces[f].second))
      throw std::invalid_argument("update_windows: non-finite force");
    reflex.windows[f].push(std::abs(forces[f].first), forces[f].second);
  }
}

LiftChoice select_lift(const ReflexState& reflex) {
  const double th = reflex.params.trigger_threshold;
  // a foot in swing is never a lift candidate
  bool detect[kNumLegs];
  for (int f = 0; f < kNumLegs; ++f)
    detect[f] = reflex.phase[f] == Phase::Stance && reflex.windows[f].latest() > th;

  if (!detect[0] && !detect[1]) return LiftChoice::None;
  if (detect[0] != detect[1])
    return detect[0] ? LiftChoice::LiftLeft : LiftChoice::LiftRight;

  // both feet in contact
  const bool stable0 = reflex.windows[0].stable(th);
  const bool stable1 = reflex.windows[1].stable(th);
  if (stable0 != stable1)
    return stable0 ? LiftChoice::LiftLeft : LiftChoice::LiftRight;
  // both stable (or neither): larger latest horizontal force is lifted first
  return reflex.windows[0].latest() >= reflex.windows[1].latest()
             ? LiftChoice::LiftLeft
             : LiftChoice::LiftRight;
}

double feedforward_value(double t, double period) {
  if (t < 0.0 || t > period) return 0.0;
  return 0.5 * (1.0 - std::cos(2.0 * M_PI * t / period));
}

Eigen::Vector4d feedforward_joint_offsets(const ReflexState& reflex, int foot) {
  Eigen::Vector4d off = Eigen::Vector4d::Zero();
  if (foot < 0 || foot >= kNumLegs) return off;
  if (reflex.phase[foot] != Phase::Swing || reflex.swing_clock[foot] < 0.0) return off;
  const double hip = reflex.params.hip_amplitude *
                     feedforward_value(reflex.swing_clock[foot], reflex.params.period);
  off[2 * foot] = hip;
  off[2 * foot + 1] = -2.0 * hip;  // knee amplitude twice the hip, flexing upward
  return off;
}

CompositeAction blend(const Eigen::Matrix<double, 6, 1>& policy_action,
                      const Eigen::Vector4d& ff_offsets, double k_fb, double k_ff) {
  CompositeAction a;
  a.leg = k_fb * policy_action.head<4>() + k_ff * ff_offsets;
  a.wheel = policy_action.tail<2>();
  return a;
}

double anneal_kff(double progress) {
  if (progress <= 0.6) return 1.0;
  if (progress >= 0.9) return 0.0;
  return 1.0 - (progress - 0.6) / 0.3;
}

ReflexTick reflex_tick(ReflexState& reflex,
                       const std::array<std::pair<double, double>, kNumLegs>& forces,
                       double dt) {
  ReflexTick out;
  update_windows(reflex, forces);
  reflex.time += dt;

  for (int f = 0; f < kNumLegs; ++f) {
    if (reflex.lockout[f] > 0.0) reflex.lockout[f] -= dt;
    if (reflex.phase[f] == Phase::Swing) {
      reflex.swing_clock[f] += dt;
      if (reflex.swing_clock[f] >= reflex.params.period) {
        reflex.phase[f] = Phase::Stance;
        reflex.swing_clock[f] = -1.0;
        reflex.lockout[f] = reflex.params.retrigger_lockout;
      }
    }
  }

  if (reflex.params.mode == TriggerMode::Triggered) {
    // scheduled contralateral swings
    for (int f = 0; f < kNumLegs; ++f) {
      if (reflex.pending_start[f] < 0.0) continue;
      reflex.pending_start[f] -= dt;
      if (reflex.pending_start[f] <= 0.0) {
        reflex.pending_start[f] = -1.0;
        if (reflex.phase[f] == Phase::Stance) {
          reflex.phase[f] = Phase::Swing;
          reflex.swing_clock[f] = 0.0;
        }
      }
    }
    const LiftChoice choice = select_lift(reflex);
    if (choice != LiftChoice::None) {
      const int f = choice == LiftChoice::LiftLeft ? 0 : 1;
      if (reflex.lockout[f] <= 0.0 && reflex.pending_start[f] < 0.0) {
        reflex.phase[f] = Phase::Swing;
        reflex.swing_clock[f] = 0.0;
        out.events.push_back({f, reflex.windows[f].latest(), reflex.time});
        const int other = 1 - f;
        if (reflex.phase[other] == Phase::Stance && reflex.pending_start[other] < 0.0)
          reflex.pending_start[other] = reflex.params.contralateral_offset;
      }
    }
    for (int f = 0; f < kNumLegs; ++f)
      out.ff_offsets += feedforward_joint_offsets(reflex, f);
  } else if (reflex.params.mode == TriggerMode::FreeRun) {
    // fixed alternating clock; phases stay stance (no trigger mechanism)
    reflex.free_clock += dt;
    const double T = reflex.params.period;
    const double c = std::fmod(reflex.free_clock, 2.0 * T);
    const double tl = c < T ? c : -1.0;
    const double tr = c >= T ? c - T : -1.0;
    if (tl >= 0.0) {
      const double hip = reflex.params.hip_amplitude * feedforward_value(tl, T);
      out.ff_offsets[0] += hip;
      out.ff_offsets[1] += -2.0 * hip;
    }
    if (tr >= 0.0) {
      const double hip = reflex.params.hip_amplitude * feedforward_value(tr, T);
      out.ff_offsets[2] += hip;
      out.ff_offsets[3] += -2.0 * hip;
    }
  }

  out.phase = reflex.phase;
  return out;
}

double calibrate_hip_amplitude(const RobotModel& model, double target_lift) {
  BasePose base;
  auto foot_z = [&](double amp) {
    Eigen::VectorXd q = model.default_pose;
    q[0] += amp;
    q[1] += -2.0 * amp;
    return forward_kinematics(model, q, base)[0].z;
  };
  const double z0 = foot_z(0.0);
  double lo = 0.0, hi = 1.2;
  if (foot_z(hi) - z0 < target_lift)
    throw std::invalid_argument("calibrate_hip_amplitude: target lift unreachable");
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (foot_z(mid) - z0 < target_lift) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace ctbc
