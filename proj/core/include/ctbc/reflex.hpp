#pragma once

#include <Eigen/Core>
#include <array>
#include <vector>

#include "ctbc/robot_model.hpp"

namespace ctbc {

enum class Phase { Stance, Swing };
enum class LiftChoice { None, LiftLeft, LiftRight };

// Last three horizontal-force magnitudes per foot (plus the matching normal
// forces for the privileged observation), oldest -> newest.
struct ContactWindow {
  std::array<double, 3> horiz{0.0, 0.0, 0.0};
  std::array<double, 3> normal{0.0, 0.0, 0.0};
  int count = 0;

  void push(double fx_mag, double fz);
  double latest() const { return horiz[2]; }
  // stable contact: all three frames above the threshold
  bool stable(double threshold) const;
  double mean_horiz() const { return (horiz[0] + horiz[1] + horiz[2]) / 3.0; }
  double mean_normal() const { return (normal[0] + normal[1] + normal[2]) / 3.0; }
};

// How swing phases are initiated.
enum class TriggerMode {
  Triggered,  // contact-triggered (the full mechanism)
  FreeRun,    // no trigger; feedforward free-runs on a fixed alternating clock
  Off,        // no trigger, no feedforward clock
};

struct ReflexParams {
  double trigger_threshold = 28.0;  // N; default set to 0.15 x robot weight
  double k_fb = 1.0;
  double k_ff = 1.0;
  double period = 0.6;              // s, swing duration T
  double hip_amplitude = 0.38;      // rad, calibrated for a 0.10 m peak lift
  double contralateral_offset = 0.3;  // s, T/2
  double retrigger_lockout = 0.1;   // s
  TriggerMode mode = TriggerMode::Triggered;
};

struct ReflexEvent {
  int foot = 0;
  double force = 0.0;  // N, horizontal magnitude at the trigger
  double time = 0.0;
};

struct ReflexState {
  ReflexParams params;
  std::array<ContactWindow, kNumLegs> windows;
  std::array<Phase, kNumLegs> phase{Phase::Stance, Phase::Stance};
  std::array<double, kNumLegs> swing_clock{-1.0, -1.0};  // s, -1 inactive
  std::array<double, kNumLegs> pending_start{-1.0, -1.0};  // contralateral countdown
  std::array<double, kNumLegs> lockout{0.0, 0.0};
  double free_clock = 0.0;
  double time = 0.0;
};

struct ReflexTick {
  std::array<Phase, kNumLegs> phase;
  Eigen::Vector4d ff_offsets = Eigen::Vector4d::Zero();  // rad per leg joint
  std::vector<ReflexEvent> events;
};

struct CompositeAction {
  Eigen::Vector4d leg = Eigen::Vector4d::Zero();
  Eigen::Vector2d wheel = Eigen::Vector2d::Zero();
};

// Pushes |fx| per foot into the windows; a foot has stable contact iff all
// three frames exceed the trigger threshold.
void update_windows(ReflexState& reflex,
                    const std::array<std::pair<double, double>, kNumLegs>& forces);

// Lift-leg choice from the current windows. A foot already in swing is never
// re-selected.
LiftChoice select_lift(const ReflexState& reflex);

// 0.5 (1 - cos(2 pi t / T)); 0 outside [0, T].
double feedforward_value(double t, double period);

// Hip offset = hip_amplitude * feedforward_value(clock); knee = -2 x hip
// (flexes the leg upward). Zero when the foot is not in swing.
Eigen::Vector4d feedforward_joint_offsets(const ReflexState& reflex, int foot);

// a = k_fb * a_policy + k_ff * a_feedforward on the leg joints; wheels pass
// through the policy values unchanged.
CompositeAction blend(const Eigen::Matrix<double, 6, 1>& policy_action,
                      const Eigen::Vector4d& ff_offsets, double k_fb, double k_ff);

// 1.0 before 60% progress, linear to 0 between 60% and 90%, 0 after.
double anneal_kff(double progress);

// Advances the reflex one control tick: updates windows, fires triggers,
// schedules the contralateral swing at +contralateral_offset, advances
// clocks, returns phases and summed feedforward offsets.
ReflexTick reflex_tick(ReflexState& reflex,
                       const std::array<std::pair<double, double>, kNumLegs>& forces,
                       double dt);

// hip_amplitude giving the requested peak foot lift at the default pose,
// found by bisection on the forward kinematics.
double calibrate_hip_amplitude(const RobotModel& model, double target_lift);

}  // namespace ctbc
