#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ctbc/reflex.hpp"

using namespace ctbc;

namespace {

ReflexState make_reflex(double threshold = 10.0) {
  ReflexState r;
  r.params.trigger_threshold = threshold;
  return r;
}

void fill_window(ReflexState& r, int foot, double f0, double f1, double f2) {
  r.windows[foot].push(f0, 0.0);
  r.windows[foot].push(f1, 0.0);
  r.windows[foot].push(f2, 0.0);
}

// Independent oracle for the lift-selection rules, written directly from the
// published case enumeration:
//   1. contact on exactly one foot -> lift that foot
//   2. both feet in contact:
//        i) one stable, one not -> lift the stable one
//       ii) both stable -> lift the foot with the larger contact force
// A foot in swing is never a candidate. "Contact" = latest frame above the
// threshold; "stable" = all three frames above it.
LiftChoice oracle(const bool w[2][3], double latest_force[2], double th,
                  const Phase phase[2]) {
  bool contact[2], stable[2];
  for (int f = 0; f < 2; ++f) {
    contact[f] = phase[f] == Phase::Stance && w[f][2];
    stable[f] = phase[f] == Phase::Stance && w[f][0] && w[f][1] && w[f][2];
  }
  if (!contact[0] && !contact[1]) return LiftChoice::None;
  if (contact[0] && !contact[1]) return LiftChoice::LiftLeft;
  if (contact[1] && !contact[0]) return LiftChoice::LiftRight;
  if (stable[0] && !stable[1]) return LiftChoice::LiftLeft;
  if (stable[1] && !stable[0]) return LiftChoice::LiftRight;
  return latest_force[0] >= latest_force[1] ? LiftChoice::LiftLeft
                                            : LiftChoice::LiftRight;
}

}  // namespace

TEST_CASE("window: all three frames above threshold -> stable") {
  ReflexState r = make_reflex(10.0);
  fill_window(r, 0, 10.1, 10.1, 10.1);
  CHECK(r.windows[0].stable(10.0));
}

TEST_CASE("window: one frame below threshold -> not stable") {
  ReflexState r = make_reflex(10.0);
  fill_window(r, 0, 10.1, 9.9, 10.1);
  CHECK(!r.windows[0].stable(10.0));
}

TEST_CASE("window decays toward zero without contact") {
  ReflexState r = make_reflex(10.0);
  fill_window(r, 0, 50.0, 50.0, 50.0);
  CHECK(r.windows[0].stable(10.0));
  std::array<std::pair<double, double>, 2> zero{{{0.0, 0.0}, {0.0, 0.0}}};
  update_windows(r, zero);
  update_windows(r, zero);
  update_windows(r, zero);
  CHECK(!r.windows[0].stable(10.0));
  CHECK(r.windows[0].latest() == 0.0);
}

TEST_CASE("window is incomplete before three frames") {
  ContactWindow w;
  w.push(100.0, 0.0);
  CHECK(!w.stable(10.0));
  w.push(100.0, 0.0);
  CHECK(!w.stable(10.0));
  w.push(100.0, 0.0);
  CHECK(w.stable(10.0));
}

TEST_CASE("update_windows stores the horizontal magnitude") {
  ReflexState r = make_reflex();
  std::array<std::pair<double, double>, 2> f{{{-30.0, 100.0}, {5.0, 50.0}}};
  update_windows(r, f);
  CHECK(r.windows[0].latest() == doctest::Approx(30.0));
  CHECK(r.windows[1].latest() == doctest::Approx(5.0));
}

TEST_CASE("select_lift: single-foot contact lifts that foot") {
  ReflexState r = make_reflex(10.0);
  fill_window(r, 0, 15.0, 15.0, 15.0);
  fill_window(r, 1, 0.0, 0.0, 0.0);
  CHECK(select_lift(r) == LiftChoice::LiftLeft);
}

TEST_CASE("select_lift: both stable, larger force first") {
  ReflexState r = make_reflex(10.0);
  fill_window(r, 0, 30.0, 30.0, 30.0);
  fill_window(r, 1, 20.0, 20.0, 20.0);
  CHECK(select_lift(r) == LiftChoice::LiftLeft);
}

TEST_CASE("select_lift: stable beats unstable when both in contact") {
  ReflexState r = make_reflex(10.0);
  fill_window(r, 0, 5.0, 5.0, 15.0);   // contact but not stable
  fill_window(r, 1, 12.0, 12.0, 12.0); // stable, smaller latest force
  CHECK(select_lift(r) == LiftChoice::LiftRight);
}

TEST_CASE("select_lift: no contact -> none") {
  ReflexState r = make_reflex(10.0);
  fill_window(r, 0, 5.0, 5.0, 5.0);
  fill_window(r, 1, 0.0, 0.0, 0.0);
  CHECK(select_lift(r) == LiftChoice::None);
}

TEST_CASE("select_lift matches the enumerated oracle exhaustively") {
  // all 2^6 boolean window patterns x force orderings x phase combinations
  const double th = 10.0;
  const double above[2] = {20.0, 30.0};  // two distinct above-threshold forces
  for (int pattern = 0; pattern < 64; ++pattern) {
    for (int order = 0; order < 2; ++order) {
      for (int ph = 0; ph < 4; ++ph) {
        bool w[2][3];
        for (int f = 0; f < 2; ++f)
          for (int i = 0; i < 3; ++i) w[f][i] = (pattern >> (f * 3 + i)) & 1;
        Phase phase[2] = {(ph & 1) ? Phase::Swing : Phase::Stance,
                          (ph & 2) ? Phase::Swing : Phase::Stance};
        ReflexState r = make_reflex(th);
        double latest[2];
        for (int f = 0; f < 2; ++f) {
          const double hi = above[(f + order) % 2];
          fill_window(r, f, w[f][0] ? hi : 1.0, w[f][1] ? hi : 1.0,
                      w[f][2] ? hi : 1.0);
          latest[f] = w[f][2] ? hi : 1.0;
          r.phase[f] = phase[f];
        }
        CAPTURE(pattern);
        CAPTURE(order);
        CAPTURE(ph);
        CHECK(select_lift(r) == oracle(w, latest, th, phase));
      }
    }
  }
}

TEST_CASE("feedforward_value exact points") {
  const double T = 0.6;
  CHECK(feedforward_value(0.0, T) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(feedforward_value(T / 4.0, T) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(feedforward_value(T / 2.0, T) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(feedforward_value(3.0 * T / 4.0, T) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(feedforward_value(T, T) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("feedforward_value is zero outside [0, T] and symmetric about T/2") {
  const double T = 0.6;
  CHECK(feedforward_value(-0.01, T) == 0.0);
  CHECK(feedforward_value(T + 0.01, T) == 0.0);
  for (double t = 0.0; t <= T / 2; t += 0.01)
    CHECK(feedforward_value(t, T) == doctest::Approx(feedforward_value(T - t, T)).epsilon(1e-12));
  double peak = 0.0;
  for (double t = 0.0; t <= T; t += 1e-3)
    peak = std::max(peak, feedforward_value(t, T));
  CHECK(peak == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("feedforward offsets: knee is twice the hip, flexing upward") {
  ReflexState r = make_reflex();
  r.params.hip_amplitude = 0.3;
  r.phase[0] = Phase::Swing;
  r.swing_clock[0] = r.params.period / 2.0;  // peak
  Eigen::Vector4d off = feedforward_joint_offsets(r, 0);
  CHECK(off[0] == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(off[1] == doctest::Approx(-0.6).epsilon(1e-12));
  CHECK(off[2] == 0.0);
  CHECK(off[3] == 0.0);
  r.swing_clock[0] = 0.0;
  CHECK(feedforward_joint_offsets(r, 0).norm() == 0.0);
}

TEST_CASE("feedforward peak lift calibrates to 0.10 m via forward kinematics") {
  RobotModel m = default_model();
  const double amp = calibrate_hip_amplitude(m, 0.10);
  Eigen::VectorXd q = m.default_pose;
  q[0] += amp;
  q[1] += -2.0 * amp;
  auto feet_peak = forward_kinematics(m, q, BasePose{});
  auto feet_def = forward_kinematics(m, m.default_pose, BasePose{});
  CHECK(feet_peak[0].z - feet_def[0].z == doctest::Approx(0.10).epsilon(1e-6));
}

TEST_CASE("blend: k_ff = 0 is the identity on policy actions") {
  Eigen::Matrix<double, 6, 1> pol;
  pol << 0.1, -0.2, 0.3, -0.4, 5.0, -6.0;
  Eigen::Vector4d ff;
  ff << 0.2, -0.4, 0.1, -0.2;
  CompositeAction a = blend(pol, ff, 1.0, 0.0);
  CHECK((a.leg - pol.head<4>()).norm() == 0.0);
  CHECK((a.wheel - pol.tail<2>()).norm() == 0.0);
}

TEST_CASE("blend: weighted sum on legs, wheels pass through") {
  Eigen::Matrix<double, 6, 1> pol = Eigen::Matrix<double, 6, 1>::Zero();
  pol[4] = 3.0;
  Eigen::Vector4d ff = Eigen::Vector4d::Zero();
  ff[0] = 0.2;
  CompositeAction a = blend(pol, ff, 1.0, 1.0);
  CHECK(a.leg[0] == doctest::Approx(0.2));
  CHECK(a.wheel[0] == doctest::Approx(3.0));
  CompositeAction half = blend(pol, ff, 1.0, 0.5);
  CHECK(half.leg[0] == doctest::Approx(0.1));
}

TEST_CASE("anneal schedule") {
  CHECK(anneal_kff(0.0) == 1.0);
  CHECK(anneal_kff(0.5) == 1.0);
  CHECK(anneal_kff(0.75) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(anneal_kff(0.95) == 0.0);
  CHECK(anneal_kff(1.0) == 0.0);
  double prev = 2.0;
  for (double p = 0.0; p <= 1.0; p += 0.01) {
    CHECK(anneal_kff(p) <= prev + 1e-12);
    prev = anneal_kff(p);
  }
}

TEST_CASE("tick: no contact keeps both feet in stance with zero offsets") {
  ReflexState r = make_reflex(10.0);
  std::array<std::pair<double, double>, 2> zero{{{0.0, 0.0}, {0.0, 0.0}}};
  for (int i = 0; i < 100; ++i) {
    ReflexTick t = reflex_tick(r, zero, 0.02);
    CHECK(t.phase[0] == Phase::Stance);
    CHECK(t.phase[1] == Phase::Stance);
    CHECK(t.ff_offsets.norm() == 0.0);
  }
}

TEST_CASE("tick: a triggered swing lasts exactly T, contralateral follows at T/2") {
  ReflexState r = make_reflex(10.0);
  const double dt = 0.02;
  std::array<std::pair<double, double>, 2> hit{{{50.0, 100.0}, {0.0, 0.0}}};
  std::array<std::pair<double, double>, 2> zero{{{0.0, 0.0}, {0.0, 0.0}}};
  ReflexTick t = reflex_tick(r, hit, dt);
  REQUIRE(t.events.size() == 1);
  CHECK(t.events[0].foot == 0);
  CHECK(t.phase[0] == Phase::Swing);
  CHECK(t.phase[1] == Phase::Stance);

  int right_start_tick = -1;
  int left_end_tick = -1;
  for (int i = 1; i <= 60; ++i) {
    t = reflex_tick(r, zero, dt);
    if (right_start_tick < 0 && t.phase[1] == Phase::Swing) right_start_tick = i;
    if (left_end_tick < 0 && t.phase[0] == Phase::Stance) left_end_tick = i;
  }
  // left swings for T = 0.6 s = 30 ticks
  CHECK(left_end_tick == 30);
  // right begins at T/2 = 0.3 s = 15 ticks
  CHECK(right_start_tick == 15);
}

TEST_CASE("tick: retrigger lockout suppresses immediate re-trigger") {
  ReflexState r = make_reflex(10.0);
  r.params.contralateral_offset = 10.0;  // keep the other leg quiet
  const double dt = 0.02;
  std::array<std::pair<double, double>, 2> hit{{{50.0, 100.0}, {0.0, 0.0}}};
  ReflexTick t = reflex_tick(r, hit, dt);
  REQUIRE(t.events.size() == 1);
  int events = 1;
  // hold the force high through the whole swing and the lockout window
  for (int i = 0; i < 33; ++i) {
    t = reflex_tick(r, hit, dt);
    events += int(t.events.size());
  }
  CHECK(events == 1);  // swing (30 ticks) + lockout (5 ticks) block re-trigger
  for (int i = 0; i < 5; ++i) {
    t = reflex_tick(r, hit, dt);
    events += int(t.events.size());
  }
  CHECK(events == 2);  // after the lockout the trigger fires again
}

TEST_CASE("free-run mode alternates legs without phase switching") {
  ReflexState r = make_reflex(10.0);
  r.params.mode = TriggerMode::FreeRun;
  std::array<std::pair<double, double>, 2> hit{{{50.0, 100.0}, {50.0, 100.0}}};
  const double dt = 0.02;
  bool left_active = false, right_active = false;
  for (int i = 0; i < 60; ++i) {
    ReflexTick t = reflex_tick(r, hit, dt);
    CHECK(t.phase[0] == Phase::Stance);
    CHECK(t.phase[1] == Phase::Stance);
    CHECK(t.events.empty());
    if (std::abs(t.ff_offsets[0]) > 0.01) left_active = true;
    if (std::abs(t.ff_offsets[2]) > 0.01) right_active = true;
  }
  CHECK(left_active);
  CHECK(right_active);
}

TEST_CASE("off mode produces nothing") {
  ReflexState r = make_reflex(10.0);
  r.params.mode = TriggerMode::Off;
  std::array<std::pair<double, double>, 2> hit{{{50.0, 100.0}, {50.0, 100.0}}};
  for (int i = 0; i < 40; ++i) {
    ReflexTick t = reflex_tick(r, hit, 0.02);
    CHECK(t.phase[0] == Phase::Stance);
    CHECK(t.ff_offsets.norm() == 0.0);
  }
}
