#pragma once

#include <Eigen/Core>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "ctbc/dynamics.hpp"
#include "ctbc/reflex.hpp"
#include "ctbc/rewards.hpp"
#include "ctbc/rng.hpp"
#include "ctbc/terrain.hpp"

namespace ctbc {

// Fixed observation layout: ordered blocks with scale coefficients, noise
// percentages, and the nominal magnitudes the noise percentages refer to.
struct ObsBlock {
  std::string name;
  int size = 0;
  double coeff = 1.0;      // multiplicative scale on the raw value
  double noise_pct = 0.0;  // additive uniform noise, fraction of nominal
  double nominal = 1.0;    // physical nominal magnitude for the noise
};

struct ObservationSpec {
  std::vector<ObsBlock> blocks;
  int dim() const;
  int offset_of(const std::string& block) const;  // -1 if absent

  // ang vel (1, x1.0, +-2%), projected gravity (2, x1.0, +-5%), joint
  // positions (4, x1.0, +-1%), joint velocities (6, x0.05, +-50%), last
  // actions (6, x1.0, 0%)
  static ObservationSpec planar();
};

struct PrivilegedSpec {
  static constexpr double kVelCoeff = 2.0;
  static constexpr int kDim = 6;  // lin vel (2) + per-foot window-mean forces (4)
};

// One per-episode draw of the published randomization ranges.
struct RandomizedParams {
  double payload_mass = 0.0;       // kg, [-0.5, 2]
  double com_shift_x = 0.0;        // m, [-0.03, 0.03]
  double com_shift_y = 0.0;        // m, [-0.02, 0.02]; unused by the planar model
  double com_shift_z = 0.0;        // m, [-0.03, 0.03]
  double kp_factor = 1.0;          // [0.8, 1.2]
  double kd_factor = 1.0;          // [0.8, 1.2]
  double friction = 1.0;           // [0.2, 1.6]
  double restitution = 0.0;        // [0, 1]
  double inertia_factor = 1.0;     // [0.8, 1.2]
  double motor_torque_factor = 1.0;  // [0.8, 1.2]
  double imu_offset = 0.0;         // rad, +-1.2 deg
  Eigen::Vector4d default_dof_offset = Eigen::Vector4d::Zero();  // rad, +-0.05
  double action_delay = 0.0;       // s, [0, 0.020]

  static RandomizedParams sample(Rng& rng);
  static RandomizedParams identity() { return {}; }
  // Applies the draw to a base model (mass, com, gains, friction, inertia,
  // torque limits, default pose; restitution scales away contact damping).
  RobotModel apply(const RobotModel& base) const;
};

enum class TermReason { None, Timeout, Fall, Collision, Divergence };
const char* term_reason_name(TermReason r);

struct EpisodeState {
  int col = 0;            // terrain column (cell type)
  int level = 0;          // curriculum level, [0, 9]
  double v_cmd_x = 0.0;   // m/s
  double w_cmd = 0.0;     // rad/s, 0 in planar mode
  int tick = 0;
  double start_x = 0.0;
  TermReason reason = TermReason::None;
};

struct EnvConfig {
  double control_dt = 0.02;      // s, 50 Hz policy
  int substeps = 20;             // 1 kHz physics
  double episode_seconds = 20.0;
  double push_interval = 8.0;    // s
  double push_speed = 1.0;       // m/s, exact magnitude
  double cmd_vx_min = -0.5, cmd_vx_max = 1.5;  // m/s, per-episode uniform
  double action_scale_leg = 0.25;    // rad of PD target per action unit
  double action_scale_wheel = 10.0;  // rad/s of wheel target per action unit
  double pitch_limit = 0.8;          // rad, fall termination
  double height_fraction = 0.5;      // fall below this x nominal height
  double collision_force_limit = 100.0;  // N on penalized bodies
  int max_level = 9;             // curriculum cap
  double spawn_margin = 0.15;    // m past the cell start (on the lead tread)
  double settle_seconds = 0.5;   // pre-episode physics settle at hold pose
  bool noise_on = true;
  bool randomize = true;
  // standalone-profile spawn override (evaluation presets); grids ignore it
  std::optional<double> spawn_x;
  ReflexParams reflex;

  static EnvConfig from_config(const Config& cfg);
};

struct EnvStepResult {
  Eigen::VectorXd obs;
  Eigen::VectorXd privileged;
  Eigen::Vector2d true_velocity = Eigen::Vector2d::Zero();  // estimator target
  RewardBreakdown reward;
  bool done = false;
  TermReason reason = TermReason::None;
  // diagnostics
  double distance = 0.0;             // forward progress this episode, m
  int trigger_events = 0;            // reflex triggers this tick
  std::optional<double> push_applied;  // m/s, set on the tick a push fired
  CompositeAction composite;         // the blended action actually applied
};

// One episodic environment on one terrain column. All randomness flows from
// the Rng handed to the constructor; environments share no mutable state.
class Env {
 public:
  Env(const RobotModel& base_model, const TerrainGrid* grid, int col,
      const EnvConfig& cfg, const RewardCoeffs& coeffs, Rng rng);

  // Also usable with a standalone profile (flat / evaluation terrains).
  Env(const RobotModel& base_model, Profile profile, const EnvConfig& cfg,
      const RewardCoeffs& coeffs, Rng rng);

  Eigen::VectorXd reset();

  // Advances one control tick with a 6-dim policy action (leg targets in
  // action units, wheel velocity targets in action units).
  EnvStepResult step(const Eigen::Matrix<double, 6, 1>& policy_action);

  // Applies the finished episode's outcome to the curriculum level.
  // Promote: forward progress > 50% of the cell; demote: progress along the
  // command < 25% of commanded distance; clamp [0, max_level].
  int curriculum_update();

  Eigen::VectorXd build_observation(bool with_noise);
  Eigen::VectorXd build_privileged() const;
  // Last 5 observations (newest last), zero-padded after reset.
  Eigen::VectorXd stacked_observation() const;

  const SimState& state() const { return sim_; }
  const EpisodeState& episode() const { return ep_; }
  const RandomizedParams& randomized() const { return params_; }
  // Overrides the per-episode draw (evaluation protocols, tests) and
  // reapplies it to the model. reset() samples a fresh draw again.
  void set_randomized(const RandomizedParams& p) {
    params_ = p;
    model_ = params_.apply(base_model_);
    shaping_.f_max = 2.0 * model_.weight();
  }
  const RobotModel& model() const { return model_; }
  const ReflexState& reflex() const { return reflex_; }
  ReflexState& reflex() { return reflex_; }
  const ObservationSpec& obs_spec() const { return spec_; }
  int level() const { return ep_.level; }
  void set_level(int level);
  void set_k_ff(double k) { reflex_.params.k_ff = k; }
  void set_coeffs(const RewardCoeffs& c) { coeffs_ = c; }
  double elapsed() const { return ep_.tick * cfg_.control_dt; }

 private:
  void spawn();
  RewardContext make_context(const StepResult& last, const CompositeAction& act,
                             double max_collision);
  bool check_termination(const StepResult& last, double max_collision,
                         TermReason* reason) const;
  double terrain_height(double x) const;

  RobotModel base_model_;
  RobotModel model_;  // randomized per episode
  const TerrainGrid* grid_ = nullptr;  // optional
  Profile profile_;   // active column profile (owned copy)
  EnvConfig cfg_;
  RewardCoeffs coeffs_;
  RewardShapingParams shaping_;
  ObservationSpec spec_;
  Rng rng_;

  SimState sim_;
  EpisodeState ep_;
  RandomizedParams params_;
  ReflexState reflex_;
  RewardState reward_state_;

  CompositeAction last_composite_;     // applied last tick (obs + delay)
  CompositeAction prev_composite_;     // one further back (action-rate terms)
  Eigen::Matrix<double, 6, 1> last_action_units_ =
      Eigen::Matrix<double, 6, 1>::Zero();
  Eigen::Matrix<double, 6, 1> prev_action_units_ =
      Eigen::Matrix<double, 6, 1>::Zero();
  Eigen::Matrix<double, 6, 1> prev2_action_units_ =
      Eigen::Matrix<double, 6, 1>::Zero();
  Eigen::Matrix<double, 6, 1> prev_qd_ = Eigen::Matrix<double, 6, 1>::Zero();
  std::array<double, kNumLegs> air_time_{0.0, 0.0};
  std::array<bool, kNumLegs> was_contact_{true, true};
  int pushes_applied_ = 0;
  std::deque<Eigen::VectorXd> obs_history_;
};

}  // namespace ctbc
