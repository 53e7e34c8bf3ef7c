#include "ctbc/evaluation.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace ctbc {

namespace {

// Runs one episode under the deterministic policy until the predicate fires,
// the environment terminates, or the time limit passes.
template <typename Pred>
bool run_trial(const PolicyBundle& bundle, Env& env, double time_limit,
               Pred success) {
  Eigen::VectorXd obs = env.reset();
  const int max_ticks = int(std::ceil(time_limit / 0.02));
  for (int t = 0; t < max_ticks; ++t) {
    const ActResult a =
        act(bundle, obs, env.stacked_observation(), /*deterministic=*/true);
    const EnvStepResult r = env.step(a.action);
    if (success(env)) return true;
    if (r.done) return false;
    obs = r.obs;
  }
  return false;
}

}  // namespace

std::vector<EvalRow> evaluate_stairs(const PolicyBundle& bundle,
                                     const RobotModel& model,
                                     const EnvConfig& env_cfg,
                                     const EvalProtocol& protocol,
                                     uint64_t seed) {
  std::vector<EvalRow> rows;
  Rng root(seed);
  const double approach = 2.0, runout = 2.0;
  for (size_t h = 0; h < protocol.heights.size(); ++h) {
    const double height = protocol.heights[h];
    const Profile profile =
        make_stairs_profile(approach, height, protocol.stair_width,
                            protocol.steps_to_climb + 2, runout);
    // both wheels past the last required riser
    const double goal_x =
        approach + protocol.steps_to_climb * protocol.stair_width + 0.4;

    EvalRow row;
    row.height = height;
    row.trials = protocol.n_robots;
    for (int trial = 0; trial < protocol.n_robots; ++trial) {
      EnvConfig cfg = env_cfg;
      cfg.episode_seconds = protocol.time_limit + 1.0;
      cfg.push_interval = 1e9;  // no pushes during evaluation
      cfg.spawn_x = approach - 1.0;
      Env env(model, profile, cfg, RewardCoeffs::planar_defaults(),
              root.spawn(h * 100000 + uint64_t(trial)));
      if (run_trial(bundle, env, protocol.time_limit,
                    [&](const Env& e) { return e.state().base.x >= goal_x; }))
        ++row.successes;
    }
    rows.push_back(row);
  }
  return rows;
}

void write_eval_csv(const std::vector<EvalRow>& rows, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open eval csv: " + path);
  os << "height_m,successes,trials,success_rate_pct\n";
  for (const auto& r : rows)
    os << r.height << "," << r.successes << "," << r.trials << "," << r.rate()
       << "\n";
}

HoleEscapeResult evaluate_hole_escape(const PolicyBundle& bundle,
                                      const RobotModel& model,
                                      const EnvConfig& env_cfg, double depth,
                                      double width, int trials,
                                      double time_limit, uint64_t seed) {
  const double approach = 2.0;
  const Profile profile = make_pit_profile(approach, depth, width, 3.0);
  const double exit_x = approach + width + 0.3;  // both wheels out, forward

  HoleEscapeResult result;
  result.trials = trials;
  Rng root(seed);
  for (int trial = 0; trial < trials; ++trial) {
    EnvConfig cfg = env_cfg;
    cfg.episode_seconds = time_limit + 1.0;
    cfg.push_interval = 1e9;
    cfg.spawn_x = approach + 0.5 * width;  // start at the pit floor
    Env env(model, profile, cfg, RewardCoeffs::planar_defaults(),
            root.spawn(uint64_t(trial)));
    if (run_trial(bundle, env, time_limit,
                  [&](const Env& e) { return e.state().base.x >= exit_x; }))
      ++result.successes;
  }
  return result;
}

double evaluate_terrain_level(const PolicyBundle& bundle, const RobotModel& model,
                              const TerrainGrid& grid, const EnvConfig& env_cfg,
                              int num_envs, int episodes_per_env,
                              int start_level, double k_ff, TriggerMode mode,
                              uint64_t seed) {
  Rng root(seed);
  EnvConfig cfg = env_cfg;
  cfg.reflex.mode = mode;
  double level_sum = 0.0;
  for (int i = 0; i < num_envs; ++i) {
    Env env(model, &grid, i % grid.spec.n_cols, cfg,
            RewardCoeffs::planar_defaults(), root.spawn(uint64_t(i)));
    env.set_level(start_level);
    env.set_k_ff(k_ff);
    for (int ep = 0; ep < episodes_per_env; ++ep) {
      Eigen::VectorXd obs = env.reset();
      EnvStepResult r;
      do {
        const ActResult a = act(bundle, obs, env.stacked_observation(), true);
        r = env.step(a.action);
        obs = r.obs;
      } while (!r.done);
      env.curriculum_update();
    }
    level_sum += env.level();
  }
  return level_sum / num_envs;
}

}  // namespace ctbc
