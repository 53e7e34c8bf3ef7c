#pragma once

#include <cstdint>
#include <vector>

#include "ctbc/env.hpp"
#include "ctbc/ppo.hpp"

namespace ctbc {

// Success-rate protocol over fixed-width stairs at increasing heights:
// n_robots randomized trials per height, success = ascending steps_to_climb
// consecutive risers within the time limit without a termination.
struct EvalProtocol {
  int n_robots = 100;
  double stair_width = 0.40;                                    // m
  std::vector<double> heights{0.08, 0.10, 0.12, 0.15, 0.18, 0.20, 0.22};  // m
  int steps_to_climb = 3;
  double time_limit = 15.0;  // s
};

struct EvalRow {
  double height = 0.0;  // m
  int successes = 0;
  int trials = 0;
  double rate() const { return trials ? 100.0 * successes / trials : 0.0; }
};

// Deterministic per seed; trials use the environment's published domain
// randomization. The policy runs in deterministic (mean-action) mode.
std::vector<EvalRow> evaluate_stairs(const PolicyBundle& bundle,
                                     const RobotModel& model,
                                     const EnvConfig& env_cfg,
                                     const EvalProtocol& protocol,
                                     uint64_t seed);

void write_eval_csv(const std::vector<EvalRow>& rows, const std::string& path);

// Pit-escape preset: the robot starts inside a pit of the given depth and
// must drive out (base past the far edge) within the time limit.
struct HoleEscapeResult {
  int successes = 0;
  int trials = 0;
};
HoleEscapeResult evaluate_hole_escape(const PolicyBundle& bundle,
                                      const RobotModel& model,
                                      const EnvConfig& env_cfg, double depth,
                                      double width, int trials,
                                      double time_limit, uint64_t seed);

// Mean curriculum level reached from scratch on a terrain grid: runs
// n_episodes per env column starting from the given level, applying
// curriculum updates, and returns the final mean level. Used by the
// annealing and ablation analyses.
double evaluate_terrain_level(const PolicyBundle& bundle, const RobotModel& model,
                              const TerrainGrid& grid, const EnvConfig& env_cfg,
                              int num_envs, int episodes_per_env,
                              int start_level, double k_ff, TriggerMode mode,
                              uint64_t seed);

}  // namespace ctbc
