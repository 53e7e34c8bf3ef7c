#pragma once

#include <map>
#include <string>
#include <vector>

#include "ctbc/checkpoint.hpp"
#include "ctbc/env.hpp"
#include "ctbc/ppo.hpp"

namespace ctbc {

// Ablation wiring (the published four variants):
//   feedforward && contact_trigger  -> full method
//   !feedforward && contact_trigger -> trigger drives phases, k_ff = 0
//   feedforward && !contact_trigger -> feedforward free-runs on a clock
//   neither                         -> plain PPO
struct TrainConfig {
  int num_envs = 64;
  int iterations = 1000;
  int horizon = 48;

  double gamma = 0.99, lam = 0.95;
  PpoParams ppo;
  double lr = 3e-4;
  std::vector<int> actor_hidden{256, 128};
  std::vector<int> critic_hidden{256, 128};
  std::vector<int> estimator_hidden{128, 64};

  uint64_t seed = 0;
  bool feedforward = true;
  bool contact_trigger = true;

  double stage2_at = 0.5;        // progress fraction enabling same-foot-x
  double anneal_start = 0.6, anneal_end = 0.9;

  GridSpec terrain;              // stairs_only etc.
  uint64_t terrain_seed = 1;
  EnvConfig env;
  RewardCoeffs coeffs = RewardCoeffs::planar_defaults();

  std::string out_dir;           // empty -> nothing written
  int checkpoint_every = 0;      // 0 -> final checkpoint only

  static TrainConfig from_config(const Config& cfg);
};

struct IterationLog {
  int iteration = 0;
  double mean_level = 0.0;
  double total_reward = 0.0;     // mean per-tick weighted total
  std::map<std::string, double> term_means;
  double k_ff = 0.0;
  double estimator_loss = 0.0;
  double surrogate = 0.0, value_loss = 0.0, entropy = 0.0, kl = 0.0, lr = 0.0;
  int trigger_events = 0;
};

struct TrainResult {
  PolicyBundle bundle;
  std::vector<IterationLog> log;
  bool diverged = false;
  std::string csv_path;          // empty when out_dir was empty
  std::string checkpoint_path;
};

// Full rollout/update loop: curriculum on episode end, anneal_kff applied
// each iteration, stage-2 switch flips the same-foot-x coefficient on, CSV
// log (iteration, mean terrain level, total reward, per-term rewards, k_ff,
// estimator loss). All randomness derives from cfg.seed. On divergence the
// last good checkpoint is written and the loop halts with diverged = true.
TrainResult train(const TrainConfig& cfg);

void write_log_csv(const std::vector<IterationLog>& log,
                   const RewardCoeffs& coeffs, const std::string& path);

}  // namespace ctbc
