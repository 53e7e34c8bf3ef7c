// Microbenchmarks for the hot paths: physics substep, reward evaluation,
// network forward/backward, and a full environment control tick.
#include <benchmark/benchmark.h>

#include "ctbc/dynamics.hpp"
#include "ctbc/env.hpp"
#include "ctbc/mlp.hpp"
#include "ctbc/rewards.hpp"
#include "ctbc/terrain.hpp"

using namespace ctbc;

namespace {

EnvConfig bench_env_config() {
  EnvConfig cfg;
  cfg.noise_on = false;
  cfg.randomize = false;
  return cfg;
}

void BM_physics_substep(benchmark::State& state) {
  const RobotModel model = default_model();
  const Profile profile = make_flat_profile(20.0);
  SimState s = spawn_state(model, profile, 1.0);
  ActuatorCommand cmd;
  cmd.leg_targets = model.default_pose;
  for (auto _ : state) {
    const StepResult r = step(s, cmd, 0.001, profile, model);
    s = r.next_state;
    benchmark::DoNotOptimize(s.base.x);
  }
}
BENCHMARK(BM_physics_substep);

void BM_reward_suite(benchmark::State& state) {
  RewardContext ctx;
  ctx.dt = 0.02;
  ctx.v_cmd_x = 0.5;
  ctx.v_x = 0.45;
  ctx.q = default_model().default_pose;
  ctx.q_target = ctx.q;
  ctx.q_default = ctx.q;
  ctx.q_lower = default_model().joint_lower;
  ctx.q_upper = default_model().joint_upper;
  ctx.h_target = 0.5;
  ctx.h_base = 0.5;
  RewardState rs;
  const RewardCoeffs coeffs = RewardCoeffs::planar_defaults();
  const RewardShapingParams shaping;
  for (auto _ : state) {
    const RewardBreakdown bd = evaluate_rewards(ctx, rs, coeffs, shaping);
    benchmark::DoNotOptimize(bd.total);
  }
}
BENCHMARK(BM_reward_suite);

void BM_mlp_forward(benchmark::State& state) {
  Rng rng(7);
  const Mlp net = Mlp::make({21, 64, 32, 6}, rng);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(21, state.range(0));
  for (auto _ : state) {
    const Eigen::MatrixXd y = net.forward(x);
    benchmark::DoNotOptimize(y.sum());
  }
}
BENCHMARK(BM_mlp_forward)->Arg(1)->Arg(64);

void BM_mlp_backward(benchmark::State& state) {
  Rng rng(7);
  Mlp net = Mlp::make({21, 64, 32, 6}, rng);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(21, 64);
  const Eigen::MatrixXd dy = Eigen::MatrixXd::Random(6, 64);
  Mlp::Tape tape;
  Mlp::Grads g = net.zero_grads();
  net.forward(x, tape);
  for (auto _ : state) {
    const Eigen::MatrixXd dx = net.backward(tape, dy, g);
    benchmark::DoNotOptimize(dx.sum());
  }
}
BENCHMARK(BM_mlp_backward);

void BM_env_tick(benchmark::State& state) {
  Env env(default_model(), make_flat_profile(20.0), bench_env_config(),
          RewardCoeffs::planar_defaults(), Rng(11));
  env.reset();
  const Eigen::Matrix<double, 6, 1> action = Eigen::Matrix<double, 6, 1>::Zero();
  for (auto _ : state) {
    const EnvStepResult r = env.step(action);
    benchmark::DoNotOptimize(r.reward.total);
    if (r.done) env.reset();
  }
}
BENCHMARK(BM_env_tick);

}  // namespace

BENCHMARK_MAIN();
