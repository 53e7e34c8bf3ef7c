#include "ctbc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <stdexcept>

#include "ctbc/reflex.hpp"

namespace ctbc {

namespace {

double anneal_ramp(double progress, double start, double end) {
  if (progress <= start) return 1.0;
  if (progress >= end) return 0.0;
  return (end - progress) / (end - start);
}

}  // namespace

TrainConfig TrainConfig::from_config(const Config& cfg) {
  TrainConfig c;
  c.num_envs = int(cfg.get_int("num_envs", c.num_envs));
  c.iterations = int(cfg.get_int("iterations", c.iterations));
  c.horizon = int(cfg.get_int("horizon", c.horizon));
  c.gamma = cfg.get_double("gamma", c.gamma);
  c.lam = cfg.get_double("lambda", c.lam);
  c.ppo.clip = cfg.get_double("clip", c.ppo.clip);
  c.ppo.epochs = int(cfg.get_int("epochs", c.ppo.epochs));
  c.ppo.minibatches = int(cfg.get_int("minibatches", c.ppo.minibatches));
  c.ppo.entropy_coef = cfg.get_double("entropy_coef", c.ppo.entropy_coef);
  c.ppo.value_coef = cfg.get_double("value_coef", c.ppo.value_coef);
  c.ppo.estimator_coef = cfg.get_double("estimator_coef", c.ppo.estimator_coef);
  c.ppo.max_grad_norm = cfg.get_double("max_grad_norm", c.ppo.max_grad_norm);
  c.ppo.desired_kl = cfg.get_double("desired_kl", c.ppo.desired_kl);
  c.lr = cfg.get_double("learning_rate", c.lr);
  auto hidden = [&cfg](const std::string& key, std::vector<int> def) {
    // "a,b" or "a b"
    std::string s = cfg.get_string(key, "");
    if (s.empty()) return def;
    std::vector<int> out;
    std::string num;
    for (char ch : s + ",") {
      if (ch == ',' || ch == ' ') {
        if (!num.empty()) out.push_back(std::stoi(num));
        num.clear();
      } else {
        num += ch;
      }
    }
    return out.empty() ? def : out;
  };
  c.actor_hidden = hidden("actor_hidden", c.actor_hidden);
  c.critic_hidden = hidden("critic_hidden", c.critic_hidden);
  c.estimator_hidden = hidden("estimator_hidden", c.estimator_hidden);
  c.seed = uint64_t(cfg.get_int("seed", int64_t(c.seed)));
  c.feedforward = cfg.get_bool("feedforward", c.feedforward);
  c.contact_trigger = cfg.get_bool("contact_trigger", c.contact_trigger);
  c.stage2_at = cfg.get_double("stage2_at", c.stage2_at);
  c.anneal_start = cfg.get_double("anneal_start", c.anneal_start);
  c.anneal_end = cfg.get_double("anneal_end", c.anneal_end);
  c.terrain.stairs_only = cfg.get_bool("stairs_only", c.terrain.stairs_only);
  c.terrain.n_rows = int(cfg.get_int("terrain_rows", c.terrain.n_rows));
  c.terrain_seed = uint64_t(cfg.get_int("terrain_seed", int64_t(c.terrain_seed)));
  c.env = EnvConfig::from_config(cfg);
  c.coeffs = RewardCoeffs::from_config(cfg);
  c.out_dir = cfg.get_string("out_dir", c.out_dir);
  c.checkpoint_every = int(cfg.get_int("checkpoint_every", c.checkpoint_every));
  return c;
}

void write_log_csv(const std::vector<IterationLog>& log,
                   const RewardCoeffs& coeffs, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open log csv: " + path);
  os << "iteration,mean_terrain_level,total_reward";
  for (const auto& [name, w] : coeffs.values) os << "," << name;
  os << ",k_ff,estimator_loss,trigger_events,surrogate,value_loss,entropy,kl,lr\n";
  os << std::setprecision(10);
  for (const auto& e : log) {
    os << e.iteration << "," << e.mean_level << "," << e.total_reward;
    for (const auto& [name, w] : coeffs.values) {
      auto it = e.term_means.find(name);
      os << "," << (it == e.term_means.end() ? 0.0 : it->second);
    }
    os << "," << e.k_ff << "," << e.estimator_loss << "," << e.trigger_events
       << "," << e.surrogate << "," << e.value_loss << "," << e.entropy << ","
       << e.kl << "," << e.lr << "\n";
  }
}

TrainResult train(const TrainConfig& cfg) {
  if (cfg.num_envs <= 0 || cfg.horizon <= 0 || cfg.iterations <= 0)
    throw std::invalid_argument("train: bad sizes");

  Rng root(cfg.seed);
  Rng init_rng = root.spawn(1);
  Rng policy_rng = root.spawn(2);
  Rng update_rng = root.spawn(3);

  const RobotModel model = default_model();
  const TerrainGrid grid = generate(cfg.terrain_seed, cfg.terrain);

  EnvConfig ecfg = cfg.env;
  ecfg.max_level = std::min(ecfg.max_level, cfg.terrain.n_rows - 1);
  ecfg.reflex.mode = cfg.contact_trigger
                         ? TriggerMode::Triggered
                         : (cfg.feedforward ? TriggerMode::FreeRun
                                            : TriggerMode::Off);

  RewardCoeffs coeffs = cfg.coeffs;
  const double stage2_coeff = coeffs.get("same_foot_x_position");
  coeffs.set("same_foot_x_position", 0.0);  // stage 1: off

  const int N = cfg.num_envs;
  std::vector<Env> envs;
  envs.reserve(N);
  for (int i = 0; i < N; ++i)
    envs.emplace_back(model, &grid, i % grid.spec.n_cols, ecfg, coeffs,
                      root.spawn(100 + uint64_t(i)));

  const int obs_dim = envs[0].obs_spec().dim();
  PolicyBundle bundle =
      PolicyBundle::make(obs_dim, PrivilegedSpec::kDim, 6, 2, cfg.actor_hidden,
                         cfg.critic_hidden, cfg.estimator_hidden, cfg.lr,
                         init_rng);
  bundle.actor_opt.lr = bundle.critic_opt.lr = cfg.lr;
  PpoParams ppo = cfg.ppo;

  Eigen::MatrixXd obs(obs_dim, N), stacked(bundle.stack * obs_dim, N),
      priv(PrivilegedSpec::kDim, N);
  for (int i = 0; i < N; ++i) {
    obs.col(i) = envs[i].reset();
    stacked.col(i) = envs[i].stacked_observation();
    priv.col(i) = envs[i].build_privileged();
  }

  RolloutBuffer buffer;
  buffer.resize(N, cfg.horizon, obs_dim, bundle.stack, PrivilegedSpec::kDim, 6,
                2);

  TrainResult result;
  bool stage2_on = false;

  const std::vector<std::string>& term_names = reward_term_names();

  std::string ckpt_path;
  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    ckpt_path = cfg.out_dir + "/policy.ckpt";
  }

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    const double progress = double(iter) / double(cfg.iterations);
    bundle.progress = progress;

    const double k_ff =
        cfg.feedforward ? anneal_ramp(progress, cfg.anneal_start, cfg.anneal_end)
                        : 0.0;
    for (auto& e : envs) e.set_k_ff(k_ff);

    if (!stage2_on && progress >= cfg.stage2_at) {
      stage2_on = true;
      coeffs.set("same_foot_x_position", stage2_coeff);
      for (auto& e : envs) e.set_coeffs(coeffs);
    }

    std::vector<double> term_sums(term_names.size(), 0.0);
    double reward_sum = 0.0;
    int trigger_sum = 0;

    std::vector<EnvStepResult> results(N);
    for (int t = 0; t < cfg.horizon; ++t) {
      const Eigen::MatrixXd obs_n = bundle.obs_norm.normalize(obs);
      const Eigen::MatrixXd stacked_n = bundle.obs_norm.normalize(stacked);
      const Eigen::MatrixXd est = bundle.estimator.forward(stacked_n);
      Eigen::MatrixXd a_in(obs_dim + bundle.est_out, N);
      a_in << obs_n, est;
      const Eigen::MatrixXd means = bundle.actor.forward(a_in);
      Eigen::MatrixXd c_in(obs_dim + PrivilegedSpec::kDim, N);
      c_in << obs_n, priv;
      const Eigen::MatrixXd values = bundle.critic.forward(c_in);

      Eigen::MatrixXd actions(6, N);
      const Eigen::ArrayXd sigma = bundle.log_std.array().exp();
      for (int i = 0; i < N; ++i)
        for (int k = 0; k < 6; ++k)
          actions(k, i) = means(k, i) + sigma[k] * policy_rng.normal();

      const double lp_base =
          -bundle.log_std.sum() - 0.5 * 1.8378770664093454836 * 6.0;
      const Eigen::ArrayXd inv_var = (-2.0 * bundle.log_std.array()).exp();

      for (int i = 0; i < N; ++i) {
        const int c = buffer.col(t, i);
        buffer.obs.col(c) = obs.col(i);
        buffer.stacked.col(c) = stacked.col(i);
        buffer.privileged.col(c) = priv.col(i);
        buffer.actions.col(c) = actions.col(i);
        buffer.est_inputs.col(c) = est.col(i);
        buffer.values[c] = values(0, i);
        const Eigen::ArrayXd d = (actions.col(i) - means.col(i)).array();
        buffer.log_probs[c] = lp_base - 0.5 * (d.square() * inv_var).sum();
      }

#pragma omp parallel for schedule(static)
      for (int i = 0; i < N; ++i) {
        results[i] = envs[i].step(actions.col(i));
        if (results[i].done) {
          envs[i].curriculum_update();
          // next-state slot holds the fresh episode's first observation
          results[i].obs = envs[i].reset();
        }
      }

      for (int i = 0; i < N; ++i) {
        const int c = buffer.col(t, i);
        const EnvStepResult& r = results[i];
        buffer.rewards[c] = r.reward.total;
        buffer.dones[c] = r.done ? 1 : 0;
        buffer.est_targets.col(c) = r.true_velocity;
        reward_sum += r.reward.total;
        trigger_sum += r.trigger_events;
        for (size_t k = 0; k < r.reward.terms.size(); ++k)
          term_sums[k] += r.reward.terms[k].weighted;
        obs.col(i) = r.obs;
        stacked.col(i) = envs[i].stacked_observation();
        priv.col(i) = envs[i].build_privileged();
      }
    }

    {
      const Eigen::MatrixXd obs_n = bundle.obs_norm.normalize(obs);
      Eigen::MatrixXd c_in(obs_dim + PrivilegedSpec::kDim, N);
      c_in << obs_n, priv;
      buffer.bootstrap_values = bundle.critic.forward(c_in).row(0).transpose();
    }
    buffer.compute_gae(cfg.gamma, cfg.lam);

    const LossStats stats = ppo_update(bundle, buffer, ppo, update_rng);

    IterationLog entry;
    entry.iteration = iter;
    double level_sum = 0.0;
    for (const auto& e : envs) level_sum += e.level();
    entry.mean_level = level_sum / N;
    const double inv_steps = 1.0 / double(N * cfg.horizon);
    entry.total_reward = reward_sum * inv_steps;
    for (size_t k = 0; k < term_names.size(); ++k)
      entry.term_means[term_names[k]] = term_sums[k] * inv_steps;
    entry.k_ff = k_ff;
    entry.estimator_loss = stats.estimator;
    entry.surrogate = stats.surrogate;
    entry.value_loss = stats.value;
    entry.entropy = stats.entropy;
    entry.kl = stats.approx_kl;
    entry.lr = stats.lr;
    entry.trigger_events = trigger_sum;
    result.log.push_back(entry);

    if (!stats.finite) {
      result.diverged = true;
      if (!ckpt_path.empty()) save_checkpoint(bundle, ckpt_path);
      break;
    }
    if (!ckpt_path.empty() && cfg.checkpoint_every > 0 &&
        (iter + 1) % cfg.checkpoint_every == 0)
      save_checkpoint(bundle, ckpt_path);
  }

  bundle.progress = result.diverged
                        ? bundle.progress
                        : 1.0;
  result.bundle = std::move(bundle);
  if (!cfg.out_dir.empty()) {
    result.csv_path = cfg.out_dir + "/training_log.csv";
    write_log_csv(result.log, coeffs, result.csv_path);
    save_checkpoint(result.bundle, ckpt_path);
    result.checkpoint_path = ckpt_path;
  }
  return result;
}

}  // namespace ctbc
