#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "ctbc/mlp.hpp"
#include "ctbc/rng.hpp"

namespace ctbc {

// Per-dimension running mean/variance (Welford), shared by all networks that
// consume single-frame observations; stacked inputs reuse it frame-wise.
struct RunningNorm {
  Eigen::VectorXd mean, var;
  double count = 0.0;
  bool frozen = false;

  void init(int dim);
  void update(const Eigen::MatrixXd& batch);  // one sample per column
  Eigen::VectorXd normalize(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd normalize(const Eigen::MatrixXd& X) const;
};

// Actor (obs + estimated velocity -> action mean, learned log-std), critic
// (obs + privileged -> value), and the velocity estimator (last 5 obs frames
// -> planar base velocity). The actor never sees privileged inputs; the
// estimator output is treated as a constant input to the actor (no gradient
// flows from the surrogate loss into the estimator).
struct PolicyBundle {
  int obs_dim = 0, priv_dim = 0, act_dim = 0, est_out = 0, stack = 5;

  Mlp actor;
  Eigen::VectorXd log_std;  // act_dim
  Mlp critic;
  Mlp estimator;

  Adam actor_opt;  // over actor params + log_std (appended)
  Adam critic_opt;
  Adam estimator_opt;

  RunningNorm obs_norm;
  double progress = 0.0;      // training fraction in [0, 1]
  uint64_t config_hash = 0;

  static PolicyBundle make(int obs_dim, int priv_dim, int act_dim, int est_out,
                           const std::vector<int>& actor_hidden,
                           const std::vector<int>& critic_hidden,
                           const std::vector<int>& estimator_hidden, double lr,
                           Rng& rng);

  Eigen::VectorXd estimate_velocity(const Eigen::VectorXd& stacked) const;
  double value(const Eigen::VectorXd& obs, const Eigen::VectorXd& privileged) const;
};

struct ActResult {
  Eigen::VectorXd action;    // act_dim
  double log_prob = 0.0;
  Eigen::VectorXd est_vel;   // est_out
};

// deterministic -> mean action; otherwise Gaussian sample from rng (required).
// Throws std::invalid_argument on dimension mismatch.
ActResult act(const PolicyBundle& bundle, const Eigen::VectorXd& obs,
              const Eigen::VectorXd& stacked, bool deterministic,
              Rng* rng = nullptr);

// Generalized advantage estimation over one environment's trajectory.
// done[t] marks step t as terminal (no bootstrap across it); bootstrap_value
// is V(s_{T}) for the truncated tail. Advantages here are raw; ppo_update
// normalizes per batch.
void gae(const Eigen::VectorXd& rewards, const Eigen::VectorXd& values,
         const std::vector<uint8_t>& dones, double gamma, double lam,
         double bootstrap_value, Eigen::VectorXd* advantages,
         Eigen::VectorXd* returns);

// Fixed horizon x num_envs storage, one sample per column, column index
// t * num_envs + env.
struct RolloutBuffer {
  int num_envs = 0, horizon = 0;
  Eigen::MatrixXd obs, stacked, privileged;  // dim x (T*N)
  Eigen::MatrixXd actions;                   // act_dim x (T*N)
  Eigen::VectorXd log_probs, values, rewards;
  std::vector<uint8_t> dones;
  Eigen::MatrixXd est_targets;               // est_out x (T*N), true velocity
  Eigen::MatrixXd est_inputs;                // est_out x (T*N), rollout-time
                                             // estimates fed to the actor
  Eigen::VectorXd bootstrap_values;          // N
  Eigen::VectorXd advantages, returns;       // filled by compute_gae

  void resize(int num_envs, int horizon, int obs_dim, int stack, int priv_dim,
              int act_dim, int est_out);
  int size() const { return num_envs * horizon; }
  int col(int t, int env) const { return t * num_envs + env; }
  void compute_gae(double gamma, double lam);
};

struct PpoParams {
  double clip = 0.2;
  int epochs = 4;
  int minibatches = 4;
  double entropy_coef = 0.005;
  double value_coef = 1.0;
  double estimator_coef = 1.0;
  double max_grad_norm = 1.0;
  double desired_kl = 0.01;    // adaptive lr target; <= 0 disables adaptation
  double lr_min = 1e-5, lr_max = 1e-2;
};

struct LossStats {
  double surrogate = 0.0;
  double value = 0.0;
  double estimator = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double lr = 0.0;
  bool finite = true;
};

// Clipped-surrogate PPO epoch loop with minibatch shuffling from rng,
// asymmetric value loss on the privileged critic, supervised estimator
// regression on the true velocity, entropy bonus, global gradient-norm
// clipping, and the rsl-rl style adaptive-KL learning-rate rule.
// On a non-finite loss the update is aborted with stats.finite = false and
// the bundle left at its pre-update parameters.
LossStats ppo_update(PolicyBundle& bundle, const RolloutBuffer& buffer,
                     const PpoParams& params, Rng& rng);

// Analytic gradients of the combined actor/critic/estimator objective vs
// central finite differences on a synthetic batch; returns the maximum
// relative error. Checks every parameter up to ~2000, strided beyond that.
double gradient_check(PolicyBundle& bundle, const Eigen::MatrixXd& obs_batch,
                      const Eigen::MatrixXd& stacked_batch,
                      const Eigen::MatrixXd& priv_batch, double fd_step,
                      Rng& rng);

}  // namespace ctbc
