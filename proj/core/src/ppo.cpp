#include "ctbc/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ctbc {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;
constexpr double kNormClip = 10.0;  // normalized-observation clamp

// log N(a; mu, sigma) summed over dims, one column per sample
Eigen::VectorXd gaussian_log_prob(const Eigen::MatrixXd& actions,
                                  const Eigen::MatrixXd& mean,
                                  const Eigen::VectorXd& log_std) {
  const int B = int(actions.cols());
  Eigen::VectorXd lp(B);
  const Eigen::ArrayXd inv_var = (-2.0 * log_std.array()).exp();
  const double base = -log_std.sum() - 0.5 * kLogTwoPi * double(log_std.size());
  for (int i = 0; i < B; ++i) {
    const Eigen::ArrayXd d = (actions.col(i) - mean.col(i)).array();
    lp[i] = base - 0.5 * (d.square() * inv_var).sum();
  }
  return lp;
}

void clip_global_norm(Eigen::VectorXd& grad, double max_norm) {
  if (max_norm <= 0.0) return;
  const double n = grad.norm();
  if (n > max_norm) grad *= max_norm / n;
}

}  // namespace

void RunningNorm::init(int dim) {
  mean = Eigen::VectorXd::Zero(dim);
  var = Eigen::VectorXd::Ones(dim);
  count = 1e-4;
  frozen = false;
}

void RunningNorm::update(const Eigen::MatrixXd& batch) {
  if (frozen || batch.cols() == 0) return;
  if (batch.rows() != mean.size())
    throw std::invalid_argument("RunningNorm::update: dim mismatch");
  const double n = double(batch.cols());
  const Eigen::VectorXd bm = batch.rowwise().mean();
  Eigen::VectorXd bv = Eigen::VectorXd::Zero(mean.size());
  for (int i = 0; i < batch.cols(); ++i)
    bv.array() += (batch.col(i) - bm).array().square();
  bv /= n;
  // Chan et al. parallel combine
  const Eigen::VectorXd delta = bm - mean;
  const double tot = count + n;
  mean += delta * (n / tot);
  var = (var * count + bv * n +
         delta.cwiseProduct(delta) * (count * n / tot)) /
        tot;
  count = tot;
}

Eigen::VectorXd RunningNorm::normalize(const Eigen::VectorXd& x) const {
  return normalize(Eigen::MatrixXd(x)).col(0);
}

Eigen::MatrixXd RunningNorm::normalize(const Eigen::MatrixXd& X) const {
  const int dim = int(mean.size());
  if (X.rows() % dim != 0)
    throw std::invalid_argument("RunningNorm::normalize: dim mismatch");
  const Eigen::ArrayXd inv_sd = (var.array() + 1e-8).sqrt().inverse();
  Eigen::MatrixXd Y(X.rows(), X.cols());
  // stacked inputs (rows = k * dim) normalize frame-wise with the same stats
  for (int f = 0; f * dim < X.rows(); ++f)
    for (int i = 0; i < X.cols(); ++i)
      Y.block(f * dim, i, dim, 1) =
          (((X.block(f * dim, i, dim, 1) - mean).array() * inv_sd)
               .cwiseMin(kNormClip)
               .cwiseMax(-kNormClip))
              .matrix();
  return Y;
}

PolicyBundle PolicyBundle::make(int obs_dim, int priv_dim, int act_dim,
                                int est_out,
                                const std::vector<int>& actor_hidden,
                                const std::vector<int>& critic_hidden,
                                const std::vector<int>& estimator_hidden,
                                double lr, Rng& rng) {
  PolicyBundle b;
  b.obs_dim = obs_dim;
  b.priv_dim = priv_dim;
  b.act_dim = act_dim;
  b.est_out = est_out;

  auto sizes = [](int in, const std::vector<int>& hidden, int out) {
    std::vector<int> s{in};
    s.insert(s.end(), hidden.begin(), hidden.end());
    s.push_back(out);
    return s;
  };
  b.actor = Mlp::make(sizes(obs_dim + est_out, actor_hidden, act_dim), rng);
  b.actor.W.back() *= 0.1;  // start near the default stance
  b.log_std = Eigen::VectorXd::Constant(act_dim, std::log(0.5));
  b.critic = Mlp::make(sizes(obs_dim + priv_dim, critic_hidden, 1), rng);
  b.estimator = Mlp::make(sizes(b.stack * obs_dim, estimator_hidden, est_out), rng);

  b.actor_opt.lr = b.critic_opt.lr = b.estimator_opt.lr = lr;
  b.actor_opt.init(b.actor.param_count() + act_dim);
  b.critic_opt.init(b.critic.param_count());
  b.estimator_opt.init(b.estimator.param_count());
  b.obs_norm.init(obs_dim);
  return b;
}

Eigen::VectorXd PolicyBundle::estimate_velocity(const Eigen::VectorXd& stacked) const {
  return estimator.forward(obs_norm.normalize(Eigen::MatrixXd(stacked))).col(0);
}

double PolicyBundle::value(const Eigen::VectorXd& obs,
                           const Eigen::VectorXd& privileged) const {
  Eigen::VectorXd in(obs_dim + priv_dim);
  in << obs_norm.normalize(obs), privileged;
  return critic.forward(Eigen::MatrixXd(in))(0, 0);
}

ActResult act(const PolicyBundle& bundle, const Eigen::VectorXd& obs,
              const Eigen::VectorXd& stacked, bool deterministic, Rng* rng) {
  if (obs.size() != bundle.obs_dim ||
      stacked.size() != bundle.stack * bundle.obs_dim)
    throw std::invalid_argument("act: observation dimension mismatch");
  if (!deterministic && !rng)
    throw std::invalid_argument("act: stochastic sampling needs an rng");

  ActResult r;
  r.est_vel = bundle.estimate_velocity(stacked);
  Eigen::VectorXd in(bundle.obs_dim + bundle.est_out);
  in << bundle.obs_norm.normalize(obs), r.est_vel;
  const Eigen::VectorXd mean = bundle.actor.forward(Eigen::MatrixXd(in)).col(0);
  if (deterministic) {
    r.action = mean;
  } else {
    r.action = mean;
    for (int k = 0; k < bundle.act_dim; ++k)
      r.action[k] += std::exp(bundle.log_std[k]) * rng->normal();
  }
  r.log_prob = gaussian_log_prob(Eigen::MatrixXd(r.action),
                                 Eigen::MatrixXd(mean), bundle.log_std)(0);
  return r;
}

void gae(const Eigen::VectorXd& rewards, const Eigen::VectorXd& values,
         const std::vector<uint8_t>& dones, double gamma, double lam,
         double bootstrap_value, Eigen::VectorXd* advantages,
         Eigen::VectorXd* returns) {
  const int T = int(rewards.size());
  if (values.size() != T || int(dones.size()) != T)
    throw std::invalid_argument("gae: misaligned arrays");
  advantages->resize(T);
  returns->resize(T);
  double last_adv = 0.0;
  for (int t = T - 1; t >= 0; --t) {
    const double not_done = dones[t] ? 0.0 : 1.0;
    const double next_v = (t + 1 < T) ? values[t + 1] : bootstrap_value;
    const double delta = rewards[t] + gamma * not_done * next_v - values[t];
    last_adv = delta + gamma * lam * not_done * last_adv;
    (*advantages)[t] = last_adv;
    (*returns)[t] = last_adv + values[t];
  }
}

void RolloutBuffer::resize(int n, int T, int obs_dim, int stack, int priv_dim,
                           int act_dim, int est_out_dim) {
  num_envs = n;
  horizon = T;
  const int cols = n * T;
  obs.resize(obs_dim, cols);
  stacked.resize(stack * obs_dim, cols);
  privileged.resize(priv_dim, cols);
  actions.resize(act_dim, cols);
  log_probs.resize(cols);
  values.resize(cols);
  rewards.resize(cols);
  dones.assign(cols, 0);
  est_targets.resize(est_out_dim, cols);
  est_inputs.resize(est_out_dim, cols);
  bootstrap_values.resize(n);
  advantages.resize(cols);
  returns.resize(cols);
}

void RolloutBuffer::compute_gae(double gamma, double lam) {
  Eigen::VectorXd r(horizon), v(horizon), adv, ret;
  std::vector<uint8_t> d(horizon);
  for (int e = 0; e < num_envs; ++e) {
    for (int t = 0; t < horizon; ++t) {
      r[t] = rewards[col(t, e)];
      v[t] = values[col(t, e)];
      d[t] = dones[col(t, e)];
    }
    gae(r, v, d, gamma, lam, bootstrap_values[e], &adv, &ret);
    for (int t = 0; t < horizon; ++t) {
      advantages[col(t, e)] = adv[t];
      returns[col(t, e)] = ret[t];
    }
  }
  if (!advantages.allFinite())
    throw std::runtime_error("compute_gae: non-finite advantages");
}

LossStats ppo_update(PolicyBundle& bundle, const RolloutBuffer& buffer,
                     const PpoParams& params, Rng& rng) {
  LossStats stats;
  const int M = buffer.size();
  const int act_dim = bundle.act_dim;

  // snapshot for rollback on numerical failure
  const Mlp actor0 = bundle.actor;
  const Mlp critic0 = bundle.critic;
  const Mlp estimator0 = bundle.estimator;
  const Eigen::VectorXd log_std0 = bundle.log_std;
  const Adam aopt0 = bundle.actor_opt, copt0 = bundle.critic_opt,
             eopt0 = bundle.estimator_opt;

  // normalize with the stats the rollout used; fold this batch into the
  // running stats only after the update so ratios start at exactly 1
  const Eigen::MatrixXd obs_n = bundle.obs_norm.normalize(buffer.obs);
  const Eigen::MatrixXd stacked_n = bundle.obs_norm.normalize(buffer.stacked);

  Eigen::MatrixXd actor_in(bundle.obs_dim + bundle.est_out, M);
  actor_in << obs_n, buffer.est_inputs;
  Eigen::MatrixXd critic_in(bundle.obs_dim + bundle.priv_dim, M);
  critic_in << obs_n, buffer.privileged;

  // per-batch advantage normalization
  Eigen::VectorXd adv = buffer.advantages;
  const double a_mean = adv.mean();
  const double a_std =
      std::sqrt((adv.array() - a_mean).square().sum() / std::max(1, M - 1));
  adv = (adv.array() - a_mean) / (a_std + 1e-8);

  std::vector<int> order(M);
  std::iota(order.begin(), order.end(), 0);

  const int n_mb = std::max(1, params.minibatches);
  const int mb_size = M / n_mb;
  double kl_sum = 0.0, surr_sum = 0.0, val_sum = 0.0, est_sum = 0.0,
         ent_sum = 0.0;
  int n_updates = 0;

  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    for (int i = M - 1; i > 0; --i)
      std::swap(order[i], order[size_t(rng.uniform_int(0, i))]);

    for (int mb = 0; mb < n_mb; ++mb) {
      const int lo = mb * mb_size;
      const int B = (mb + 1 == n_mb) ? M - lo : mb_size;
      if (B <= 0) continue;

      Eigen::MatrixXd a_in(actor_in.rows(), B), c_in(critic_in.rows(), B),
          e_in(stacked_n.rows(), B), acts(act_dim, B),
          e_tgt(bundle.est_out, B);
      Eigen::VectorXd lp_old(B), adv_mb(B), ret_mb(B);
      for (int i = 0; i < B; ++i) {
        const int s = order[lo + i];
        a_in.col(i) = actor_in.col(s);
        c_in.col(i) = critic_in.col(s);
        e_in.col(i) = stacked_n.col(s);
        acts.col(i) = buffer.actions.col(s);
        e_tgt.col(i) = buffer.est_targets.col(s);
        lp_old[i] = buffer.log_probs[s];
        adv_mb[i] = adv[order[lo + i]];
        ret_mb[i] = buffer.returns[s];
      }

      // ---- actor ----
      Mlp::Tape a_tape;
      const Eigen::MatrixXd mean = bundle.actor.forward(a_in, a_tape);
      const Eigen::VectorXd lp_new =
          gaussian_log_prob(acts, mean, bundle.log_std);
      const Eigen::ArrayXd ratio = (lp_new - lp_old).array().exp();

      double surrogate = 0.0;
      Eigen::VectorXd dlp = Eigen::VectorXd::Zero(B);  // d(-surr)/d lp_new
      for (int i = 0; i < B; ++i) {
        const double r = ratio[i], A = adv_mb[i];
        const double un = r * A;
        const double cl = std::clamp(r, 1.0 - params.clip, 1.0 + params.clip) * A;
        surrogate += std::min(un, cl);
        const bool clipped = (A > 0.0 && r > 1.0 + params.clip) ||
                             (A < 0.0 && r < 1.0 - params.clip);
        if (!clipped) dlp[i] = -r * A / double(B);
      }
      surrogate /= double(B);
      const double entropy =
          bundle.log_std.sum() + 0.5 * double(act_dim) * (kLogTwoPi + 1.0);

      const Eigen::ArrayXd inv_var = (-2.0 * bundle.log_std.array()).exp();
      Eigen::MatrixXd d_mean(act_dim, B);
      Eigen::VectorXd d_log_std = Eigen::VectorXd::Zero(act_dim);
      for (int i = 0; i < B; ++i) {
        const Eigen::ArrayXd d = (acts.col(i) - mean.col(i)).array();
        // dlp/dmean = (a - mu) / sigma^2 ; dlp/dlog_std = d^2/sigma^2 - 1
        d_mean.col(i) = (dlp[i] * d * inv_var).matrix();
        d_log_std += (dlp[i] * (d.square() * inv_var - 1.0)).matrix();
      }
      d_log_std.array() -= params.entropy_coef;  // d(-coef * H)/d log_std

      Mlp::Grads a_grads = bundle.actor.zero_grads();
      bundle.actor.backward(a_tape, d_mean, a_grads);
      Eigen::VectorXd a_flat(bundle.actor.param_count() + act_dim);
      a_flat << Mlp::flatten_grads(a_grads), d_log_std;
      clip_global_norm(a_flat, params.max_grad_norm);

      // ---- critic ----
      Mlp::Tape c_tape;
      const Eigen::MatrixXd v = bundle.critic.forward(c_in, c_tape);
      const Eigen::VectorXd verr = v.row(0).transpose() - ret_mb;
      const double value_loss = verr.squaredNorm() / double(B);
      Mlp::Grads c_grads = bundle.critic.zero_grads();
      const Eigen::MatrixXd dv =
          (params.value_coef * 2.0 / double(B)) * verr.transpose();
      bundle.critic.backward(c_tape, dv, c_grads);
      Eigen::VectorXd c_flat = Mlp::flatten_grads(c_grads);
      clip_global_norm(c_flat, params.max_grad_norm);

      // ---- estimator ----
      Mlp::Tape e_tape;
      const Eigen::MatrixXd ev = bundle.estimator.forward(e_in, e_tape);
      const Eigen::MatrixXd eerr = ev - e_tgt;
      const double est_loss = eerr.squaredNorm() / double(B);
      Mlp::Grads e_grads = bundle.estimator.zero_grads();
      bundle.estimator.backward(
          e_tape, (params.estimator_coef * 2.0 / double(B)) * eerr, e_grads);
      Eigen::VectorXd e_flat = Mlp::flatten_grads(e_grads);
      clip_global_norm(e_flat, params.max_grad_norm);

      const double kl = (lp_old - lp_new).mean();
      if (!std::isfinite(surrogate) || !std::isfinite(value_loss) ||
          !std::isfinite(est_loss) || !a_flat.allFinite() ||
          !c_flat.allFinite() || !e_flat.allFinite()) {
        bundle.actor = actor0;
        bundle.critic = critic0;
        bundle.estimator = estimator0;
        bundle.log_std = log_std0;
        bundle.actor_opt = aopt0;
        bundle.critic_opt = copt0;
        bundle.estimator_opt = eopt0;
        stats.finite = false;
        stats.lr = bundle.actor_opt.lr;
        return stats;
      }

      if (params.desired_kl > 0.0) {
        double lr = bundle.actor_opt.lr;
        if (kl > 2.0 * params.desired_kl)
          lr = std::max(params.lr_min, lr / 1.5);
        else if (kl >= 0.0 && kl < 0.5 * params.desired_kl)
          lr = std::min(params.lr_max, lr * 1.5);
        bundle.actor_opt.lr = bundle.critic_opt.lr = lr;
      }

      Eigen::VectorXd a_theta(bundle.actor.param_count() + act_dim);
      a_theta << bundle.actor.flatten(), bundle.log_std;
      bundle.actor_opt.step(a_theta, a_flat);
      bundle.actor.unflatten(a_theta.head(bundle.actor.param_count()));
      bundle.log_std = a_theta.tail(act_dim);

      Eigen::VectorXd c_theta = bundle.critic.flatten();
      bundle.critic_opt.step(c_theta, c_flat);
      bundle.critic.unflatten(c_theta);

      Eigen::VectorXd e_theta = bundle.estimator.flatten();
      bundle.estimator_opt.step(e_theta, e_flat);
      bundle.estimator.unflatten(e_theta);

      surr_sum += surrogate;
      val_sum += value_loss;
      est_sum += est_loss;
      ent_sum += entropy;
      kl_sum += kl;
      ++n_updates;
    }
  }

  bundle.obs_norm.update(buffer.obs);

  const double inv = n_updates ? 1.0 / n_updates : 0.0;
  stats.surrogate = surr_sum * inv;
  stats.value = val_sum * inv;
  stats.estimator = est_sum * inv;
  stats.entropy = ent_sum * inv;
  stats.approx_kl = kl_sum * inv;
  stats.lr = bundle.actor_opt.lr;
  return stats;
}

double gradient_check(PolicyBundle& bundle, const Eigen::MatrixXd& obs_batch,
                      const Eigen::MatrixXd& stacked_batch,
                      const Eigen::MatrixXd& priv_batch, double fd_step,
                      Rng& rng) {
  const int B = int(obs_batch.cols());
  const int act_dim = bundle.act_dim;

  // fixed synthetic fixture: actions near the current mean, random
  // advantages and regression targets, old log-probs at the current params
  Eigen::MatrixXd actor_in(bundle.obs_dim + bundle.est_out, B);
  const Eigen::MatrixXd obs_n = bundle.obs_norm.normalize(obs_batch);
  const Eigen::MatrixXd stacked_n = bundle.obs_norm.normalize(stacked_batch);
  const Eigen::MatrixXd est0 = bundle.estimator.forward(stacked_n);
  actor_in << obs_n, est0;
  Eigen::MatrixXd critic_in(bundle.obs_dim + bundle.priv_dim, B);
  critic_in << obs_n, priv_batch;

  const Eigen::MatrixXd mean0 = bundle.actor.forward(actor_in);
  Eigen::MatrixXd acts = mean0;
  for (int i = 0; i < B; ++i)
    for (int k = 0; k < act_dim; ++k)
      acts(k, i) += std::exp(bundle.log_std[k]) * rng.normal();
  const Eigen::VectorXd lp_old = gaussian_log_prob(acts, mean0, bundle.log_std);
  Eigen::VectorXd adv(B), vret(B);
  Eigen::MatrixXd etgt(bundle.est_out, B);
  for (int i = 0; i < B; ++i) {
    adv[i] = rng.normal();
    vret[i] = rng.normal();
    for (int k = 0; k < bundle.est_out; ++k) etgt(k, i) = rng.normal();
  }
  const double clip = 0.2, entropy_coef = 0.01;

  auto loss = [&](const Mlp& actor, const Eigen::VectorXd& log_std,
                  const Mlp& critic, const Mlp& estimator) {
    const Eigen::MatrixXd mean = actor.forward(actor_in);
    const Eigen::VectorXd lp = gaussian_log_prob(acts, mean, log_std);
    double surr = 0.0;
    for (int i = 0; i < B; ++i) {
      const double r = std::exp(lp[i] - lp_old[i]);
      surr += std::min(r * adv[i],
                       std::clamp(r, 1.0 - clip, 1.0 + clip) * adv[i]);
    }
    surr /= double(B);
    const double entropy =
        log_std.sum() + 0.5 * double(act_dim) * (kLogTwoPi + 1.0);
    const Eigen::VectorXd v = critic.forward(critic_in).row(0).transpose();
    const double vloss = (v - vret).squaredNorm() / double(B);
    const double eloss = (estimator.forward(stacked_n) - etgt).squaredNorm() /
                         double(B);
    return -surr - entropy_coef * entropy + vloss + eloss;
  };

  // analytic gradient at the current parameters
  Mlp::Tape a_tape, c_tape, e_tape;
  const Eigen::MatrixXd mean = bundle.actor.forward(actor_in, a_tape);
  const Eigen::VectorXd lp = gaussian_log_prob(acts, mean, bundle.log_std);
  const Eigen::ArrayXd inv_var = (-2.0 * bundle.log_std.array()).exp();
  Eigen::MatrixXd d_mean(act_dim, B);
  Eigen::VectorXd d_log_std = Eigen::VectorXd::Zero(act_dim);
  for (int i = 0; i < B; ++i) {
    const double r = std::exp(lp[i] - lp_old[i]);
    const bool clipped = (adv[i] > 0.0 && r > 1.0 + clip) ||
                         (adv[i] < 0.0 && r < 1.0 - clip);
    const double dlp = clipped ? 0.0 : -r * adv[i] / double(B);
    const Eigen::ArrayXd d = (acts.col(i) - mean.col(i)).array();
    d_mean.col(i) = (dlp * d * inv_var).matrix();
    d_log_std += (dlp * (d.square() * inv_var - 1.0)).matrix();
  }
  d_log_std.array() -= entropy_coef;
  Mlp::Grads a_grads = bundle.actor.zero_grads();
  bundle.actor.backward(a_tape, d_mean, a_grads);

  const Eigen::MatrixXd v = bundle.critic.forward(critic_in, c_tape);
  Mlp::Grads c_grads = bundle.critic.zero_grads();
  bundle.critic.backward(
      c_tape,
      (2.0 / double(B)) * (v.row(0).transpose() - vret).transpose(), c_grads);

  const Eigen::MatrixXd ev = bundle.estimator.forward(stacked_n, e_tape);
  Mlp::Grads e_grads = bundle.estimator.zero_grads();
  bundle.estimator.backward(e_tape, (2.0 / double(B)) * (ev - etgt), e_grads);

  Eigen::VectorXd analytic(bundle.actor.param_count() + act_dim +
                           bundle.critic.param_count() +
                           bundle.estimator.param_count());
  analytic << Mlp::flatten_grads(a_grads), d_log_std,
      Mlp::flatten_grads(c_grads), Mlp::flatten_grads(e_grads);

  Eigen::VectorXd theta(analytic.size());
  theta << bundle.actor.flatten(), bundle.log_std, bundle.critic.flatten(),
      bundle.estimator.flatten();

  auto eval_at = [&](const Eigen::VectorXd& th) {
    Mlp actor = bundle.actor, critic = bundle.critic,
        estimator = bundle.estimator;
    int k = 0;
    actor.unflatten(th.segment(k, actor.param_count()));
    k += actor.param_count();
    const Eigen::VectorXd ls = th.segment(k, act_dim);
    k += act_dim;
    critic.unflatten(th.segment(k, critic.param_count()));
    k += critic.param_count();
    estimator.unflatten(th.segment(k, estimator.param_count()));
    return loss(actor, ls, critic, estimator);
  };

  const int n = int(theta.size());
  const int stride = std::max(1, n / 2000);
  double max_rel = 0.0;
  Eigen::VectorXd th = theta;
  for (int j = 0; j < n; j += stride) {
    th[j] = theta[j] + fd_step;
    const double fp = eval_at(th);
    th[j] = theta[j] - fd_step;
    const double fm = eval_at(th);
    th[j] = theta[j];
    const double numeric = (fp - fm) / (2.0 * fd_step);
    const double rel = std::abs(numeric - analytic[j]) /
                       std::max({std::abs(numeric), std::abs(analytic[j]), 1e-6});
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace ctbc
