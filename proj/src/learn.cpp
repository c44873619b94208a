#include "raceplan/learn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "raceplan/error.hpp"

namespace raceplan {

void RolloutBuffer::resize(int steps_, int num_envs_, int obs_dim, int action_dim) {
  steps = steps_;
  num_envs = num_envs_;
  const int n = steps * num_envs;
  observations.resize(n, obs_dim);
  actions.resize(n, action_dim);
  log_probs.resize(n);
  rewards.resize(n);
  values.resize(n);
  dones.assign(static_cast<std::size_t>(n), 0);
  advantages = Eigen::VectorXd::Zero(n);
  returns = Eigen::VectorXd::Zero(n);
}

void compute_gae(RolloutBuffer& buffer, const Eigen::VectorXd& last_values, double gamma,
                 double lambda) {
  if (buffer.size() == 0) throw ValidationError("compute_gae: empty buffer");
  if (last_values.size() != buffer.num_envs) {
    throw ValidationError("compute_gae: last_values must have one entry per environment");
  }
  buffer.advantages.resize(buffer.size());
  buffer.returns.resize(buffer.size());
  for (int e = 0; e < buffer.num_envs; ++e) {
    double last_gae = 0.0;
    for (int t = buffer.steps - 1; t >= 0; --t) {
      const int i = t * buffer.num_envs + e;
      const double nonterminal = buffer.dones[i] ? 0.0 : 1.0;
      const double next_value =
          t + 1 < buffer.steps ? buffer.values[(t + 1) * buffer.num_envs + e] : last_values[e];
      const double delta =
          buffer.rewards[i] + gamma * next_value * nonterminal - buffer.values[i];
      last_gae = delta + gamma * lambda * nonterminal * last_gae;
      buffer.advantages[i] = last_gae;
    }
  }
  buffer.returns = buffer.advantages + buffer.values;
}

double bc_update(ActorCritic& policy, const Eigen::MatrixXd& observations, double o_max,
                 AdamState& optimizer, const TrainConfig& cfg) {
  const Eigen::Index n = observations.rows();
  if (n == 0) throw ValidationError("bc_update: empty batch");
  const Eigen::Index h = policy.action_dim();

  MlpCache cache;
  const Eigen::MatrixXd mean = mlp_forward(policy.actor, observations, &cache);
  const Eigen::ArrayXXd squashed = mean.array().tanh();
  const Eigen::ArrayXXd offsets = o_max * squashed;
  const double loss = offsets.abs().mean();

  // d mean|o| / d mean = sign(o) * o_max * (1 - tanh^2) / (N*H)
  const Eigen::MatrixXd dmean =
      (offsets.sign() * o_max * (1.0 - squashed.square()) / static_cast<double>(n * h))
          .matrix();
  PolicyGrads grads = PolicyGrads::zeros_like(policy);
  grads.actor = mlp_backward(policy.actor, cache, dmean);

  const auto views = actor_tensor_views(policy, grads);
  clip_global_norm(views, cfg.max_grad_norm);
  adam_step(optimizer, views, AdamConfig{cfg.learning_rate});
  return loss;
}

PpoDiagnostics ppo_update(ActorCritic& policy, const RolloutBuffer& buffer,
                          AdamState& optimizer, const TrainConfig& cfg, Rng& rng) {
  const int batch = buffer.size();
  if (batch == 0) throw ValidationError("ppo_update: empty buffer");
  int mb_size = cfg.minibatch_size > 0 ? cfg.minibatch_size : batch / 4;
  mb_size = std::clamp(mb_size, 1, batch);

  std::vector<int> indices(static_cast<std::size_t>(batch));
  std::iota(indices.begin(), indices.end(), 0);

  const Eigen::Index h = policy.action_dim();
  PpoDiagnostics diag;
  long sample_passes = 0;
  long clipped = 0;

  for (int epoch = 0; epoch < cfg.update_epochs; ++epoch) {
    rng.shuffle(indices);
    for (int start = 0; start < batch; start += mb_size) {
      const int count = std::min(mb_size, batch - start);

      Eigen::MatrixXd obs(count, buffer.observations.cols());
      Eigen::MatrixXd act(count, h);
      Eigen::VectorXd old_lp(count), adv(count), ret(count);
      for (int k = 0; k < count; ++k) {
        const int i = indices[static_cast<std::size_t>(start + k)];
        obs.row(k) = buffer.observations.row(i);
        act.row(k) = buffer.actions.row(i);
        old_lp[k] = buffer.log_probs[i];
        adv[k] = buffer.advantages[i];
        ret[k] = buffer.returns[i];
      }

      // Per-minibatch advantage normalization.
      const double adv_mean = adv.mean();
      const double adv_std =
          std::sqrt((adv.array() - adv_mean).square().sum() / std::max(1, count - 1));
      adv = ((adv.array() - adv_mean) / (adv_std + 1e-8)).matrix();

      MlpCache actor_cache, critic_cache;
      const Eigen::MatrixXd mean = mlp_forward(policy.actor, obs, &actor_cache);
      const Eigen::VectorXd value = mlp_forward(policy.critic, obs, &critic_cache);

      const Eigen::VectorXd new_lp = gaussian_logprob(mean, policy.log_std, act);
      const Eigen::ArrayXd log_ratio = (new_lp - old_lp).array();
      const Eigen::ArrayXd ratio = log_ratio.exp();

      // Clipped surrogate; the max of the two negated branches.
      const Eigen::ArrayXd loss1 = -adv.array() * ratio;
      const Eigen::ArrayXd ratio_clipped =
          ratio.min(1.0 + cfg.clip_eps).max(1.0 - cfg.clip_eps);
      const Eigen::ArrayXd loss2 = -adv.array() * ratio_clipped;
      const double pg_loss = loss1.max(loss2).mean();

      const Eigen::ArrayXd v_err = value.array() - ret.array();
      const double v_loss = v_err.square().mean();
      const double entropy = gaussian_entropy(policy.log_std);
      const double total_loss = pg_loss - cfg.ent_coef * entropy + cfg.vf_coef * v_loss;
      if (!std::isfinite(total_loss)) {
        throw SolverError("ppo_update: non-finite loss (pg " + std::to_string(pg_loss) +
                          ", v " + std::to_string(v_loss) + ")");
      }

      diag.policy_loss = pg_loss;
      diag.value_loss = v_loss;
      diag.entropy = entropy;
      diag.approx_kl = (ratio - 1.0 - log_ratio).mean();
      clipped += (loss2 > loss1).count();
      sample_passes += count;

      // Backward. dLoss/d new_lp: active unclipped branch only.
      Eigen::ArrayXd dlp = Eigen::ArrayXd::Zero(count);
      for (int k = 0; k < count; ++k) {
        if (loss1[k] >= loss2[k]) dlp[k] = -adv[k] * ratio[k] / count;
      }
      // d lp / d mean = (a - mu) / sigma^2 ; d lp / d log_std = z^2 - 1.
      const Eigen::ArrayXd inv_var = (-2.0 * policy.log_std.array()).exp();
      const Eigen::ArrayXXd diff = (act - mean).array();
      const Eigen::MatrixXd dmean =
          ((diff.rowwise() * inv_var.transpose()).colwise() * dlp).matrix();
      const Eigen::ArrayXXd z2 = diff.square().rowwise() * inv_var.transpose();
      Eigen::VectorXd dlog_std =
          ((z2 - 1.0).colwise() * dlp).colwise().sum().matrix().transpose();
      dlog_std.array() -= cfg.ent_coef;  // entropy bonus: dH/dlog_std = 1

      const Eigen::MatrixXd dvalue =
          (cfg.vf_coef * 2.0 / count) * v_err.matrix();

      PolicyGrads grads = PolicyGrads::zeros_like(policy);
      grads.actor = mlp_backward(policy.actor, actor_cache, dmean);
      grads.log_std = dlog_std;
      grads.critic = mlp_backward(policy.critic, critic_cache, dvalue);

      const auto views = tensor_views(policy, grads);
      clip_global_norm(views, cfg.max_grad_norm);
      adam_step(optimizer, views, AdamConfig{cfg.learning_rate});
    }
  }
  diag.clip_fraction =
      sample_passes > 0 ? static_cast<double>(clipped) / static_cast<double>(sample_passes)
                        : 0.0;
  return diag;
}

namespace {

// Synchronous vectorized rollouts with auto-reset; each env owns its RNG.
struct VecEnv {
  std::vector<EnvCore> envs;
  std::vector<double> episode_returns;

  VecEnv(const EnvConfig& cfg, int n, std::uint64_t seed) {
    envs.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) envs.emplace_back(cfg, seed + static_cast<std::uint64_t>(i));
    episode_returns.assign(static_cast<std::size_t>(n), 0.0);
  }

  Eigen::MatrixXd observations() const {
    Eigen::MatrixXd obs(static_cast<Eigen::Index>(envs.size()),
                        envs.front().observation_dim());
    for (std::size_t e = 0; e < envs.size(); ++e) {
      obs.row(static_cast<Eigen::Index>(e)) = envs[e].observation().flatten().transpose();
    }
    return obs;
  }
};

Eigen::MatrixXd sample_actions(const ActorCritic& policy, const Eigen::MatrixXd& means,
                               Rng& rng) {
  Eigen::MatrixXd actions(means.rows(), means.cols());
  for (Eigen::Index r = 0; r < means.rows(); ++r) {
    for (Eigen::Index c = 0; c < means.cols(); ++c) {
      actions(r, c) = means(r, c) + std::exp(policy.log_std[c]) * rng.normal();
    }
  }
  return actions;
}

}  // namespace

TrainResult bc_train(const EnvConfig& env_config, const TrainConfig& cfg,
                     const TrainCallback& checkpoint_hook) {
  Rng rng(cfg.seed);
  VecEnv vec(env_config, cfg.num_envs, cfg.seed * 1000003ULL + 17ULL);
  const int obs_dim = vec.envs.front().observation_dim();
  const int h = env_config.planning.horizon;
  const double o_max = env_config.planning.o_max;

  TrainResult result;
  result.policy = make_actor_critic(obs_dim, h, rng);
  AdamState optimizer;

  const int batch = cfg.num_envs * cfg.rollout_steps;
  Eigen::MatrixXd obs_batch(batch, obs_dim);
  long global_step = 0;

  while (global_step < cfg.total_timesteps) {
    // Collect one stochastic on-policy rollout.
    for (int t = 0; t < cfg.rollout_steps; ++t) {
      const Eigen::MatrixXd obs = vec.observations();
      const Eigen::MatrixXd means = mlp_forward(result.policy.actor, obs);
      const Eigen::MatrixXd actions = sample_actions(result.policy, means, rng);
      for (int e = 0; e < cfg.num_envs; ++e) {
        obs_batch.row(t * cfg.num_envs + e) = obs.row(e);
        OffsetVector o;
        o.o.resize(static_cast<std::size_t>(h));
        for (int j = 0; j < h; ++j) o.o[j] = o_max * std::tanh(actions(e, j));
        const StepOutcome out = vec.envs[static_cast<std::size_t>(e)].step(o);
        vec.episode_returns[static_cast<std::size_t>(e)] += out.reward;
        ++global_step;
        if (out.done()) {
          result.return_curve.push_back(
              {global_step, vec.episode_returns[static_cast<std::size_t>(e)]});
          vec.episode_returns[static_cast<std::size_t>(e)] = 0.0;
          vec.envs[static_cast<std::size_t>(e)].reset();
        }
      }
    }

    // Supervised updates on the collected observations.
    int mb_size = cfg.minibatch_size > 0 ? cfg.minibatch_size : batch / 4;
    mb_size = std::clamp(mb_size, 1, batch);
    std::vector<int> indices(static_cast<std::size_t>(batch));
    std::iota(indices.begin(), indices.end(), 0);
    double last_loss = 0.0;
    for (int epoch = 0; epoch < cfg.update_epochs; ++epoch) {
      rng.shuffle(indices);
      for (int start = 0; start < batch; start += mb_size) {
        const int count = std::min(mb_size, batch - start);
        Eigen::MatrixXd mb(count, obs_dim);
        for (int k = 0; k < count; ++k) {
          mb.row(k) = obs_batch.row(indices[static_cast<std::size_t>(start + k)]);
        }
        last_loss = bc_update(result.policy, mb, o_max, optimizer, cfg);
      }
    }
    result.loss_curve.push_back({global_step, last_loss});
    if (checkpoint_hook) checkpoint_hook(global_step, result.policy);
  }
  result.steps_run = global_step;
  return result;
}

TrainResult ppo_train(const EnvConfig& env_config, const ActorCritic* bootstrap,
                      const TrainConfig& cfg, const TrainCallback& checkpoint_hook) {
  Rng rng(cfg.seed);
  VecEnv vec(env_config, cfg.num_envs, cfg.seed * 1000003ULL + 17ULL);
  const int obs_dim = vec.envs.front().observation_dim();
  const int h = env_config.planning.horizon;
  const double o_max = env_config.planning.o_max;

  TrainResult result;
  result.policy = make_actor_critic(obs_dim, h, rng);
  if (bootstrap) {
    if (bootstrap->input_dim() != obs_dim || bootstrap->action_dim() != h) {
      throw ValidationError(
          "ppo_train: checkpoint dimensions (input " + std::to_string(bootstrap->input_dim()) +
          ", action " + std::to_string(bootstrap->action_dim()) + ") do not match env (input " +
          std::to_string(obs_dim) + ", action " + std::to_string(h) + ")");
    }
    // Actor and exploration scale carry over; the critic stays fresh.
    result.policy.actor = bootstrap->actor;
    result.policy.log_std = bootstrap->log_std;
  }
  AdamState optimizer;

  RolloutBuffer buffer;
  buffer.resize(cfg.rollout_steps, cfg.num_envs, obs_dim, h);
  long global_step = 0;

  while (global_step < cfg.total_timesteps) {
    for (int t = 0; t < cfg.rollout_steps; ++t) {
      const Eigen::MatrixXd obs = vec.observations();
      const Eigen::MatrixXd means = mlp_forward(result.policy.actor, obs);
      const Eigen::MatrixXd actions = sample_actions(result.policy, means, rng);
      const Eigen::VectorXd log_probs =
          gaussian_logprob(means, result.policy.log_std, actions);
      const Eigen::VectorXd values = mlp_forward(result.policy.critic, obs);

      for (int e = 0; e < cfg.num_envs; ++e) {
        const int i = t * cfg.num_envs + e;
        buffer.observations.row(i) = obs.row(e);
        buffer.actions.row(i) = actions.row(e);
        buffer.log_probs[i] = log_probs[e];
        buffer.values[i] = values[e];

        OffsetVector o;
        o.o.resize(static_cast<std::size_t>(h));
        for (int j = 0; j < h; ++j) o.o[j] = o_max * std::tanh(actions(e, j));
        const StepOutcome out = vec.envs[static_cast<std::size_t>(e)].step(o);
        buffer.rewards[i] = out.reward;
        // Every episode boundary (including truncation) masks the recursion;
        // the stored next value would belong to the freshly reset episode.
        buffer.dones[static_cast<std::size_t>(i)] = out.done() ? 1 : 0;

        vec.episode_returns[static_cast<std::size_t>(e)] += out.reward;
        ++global_step;
        if (out.done()) {
          result.return_curve.push_back(
              {global_step, vec.episode_returns[static_cast<std::size_t>(e)]});
          vec.episode_returns[static_cast<std::size_t>(e)] = 0.0;
          vec.envs[static_cast<std::size_t>(e)].reset();
        }
      }
    }

    const Eigen::VectorXd last_values =
        mlp_forward(result.policy.critic, vec.observations());
    compute_gae(buffer, last_values, cfg.gamma, cfg.gae_lambda);
    const PpoDiagnostics diag = ppo_update(result.policy, buffer, optimizer, cfg, rng);
    result.loss_curve.push_back({global_step, diag.policy_loss});
    if (checkpoint_hook) checkpoint_hook(global_step, result.policy);
  }
  result.steps_run = global_step;
  return result;
}

}  // namespace raceplan
