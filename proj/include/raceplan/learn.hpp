#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "raceplan/env.hpp"
#include "raceplan/policy.hpp"

namespace raceplan {

struct TrainConfig {
  double learning_rate = 3e-4;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_eps = 0.2;
  double max_grad_norm = 0.5;
  int update_epochs = 4;
  int minibatch_size = 0;  // 0: one quarter of the rollout batch
  long total_timesteps = 50000;
  std::uint64_t seed = 1;

  int num_envs = 8;
  int rollout_steps = 128;  // per env per iteration
  double ent_coef = 0.0;
  double vf_coef = 0.5;
};

// Time-major rollout storage: index t * num_envs + e.
struct RolloutBuffer {
  int steps = 0;
  int num_envs = 0;
  Eigen::MatrixXd observations;  // (steps*num_envs) x obs_dim
  Eigen::MatrixXd actions;       // (steps*num_envs) x action_dim, pre-squash
  Eigen::VectorXd log_probs;
  Eigen::VectorXd rewards;
  Eigen::VectorXd values;
  std::vector<std::uint8_t> dones;  // transition t ended its episode
  Eigen::VectorXd advantages;       // filled by compute_gae
  Eigen::VectorXd returns;

  int size() const { return steps * num_envs; }
  void resize(int steps_, int num_envs_, int obs_dim, int action_dim);
};

// GAE(lambda) with episode-boundary masking; returns = advantages + values.
// last_values holds the critic value of the observation after the final
// stored step, one entry per environment.
void compute_gae(RolloutBuffer& buffer, const Eigen::VectorXd& last_values, double gamma,
                 double lambda);

// One behavioral-cloning step: L1 regression of the squashed actor mean
// toward zero offsets, mean over batch and horizon. Returns the loss before
// the step.
double bc_update(ActorCritic& policy, const Eigen::MatrixXd& observations, double o_max,
                 AdamState& optimizer, const TrainConfig& cfg);

struct PpoDiagnostics {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

// Clipped-surrogate update over the whole buffer (epochs x shuffled
// minibatches, per-minibatch advantage normalization, joint global-norm
// clipped gradient step). Throws SolverError on non-finite losses.
PpoDiagnostics ppo_update(ActorCritic& policy, const RolloutBuffer& buffer,
                          AdamState& optimizer, const TrainConfig& cfg, Rng& rng);

struct ReturnPoint {
  long step = 0;
  double episodic_return = 0.0;
};

struct TrainResult {
  ActorCritic policy;
  std::vector<ReturnPoint> return_curve;      // one point per finished episode
  std::vector<ReturnPoint> loss_curve;        // BC loss / PPO policy loss per update
  long steps_run = 0;
};

using TrainCallback = std::function<void(long step, const ActorCritic&)>;

// On-policy BC: stochastic rollouts with the chosen controller consuming the
// modified trajectory, L1 updates on the collected observations.
TrainResult bc_train(const EnvConfig& env_config, const TrainConfig& cfg,
                     const TrainCallback& checkpoint_hook = {});

// PPO bootstrapped from a BC checkpoint: actor and log_std carry over, the
// critic starts fresh. Passing an empty policy trains from scratch.
TrainResult ppo_train(const EnvConfig& env_config, const ActorCritic* bootstrap,
                      const TrainConfig& cfg, const TrainCallback& checkpoint_hook = {});

}  // namespace raceplan
