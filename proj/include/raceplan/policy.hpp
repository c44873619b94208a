#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "raceplan/mlp.hpp"
#include "raceplan/rng.hpp"

namespace raceplan {

// Actor-critic pair over the same observation. The actor outputs the mean of
// a diagonal Gaussian over pre-squash offsets; log_std is state independent.
struct ActorCritic {
  Mlp actor;
  Eigen::VectorXd log_std;
  Mlp critic;

  int input_dim() const { return actor.input_dim(); }
  int action_dim() const { return actor.output_dim(); }
};

// 4x256 tanh trunks; actor head gain 0.01 so the initial mean is near zero
// offsets, critic head gain 1, log_std zero.
ActorCritic make_actor_critic(int input_dim, int action_dim, Rng& rng);

// Diagonal Gaussian log density over pre-squash actions plus its entropy.
std::pair<double, double> gaussian_logprob_and_entropy(const Eigen::VectorXd& mean,
                                                       const Eigen::VectorXd& log_std,
                                                       const Eigen::VectorXd& action);

// Batched log density: one row per sample.
Eigen::VectorXd gaussian_logprob(const Eigen::MatrixXd& means, const Eigen::VectorXd& log_std,
                                 const Eigen::MatrixXd& actions);
double gaussian_entropy(const Eigen::VectorXd& log_std);

// Deterministic head: o = o_max * tanh(actor(obs)).
Eigen::VectorXd policy_mean_offsets(const ActorCritic& policy, const Eigen::VectorXd& obs,
                                    double o_max);

// Stochastic head: samples u ~ N(mean, sigma), returns (offsets, pre-squash u).
struct PolicySample {
  Eigen::VectorXd offsets;
  Eigen::VectorXd pre_squash;
  double log_prob = 0.0;
};
PolicySample policy_sample_offsets(const ActorCritic& policy, const Eigen::VectorXd& obs,
                                   double o_max, Rng& rng);

// Gradient bundle and the joint flat views for clipping/Adam.
struct PolicyGrads {
  MlpGrads actor;
  Eigen::VectorXd log_std;
  MlpGrads critic;

  static PolicyGrads zeros_like(const ActorCritic& policy);
};

std::vector<TensorView> tensor_views(ActorCritic& policy, PolicyGrads& grads);
std::vector<TensorView> actor_tensor_views(ActorCritic& policy, PolicyGrads& grads);

// Versioned checkpoint: text header, then little-endian 64-bit floats in
// declared order (actor, log_std, critic). Round-trips bit-exactly.
void save_checkpoint(const ActorCritic& policy, const std::string& path);
ActorCritic load_checkpoint(const std::string& path);

}  // namespace raceplan
