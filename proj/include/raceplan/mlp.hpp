#pragma once

#include <Eigen/Dense>
#include <vector>

#include "raceplan/rng.hpp"

namespace raceplan {

// Plain fully connected net: tanh on hidden layers, linear output.
// Batched convention: rows are samples.
struct Mlp {
  std::vector<Eigen::MatrixXd> weights;  // layer l maps in->out as (out x in)
  std::vector<Eigen::VectorXd> biases;

  int input_dim() const { return static_cast<int>(weights.front().cols()); }
  int output_dim() const { return static_cast<int>(weights.back().rows()); }
  std::size_t layer_count() const { return weights.size(); }
  std::size_t parameter_count() const;
};

// Activations kept for the backward pass. activations[0] is the input batch,
// activations[l] the post-tanh output of hidden layer l, the last entry the
// linear output.
struct MlpCache {
  std::vector<Eigen::MatrixXd> activations;
};

struct MlpGrads {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  static MlpGrads zeros_like(const Mlp& net);
  void add(const MlpGrads& other);
  double squared_norm() const;
  void scale(double s);
};

// Orthogonal-style initialization (semi-orthogonal weight matrices scaled by
// `gain`, zero biases); `out_gain` applies to the final layer only.
Mlp make_mlp(int input_dim, const std::vector<int>& hidden, int output_dim, Rng& rng,
             double hidden_gain, double out_gain);

Eigen::MatrixXd mlp_forward(const Mlp& net, const Eigen::MatrixXd& input,
                            MlpCache* cache = nullptr);
Eigen::VectorXd mlp_forward(const Mlp& net, const Eigen::VectorXd& input);

// Exact reverse-mode gradients of the forward map for the batch in `cache`.
// `output_grad` is dLoss/dOutput; optionally returns dLoss/dInput.
MlpGrads mlp_backward(const Mlp& net, const MlpCache& cache, const Eigen::MatrixXd& output_grad,
                      Eigen::MatrixXd* input_grad = nullptr);

// Adam with bias correction, one state blob per tensor.
struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Eigen::ArrayXd> m;
  std::vector<Eigen::ArrayXd> v;
  long step = 0;
};

// Flat views over a parameter set paired with its gradients; Adam and the
// global-norm clip work through these.
struct TensorView {
  double* data;
  double* grad;
  Eigen::Index size;
};

std::vector<TensorView> tensor_views(Mlp& net, MlpGrads& grads);

double gradient_global_norm(const std::vector<TensorView>& views);

// Scales every gradient in place so the global norm is at most max_norm
// (direction preserved). Returns the pre-clip norm.
double clip_global_norm(const std::vector<TensorView>& views, double max_norm);

void adam_init(AdamState& state, const std::vector<TensorView>& views);
void adam_step(AdamState& state, const std::vector<TensorView>& views, const AdamConfig& cfg);

}  // namespace raceplan
