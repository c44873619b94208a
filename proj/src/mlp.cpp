#include "raceplan/mlp.hpp"

#include <cmath>

#include "raceplan/error.hpp"

namespace raceplan {

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    n += static_cast<std::size_t>(weights[l].size()) + biases[l].size();
  }
  return n;
}

MlpGrads MlpGrads::zeros_like(const Mlp& net) {
  MlpGrads g;
  g.weights.reserve(net.weights.size());
  g.biases.reserve(net.biases.size());
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    g.weights.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
    g.biases.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
  }
  return g;
}

void MlpGrads::add(const MlpGrads& other) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += other.weights[l];
    biases[l] += other.biases[l];
  }
}

double MlpGrads::squared_norm() const {
  double n = 0.0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    n += weights[l].squaredNorm() + biases[l].squaredNorm();
  }
  return n;
}

void MlpGrads::scale(double s) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] *= s;
    biases[l] *= s;
  }
}

namespace {

// Semi-orthogonal matrix: orthonormal rows when out <= in, orthonormal
// columns otherwise. Sign-fixed with diag(R) so the draw is unique.
Eigen::MatrixXd orthogonal_matrix(int rows, int cols, Rng& rng) {
  const int big = std::max(rows, cols);
  const int small = std::min(rows, cols);
  Eigen::MatrixXd gauss(big, small);
  for (int i = 0; i < big; ++i) {
    for (int j = 0; j < small; ++j) gauss(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gauss);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(small).triangularView<Eigen::Upper>();
  for (int j = 0; j < small; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return rows >= cols ? q : Eigen::MatrixXd(q.transpose());
}

}  // namespace

Mlp make_mlp(int input_dim, const std::vector<int>& hidden, int output_dim, Rng& rng,
             double hidden_gain, double out_gain) {
  Mlp net;
  int in = input_dim;
  for (int width : hidden) {
    net.weights.push_back(hidden_gain * orthogonal_matrix(width, in, rng));
    net.biases.push_back(Eigen::VectorXd::Zero(width));
    in = width;
  }
  net.weights.push_back(out_gain * orthogonal_matrix(output_dim, in, rng));
  net.biases.push_back(Eigen::VectorXd::Zero(output_dim));
  return net;
}

Eigen::MatrixXd mlp_forward(const Mlp& net, const Eigen::MatrixXd& input, MlpCache* cache) {
  if (input.cols() != net.input_dim()) {
    throw ValidationError("mlp_forward: input has " + std::to_string(input.cols()) +
                          " columns, expected " + std::to_string(net.input_dim()));
  }
  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(input);
  }
  Eigen::MatrixXd a = input;
  const std::size_t layers = net.weights.size();
  for (std::size_t l = 0; l < layers; ++l) {
    Eigen::MatrixXd z = a * net.weights[l].transpose();
    z.rowwise() += net.biases[l].transpose();
    if (l + 1 < layers) {
      a = z.array().tanh().matrix();
    } else {
      a = std::move(z);
    }
    if (cache) cache->activations.push_back(a);
  }
  return a;
}

Eigen::VectorXd mlp_forward(const Mlp& net, const Eigen::VectorXd& input) {
  return mlp_forward(net, Eigen::MatrixXd(input.transpose())).row(0);
}

MlpGrads mlp_backward(const Mlp& net, const MlpCache& cache, const Eigen::MatrixXd& output_grad,
                      Eigen::MatrixXd* input_grad) {
  const std::size_t layers = net.weights.size();
  if (cache.activations.size() != layers + 1) {
    throw ValidationError("mlp_backward: cache does not match the network depth");
  }
  if (output_grad.rows() != cache.activations.back().rows() ||
      output_grad.cols() != net.output_dim()) {
    throw ValidationError("mlp_backward: output gradient shape mismatch");
  }

  MlpGrads grads;
  grads.weights.resize(layers);
  grads.biases.resize(layers);

  Eigen::MatrixXd delta = output_grad;  // dLoss/dZ of the current layer
  for (std::size_t l = layers; l-- > 0;) {
    grads.weights[l] = delta.transpose() * cache.activations[l];
    grads.biases[l] = delta.colwise().sum();
    if (l == 0) {
      if (input_grad) *input_grad = delta * net.weights[0];
      break;
    }
    Eigen::MatrixXd da = delta * net.weights[l];
    // tanh'(z) = 1 - a^2 with a the stored activation.
    delta = (da.array() * (1.0 - cache.activations[l].array().square())).matrix();
  }
  return grads;
}

std::vector<TensorView> tensor_views(Mlp& net, MlpGrads& grads) {
  std::vector<TensorView> views;
  views.reserve(2 * net.weights.size());
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    views.push_back({net.weights[l].data(), grads.weights[l].data(), net.weights[l].size()});
    views.push_back({net.biases[l].data(), grads.biases[l].data(), net.biases[l].size()});
  }
  return views;
}

double gradient_global_norm(const std::vector<TensorView>& views) {
  double sq = 0.0;
  for (const TensorView& t : views) {
    sq += Eigen::Map<const Eigen::ArrayXd>(t.grad, t.size).square().sum();
  }
  return std::sqrt(sq);
}

double clip_global_norm(const std::vector<TensorView>& views, double max_norm) {
  const double norm = gradient_global_norm(views);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (const TensorView& t : views) {
      Eigen::Map<Eigen::ArrayXd>(t.grad, t.size) *= scale;
    }
  }
  return norm;
}

void adam_init(AdamState& state, const std::vector<TensorView>& views) {
  state.m.clear();
  state.v.clear();
  state.step = 0;
  for (const TensorView& t : views) {
    state.m.push_back(Eigen::ArrayXd::Zero(t.size));
    state.v.push_back(Eigen::ArrayXd::Zero(t.size));
  }
}

void adam_step(AdamState& state, const std::vector<TensorView>& views, const AdamConfig& cfg) {
  if (state.m.size() != views.size()) adam_init(state, views);
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < views.size(); ++i) {
    Eigen::Map<Eigen::ArrayXd> param(views[i].data, views[i].size);
    Eigen::Map<const Eigen::ArrayXd> grad(views[i].grad, views[i].size);
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad.square();
    param -= cfg.learning_rate * (state.m[i] / bc1) /
             ((state.v[i] / bc2).sqrt() + cfg.epsilon);
  }
}

}  // namespace raceplan
