#include "raceplan/policy.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include "raceplan/error.hpp"

namespace raceplan {

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * log(2*pi)
const std::vector<int> kHiddenWidths{256, 256, 256, 256};

}  // namespace

ActorCritic make_actor_critic(int input_dim, int action_dim, Rng& rng) {
  ActorCritic policy;
  const double trunk_gain = std::sqrt(2.0);
  policy.actor = make_mlp(input_dim, kHiddenWidths, action_dim, rng, trunk_gain, 0.01);
  policy.critic = make_mlp(input_dim, kHiddenWidths, 1, rng, trunk_gain, 1.0);
  policy.log_std = Eigen::VectorXd::Zero(action_dim);
  return policy;
}

std::pair<double, double> gaussian_logprob_and_entropy(const Eigen::VectorXd& mean,
                                                       const Eigen::VectorXd& log_std,
                                                       const Eigen::VectorXd& action) {
  if (mean.size() != log_std.size() || mean.size() != action.size()) {
    throw ValidationError("gaussian_logprob_and_entropy: dimension mismatch");
  }
  double logprob = 0.0;
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    const double sigma = std::exp(log_std[i]);
    const double z = (action[i] - mean[i]) / sigma;
    logprob += -0.5 * z * z - log_std[i] - kHalfLog2Pi;
  }
  return {logprob, gaussian_entropy(log_std)};
}

Eigen::VectorXd gaussian_logprob(const Eigen::MatrixXd& means, const Eigen::VectorXd& log_std,
                                 const Eigen::MatrixXd& actions) {
  const Eigen::ArrayXd inv_var = (-2.0 * log_std.array()).exp();
  const Eigen::ArrayXXd diff = (actions - means).array();
  Eigen::VectorXd lp =
      (-0.5 * (diff.square().rowwise() * inv_var.transpose())).rowwise().sum();
  lp.array() -= log_std.sum() + kHalfLog2Pi * static_cast<double>(log_std.size());
  return lp;
}

double gaussian_entropy(const Eigen::VectorXd& log_std) {
  return log_std.sum() + (0.5 + kHalfLog2Pi) * static_cast<double>(log_std.size());
}

Eigen::VectorXd policy_mean_offsets(const ActorCritic& policy, const Eigen::VectorXd& obs,
                                    double o_max) {
  return o_max * mlp_forward(policy.actor, obs).array().tanh();
}

PolicySample policy_sample_offsets(const ActorCritic& policy, const Eigen::VectorXd& obs,
                                   double o_max, Rng& rng) {
  const Eigen::VectorXd mean = mlp_forward(policy.actor, obs);
  PolicySample sample;
  sample.pre_squash.resize(mean.size());
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    sample.pre_squash[i] = mean[i] + std::exp(policy.log_std[i]) * rng.normal();
  }
  sample.offsets = o_max * sample.pre_squash.array().tanh();
  sample.log_prob =
      gaussian_logprob_and_entropy(mean, policy.log_std, sample.pre_squash).first;
  return sample;
}

PolicyGrads PolicyGrads::zeros_like(const ActorCritic& policy) {
  PolicyGrads g;
  g.actor = MlpGrads::zeros_like(policy.actor);
  g.log_std = Eigen::VectorXd::Zero(policy.log_std.size());
  g.critic = MlpGrads::zeros_like(policy.critic);
  return g;
}

std::vector<TensorView> tensor_views(ActorCritic& policy, PolicyGrads& grads) {
  std::vector<TensorView> views = tensor_views(policy.actor, grads.actor);
  views.push_back({policy.log_std.data(), grads.log_std.data(), policy.log_std.size()});
  const auto critic_views = tensor_views(policy.critic, grads.critic);
  views.insert(views.end(), critic_views.begin(), critic_views.end());
  return views;
}

std::vector<TensorView> actor_tensor_views(ActorCritic& policy, PolicyGrads& grads) {
  return tensor_views(policy.actor, grads.actor);
}

namespace {

void write_doubles(std::ofstream& out, const double* data, std::size_t count) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 8));
}

void read_doubles(std::ifstream& in, double* data, std::size_t count, const std::string& path) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * 8));
  if (in.gcount() != static_cast<std::streamsize>(count * 8)) {
    throw ParseError(path + ": checkpoint truncated");
  }
}

void require_little_endian() {
  if constexpr (std::endian::native != std::endian::little) {
    throw Error("checkpoint IO requires a little-endian host");
  }
}

void write_mlp(std::ofstream& out, const Mlp& net) {
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    // Row-major order so the declared (out x in) shape reads naturally.
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w =
        net.weights[l];
    write_doubles(out, w.data(), static_cast<std::size_t>(w.size()));
    write_doubles(out, net.biases[l].data(), static_cast<std::size_t>(net.biases[l].size()));
  }
}

void read_mlp(std::ifstream& in, Mlp& net, const std::string& path) {
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w(
        net.weights[l].rows(), net.weights[l].cols());
    read_doubles(in, w.data(), static_cast<std::size_t>(w.size()), path);
    net.weights[l] = w;
    read_doubles(in, net.biases[l].data(),
                 static_cast<std::size_t>(net.biases[l].size()), path);
  }
}

}  // namespace

void save_checkpoint(const ActorCritic& policy, const std::string& path) {
  require_little_endian();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open checkpoint for writing: " + path);
  out << "format_version: 1\n";
  out << "input_dim: " << policy.input_dim() << "\n";
  out << "action_dim: " << policy.action_dim() << "\n";
  out << "hidden:";
  for (std::size_t l = 0; l + 1 < policy.actor.weights.size(); ++l) {
    out << " " << policy.actor.weights[l].rows();
  }
  out << "\ndata:\n";
  write_mlp(out, policy.actor);
  write_doubles(out, policy.log_std.data(), static_cast<std::size_t>(policy.log_std.size()));
  write_mlp(out, policy.critic);
  if (!out) throw Error("checkpoint write failed: " + path);
}

ActorCritic load_checkpoint(const std::string& path) {
  require_little_endian();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint: " + path);

  int version = -1, input_dim = -1, action_dim = -1;
  std::vector<int> hidden;
  std::string line;
  while (std::getline(in, line)) {
    if (line == "data:") break;
    const std::size_t colon = line.find(':');
    if (colon == std::string::npos) throw ParseError(path + ": malformed header line: " + line);
    const std::string key = line.substr(0, colon);
    std::istringstream value(line.substr(colon + 1));
    if (key == "format_version") value >> version;
    else if (key == "input_dim") value >> input_dim;
    else if (key == "action_dim") value >> action_dim;
    else if (key == "hidden") {
      int w;
      while (value >> w) hidden.push_back(w);
    } else {
      throw ParseError(path + ": unknown header key '" + key + "'");
    }
  }
  if (version != 1) {
    throw ParseError(path + ": expected format_version 1, found " + std::to_string(version));
  }
  if (input_dim <= 0 || action_dim <= 0 || hidden.empty()) {
    throw ParseError(path + ": incomplete checkpoint header");
  }

  // Allocate the declared shapes, then fill from the blob.
  ActorCritic policy;
  Rng scratch(0);
  policy.actor = make_mlp(input_dim, hidden, action_dim, scratch, 0.0, 0.0);
  policy.critic = make_mlp(input_dim, hidden, 1, scratch, 0.0, 0.0);
  policy.log_std = Eigen::VectorXd::Zero(action_dim);

  read_mlp(in, policy.actor, path);
  read_doubles(in, policy.log_std.data(), static_cast<std::size_t>(action_dim), path);
  read_mlp(in, policy.critic, path);

  char extra;
  if (in.read(&extra, 1).gcount() != 0) {
    throw ParseError(path + ": trailing bytes after checkpoint payload");
  }
  return policy;
}

}  // namespace raceplan
