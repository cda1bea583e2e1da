#include "tfta/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>
#include <numeric>

namespace tfta {

namespace {

constexpr char kModelMagic[8] = {'T', 'F', 'T', 'A', '-', 'P', 'P', 'O'};
constexpr std::uint32_t kModelVersion = 1;
constexpr double kRawLimit = 1.0 - 1e-6;
const double kLog2Pi = std::log(2.0 * kPi);

double lerp_box(double raw, double lo, double hi) { return lo + 0.5 * (raw + 1.0) * (hi - lo); }
double unlerp_box(double value, double lo, double hi) { return 2.0 * (value - lo) / (hi - lo) - 1.0; }

std::vector<int> network_dims(int input, int output, const PpoConfig& config) {
  std::vector<int> dims{input};
  for (int i = 0; i < config.hidden_layers; ++i) dims.push_back(config.hidden_width);
  dims.push_back(output);
  return dims;
}

void clip_norm(Network::Gradients& g, ActionVector* extra, double max_norm) {
  double sq = g.squared_norm();
  if (extra) sq += extra->squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double k = max_norm / norm;
    g.scale(k);
    if (extra) *extra *= k;
  }
}

void momentum_step(Network& net, Network::Gradients& velocity, const Network::Gradients& grad, double lr,
                   double momentum) {
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    velocity.weights[l] = momentum * velocity.weights[l] + grad.weights[l];
    velocity.biases[l] = momentum * velocity.biases[l] + grad.biases[l];
    net.weights()[l] -= lr * velocity.weights[l];
    net.biases()[l] -= lr * velocity.biases[l];
  }
}

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw Error("truncated model file");
  return value;
}

void write_network(std::ostream& out, const Network& net) {
  write_pod(out, static_cast<std::uint32_t>(net.dims().size()));
  for (int d : net.dims()) write_pod(out, static_cast<std::uint32_t>(d));
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto& w = net.weights()[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) write_pod(out, w(r, c));
    for (Eigen::Index r = 0; r < net.biases()[l].size(); ++r) write_pod(out, net.biases()[l][r]);
  }
}

Network read_network(std::istream& in, OutputActivation activation) {
  const auto count = read_pod<std::uint32_t>(in);
  if (count < 2 || count > 64) throw Error("model file has an invalid layer count");
  std::vector<int> dims;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto d = read_pod<std::uint32_t>(in);
    if (d == 0 || d > 1u << 16) throw Error("model file has an invalid layer width");
    dims.push_back(static_cast<int>(d));
  }
  Network net(dims, activation);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    auto& w = net.weights()[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = read_pod<double>(in);
    for (Eigen::Index r = 0; r < net.biases()[l].size(); ++r) net.biases()[l][r] = read_pod<double>(in);
  }
  return net;
}

}  // namespace

void validate(const PpoConfig& c) {
  if (!(c.clip_epsilon > 0.0 && c.clip_epsilon < 1.0)) throw ConfigError("clip_epsilon must be in (0, 1)");
  if (!(c.discount > 0.0 && c.discount <= 1.0)) throw ConfigError("discount must be in (0, 1]");
  if (!(c.lr_actor > 0.0 && c.lr_critic > 0.0)) throw ConfigError("learning rates must be positive");
  if (c.batch_size <= 0 || c.epochs <= 0) throw ConfigError("batch_size and epochs must be positive");
  if (c.minibatch_size <= 0 || c.minibatch_size > c.batch_size)
    throw ConfigError("minibatch_size must be in [1, batch_size]");
  if (!(c.gae_lambda >= 0.0 && c.gae_lambda <= 1.0)) throw ConfigError("gae_lambda must be in [0, 1]");
  if (!(c.momentum >= 0.0 && c.momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
  if (!(c.max_grad_norm > 0.0)) throw ConfigError("max_grad_norm must be positive");
  if (c.hidden_width <= 0 || c.hidden_layers <= 0) throw ConfigError("network shape must be positive");
  if (!(c.log_std_min < c.log_std_max)) throw ConfigError("log_std bounds are inverted");
}

ActorCritic make_actor_critic(int state_dim, const PpoConfig& config, std::mt19937_64& rng) {
  ActorCritic m;
  m.actor = Network(network_dims(state_dim, kActionDim, config), OutputActivation::kTanh);
  m.critic = Network(network_dims(state_dim, 1, config), OutputActivation::kLinear);
  // Small actor output layer keeps the initial mean near the box center.
  m.actor.initialize(rng, 0.01);
  m.critic.initialize(rng, 1.0);
  m.log_std.setConstant(config.log_std_init);
  return m;
}

ActionVector actor_forward(const Network& actor, const Eigen::VectorXd& state) {
  if (actor.output_dim() != kActionDim) throw Error("actor output dimension must be 4");
  if (state.size() != actor.input_dim()) throw Error("state dimension does not match the actor input");
  return actor.forward(state);
}

double critic_forward(const Network& critic, const Eigen::VectorXd& state) {
  if (state.size() != critic.input_dim()) throw Error("state dimension does not match the critic input");
  return critic.forward(state)[0];
}

PolicyOutput evaluate_policy(const ActorCritic& model, const Eigen::VectorXd& state) {
  return {actor_forward(model.actor, state), model.log_std, critic_forward(model.critic, state)};
}

FieldAction squash_action(const ActionVector& raw) {
  constexpr double lo = FieldAction::kMinGain;
  constexpr double hi = FieldAction::kMaxGain;
  return {lerp_box(raw[0], lo, hi), lerp_box(raw[1], lo, hi), lerp_box(raw[2], lo, hi), kPi * raw[3]};
}

ActionVector unsquash_action(const FieldAction& a) {
  constexpr double lo = FieldAction::kMinGain;
  constexpr double hi = FieldAction::kMaxGain;
  ActionVector raw;
  raw << unlerp_box(a.beta, lo, hi), unlerp_box(a.rho, lo, hi), unlerp_box(a.sigma, lo, hi), a.theta / kPi;
  return raw;
}

double gaussian_log_prob(const ActionVector& x, const ActionVector& mean, const ActionVector& log_std) {
  const ActionVector z = ((x - mean).array() * (-log_std).array().exp()).matrix();
  return -log_std.sum() - 0.5 * z.squaredNorm() - 0.5 * kActionDim * kLog2Pi;
}

SampledAction sample_action(const PolicyOutput& output, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  SampledAction s;
  for (int i = 0; i < kActionDim; ++i) s.sample[i] = output.mean[i] + std::exp(output.log_std[i]) * normal(rng);
  s.raw = s.sample.cwiseMax(-kRawLimit).cwiseMin(kRawLimit);
  s.log_prob = gaussian_log_prob(s.sample, output.mean, output.log_std);
  return s;
}

std::vector<double> compute_returns(std::span<const double> rewards, double final_value, double discount) {
  std::vector<double> g(rewards.size());
  double running = final_value;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    running = rewards[t] + discount * running;
    g[t] = running;
  }
  return g;
}

std::vector<double> compute_advantages(std::span<const double> rewards, std::span<const double> values,
                                       std::span<const bool> dones, double discount, double gae_lambda,
                                       double last_value) {
  if (rewards.size() != values.size() || rewards.size() != dones.size())
    throw Error("rewards, values and dones must be aligned");
  std::vector<double> adv(rewards.size());
  double running = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    double next_value = last_value;
    if (dones[t]) {
      next_value = 0.0;
      running = 0.0;
    } else if (t + 1 < rewards.size()) {
      next_value = values[t + 1];
    }
    const double delta = rewards[t] + discount * next_value - values[t];
    running = delta + discount * gae_lambda * running;
    adv[t] = running;
  }
  return adv;
}

void normalize(std::vector<double>& values) {
  if (values.empty()) return;
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= n;
  const double scale = var > 1e-16 ? 1.0 / std::sqrt(var) : 1.0;
  for (double& v : values) v = (v - mean) * scale;
}

void RolloutBuffer::append(const RolloutBuffer& other) {
  steps_.insert(steps_.end(), other.steps_.begin(), other.steps_.end());
  last_value_ = other.last_value_;
}

void RolloutBuffer::clear() {
  steps_.clear();
  last_value_ = 0.0;
}

std::vector<double> RolloutBuffer::returns(double discount) const {
  std::vector<double> out;
  out.reserve(steps_.size());
  std::vector<double> episode;
  for (std::size_t t = 0; t < steps_.size(); ++t) {
    episode.push_back(steps_[t].reward);
    const bool last = t + 1 == steps_.size();
    if (steps_[t].done || last) {
      const auto g = compute_returns(episode, steps_[t].done ? 0.0 : last_value_, discount);
      out.insert(out.end(), g.begin(), g.end());
      episode.clear();
    }
  }
  return out;
}

std::vector<double> RolloutBuffer::advantages(double discount, double gae_lambda) const {
  std::vector<double> rewards, values;
  std::vector<char> done_flags;
  for (const auto& s : steps_) {
    rewards.push_back(s.reward);
    values.push_back(s.value);
    done_flags.push_back(s.done);
  }
  // std::vector<bool> has no contiguous storage; go through a plain array.
  std::unique_ptr<bool[]> dones(new bool[done_flags.size()]);
  for (std::size_t i = 0; i < done_flags.size(); ++i) dones[i] = done_flags[i] != 0;
  return compute_advantages(rewards, values, std::span<const bool>(dones.get(), done_flags.size()), discount,
                            gae_lambda, last_value_);
}

double clipped_surrogate(double ratio, double advantage, double epsilon) {
  const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
  return std::min(ratio * advantage, clipped * advantage);
}

LossTerms ppo_loss(const ActorCritic& model, const Minibatch& batch, const PpoConfig& config, PpoGradients* grads) {
  const Eigen::Index n = batch.states.cols();
  if (n == 0) throw Error("empty minibatch");
  const double inv_n = 1.0 / static_cast<double>(n);
  const double eps = config.clip_epsilon;

  Network::Cache actor_cache, critic_cache;
  const Eigen::MatrixXd mean = model.actor.forward_batch(batch.states, grads ? &actor_cache : nullptr);
  const Eigen::MatrixXd value = model.critic.forward_batch(batch.states, grads ? &critic_cache : nullptr);
  const ActionVector inv_var = (-2.0 * model.log_std).array().exp();

  LossTerms out;
  Eigen::MatrixXd d_mean(kActionDim, n);
  ActionVector d_log_std = ActionVector::Zero();
  Eigen::MatrixXd d_value(1, n);
  int clipped = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const ActionVector diff = batch.samples.col(i) - mean.col(i);
    const double log_prob = gaussian_log_prob(batch.samples.col(i), mean.col(i), model.log_std);
    const double ratio = std::exp(log_prob - batch.old_log_prob[i]);
    const double adv = batch.advantages[i];
    const double surrogate = clipped_surrogate(ratio, adv, eps);
    out.policy -= surrogate * inv_n;
    if (std::abs(ratio - 1.0) > eps) ++clipped;
    // The unclipped term carries the gradient only when it is the minimum.
    const bool unclipped_active = ratio * adv <= std::clamp(ratio, 1.0 - eps, 1.0 + eps) * adv;
    const double d_logp = unclipped_active ? -ratio * adv * inv_n : 0.0;
    d_mean.col(i) = d_logp * diff.cwiseProduct(inv_var);
    d_log_std += d_logp * (diff.array().square() * inv_var.array() - 1.0).matrix();

    const double err = value(0, i) - batch.returns[i];
    out.critic += err * err * inv_n;
    d_value(0, i) = config.critic_coef * 2.0 * err * inv_n;
  }
  out.entropy = model.log_std.sum() + 0.5 * kActionDim * (1.0 + kLog2Pi);
  out.total = out.policy + config.critic_coef * out.critic - config.entropy_coef * out.entropy;
  out.clip_fraction = static_cast<double>(clipped) * inv_n;

  if (grads) {
    grads->actor = model.actor.zero_like();
    grads->critic = model.critic.zero_like();
    model.actor.backward(actor_cache, d_mean, grads->actor);
    model.critic.backward(critic_cache, d_value, grads->critic);
    grads->log_std = d_log_std - ActionVector::Constant(config.entropy_coef);
  }
  return out;
}

UpdateReport ppo_update(ActorCritic& model, OptimizerState& opt, const RolloutBuffer& buffer, const PpoConfig& config,
                        std::mt19937_64& rng) {
  const std::size_t n = buffer.size();
  if (n < static_cast<std::size_t>(config.batch_size)) throw UsageError("rollout buffer smaller than one batch");
  if (!opt.initialized) {
    opt.actor = model.actor.zero_like();
    opt.critic = model.critic.zero_like();
    opt.log_std.setZero();
    opt.initialized = true;
  }

  std::vector<double> adv = buffer.advantages(config.discount, config.gae_lambda);
  normalize(adv);
  const std::vector<double> ret = buffer.returns(config.discount);
  const auto& steps = buffer.steps();
  const int state_dim = model.state_dim();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  UpdateReport report;
  PpoGradients grads;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t begin = 0; begin < n; begin += config.minibatch_size) {
      const std::size_t end = std::min(n, begin + config.minibatch_size);
      const auto b = static_cast<Eigen::Index>(end - begin);
      Minibatch mb{Eigen::MatrixXd(state_dim, b), Eigen::MatrixXd(kActionDim, b), Eigen::VectorXd(b),
                   Eigen::VectorXd(b), Eigen::VectorXd(b)};
      for (Eigen::Index j = 0; j < b; ++j) {
        const auto& s = steps[order[begin + j]];
        mb.states.col(j) = s.state;
        mb.samples.col(j) = s.sample;
        mb.old_log_prob[j] = s.log_prob;
        mb.advantages[j] = adv[order[begin + j]];
        mb.returns[j] = ret[order[begin + j]];
      }
      const LossTerms loss = ppo_loss(model, mb, config, &grads);
      if (!std::isfinite(loss.total) || !std::isfinite(grads.actor.squared_norm()) ||
          !std::isfinite(grads.critic.squared_norm()) || !grads.log_std.allFinite()) {
        report.aborted = true;
        break;
      }
      clip_norm(grads.actor, &grads.log_std, config.max_grad_norm);
      clip_norm(grads.critic, nullptr, config.max_grad_norm);
      momentum_step(model.actor, opt.actor, grads.actor, config.lr_actor, config.momentum);
      momentum_step(model.critic, opt.critic, grads.critic, config.lr_critic, config.momentum);
      opt.log_std = config.momentum * opt.log_std + grads.log_std;
      model.log_std -= config.lr_actor * opt.log_std;
      model.log_std = model.log_std.cwiseMax(config.log_std_min).cwiseMin(config.log_std_max);

      report.policy_loss += loss.policy;
      report.critic_loss += loss.critic;
      report.clip_fraction += loss.clip_fraction;
      ++report.minibatches;
    }
    if (report.aborted) break;
  }
  if (report.minibatches > 0) {
    report.policy_loss /= report.minibatches;
    report.critic_loss /= report.minibatches;
    report.clip_fraction /= report.minibatches;
  }
  return report;
}

void save_model(const ActorCritic& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open model file for writing: " + path.string());
  out.write(kModelMagic, sizeof(kModelMagic));
  write_pod(out, kModelVersion);
  write_network(out, model.actor);
  write_network(out, model.critic);
  for (int i = 0; i < kActionDim; ++i) write_pod(out, model.log_std[i]);
  if (!out) throw Error("failed writing model file: " + path.string());
}

ActorCritic load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model file: " + path.string());
  char magic[sizeof(kModelMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kModelMagic, sizeof(magic)) != 0) throw Error("not a model file: " + path.string());
  if (read_pod<std::uint32_t>(in) != kModelVersion) throw Error("unsupported model file version");
  ActorCritic m;
  m.actor = read_network(in, OutputActivation::kTanh);
  m.critic = read_network(in, OutputActivation::kLinear);
  for (int i = 0; i < kActionDim; ++i) m.log_std[i] = read_pod<double>(in);
  if (m.actor.output_dim() != kActionDim || m.critic.output_dim() != 1 ||
      m.actor.input_dim() != m.critic.input_dim())
    throw Error("model file networks are inconsistent");
  return m;
}

}  // namespace tfta
