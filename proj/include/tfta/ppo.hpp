#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "tfta/flowfield.hpp"
#include "tfta/mlp.hpp"

namespace tfta {

inline constexpr int kActionDim = 4;
using ActionVector = Eigen::Matrix<double, kActionDim, 1>;
using Network = Mlp<double>;

struct PolicyOutput {
  ActionVector mean = ActionVector::Zero();  // inside (-1, 1)
  ActionVector log_std = ActionVector::Constant(-0.5);
  double value = 0.0;
};

struct PpoConfig {
  double clip_epsilon = 0.2;
  double discount = 0.98;
  double lr_actor = 1e-3;
  double lr_critic = 1e-3;
  int batch_size = 512;     // rollout steps collected per update
  int minibatch_size = 64;  // SGD step size within an update
  int epochs = 10;
  double gae_lambda = 0.95;
  double momentum = 0.9;
  double max_grad_norm = 0.5;
  double entropy_coef = 0.0;  // off unless set
  double critic_coef = 1.0;
  int hidden_width = 128;
  int hidden_layers = 4;
  double log_std_init = -0.5;
  double log_std_min = -4.0;
  double log_std_max = 1.0;

  bool operator==(const PpoConfig&) const = default;
};

/// Throws ConfigError when a field is out of range.
void validate(const PpoConfig& config);

/// Actor (tanh output, one unit per action) and critic (linear scalar output)
/// plus the state-independent log standard deviation.
struct ActorCritic {
  Network actor;
  Network critic;
  ActionVector log_std = ActionVector::Constant(-0.5);

  int state_dim() const { return actor.input_dim(); }
  bool operator==(const ActorCritic&) const = default;
};

/// Builds both networks with `hidden_layers` rectifier layers of `hidden_width`.
ActorCritic make_actor_critic(int state_dim, const PpoConfig& config, std::mt19937_64& rng);

ActionVector actor_forward(const Network& actor, const Eigen::VectorXd& state);
double critic_forward(const Network& critic, const Eigen::VectorXd& state);
PolicyOutput evaluate_policy(const ActorCritic& model, const Eigen::VectorXd& state);

/// Affine map from (-1, 1)^4 to the field action box; theta spans (-pi, pi).
FieldAction squash_action(const ActionVector& raw);
ActionVector unsquash_action(const FieldAction& action);

struct SampledAction {
  ActionVector raw;     // clamped into (-1 + 1e-6, 1 - 1e-6)
  ActionVector sample;  // unclamped Gaussian draw
  double log_prob = 0.0;
};

double gaussian_log_prob(const ActionVector& x, const ActionVector& mean, const ActionVector& log_std);
SampledAction sample_action(const PolicyOutput& output, std::mt19937_64& rng);

/// G_t = r_t + discount * G_{t+1}, seeded with final_value.
std::vector<double> compute_returns(std::span<const double> rewards, double final_value, double discount);

/// Generalized advantage estimation. done[t] marks the last step of an
/// episode; last_value bootstraps a trailing unfinished episode. Not normalized.
std::vector<double> compute_advantages(std::span<const double> rewards, std::span<const double> values,
                                       std::span<const bool> dones, double discount, double gae_lambda,
                                       double last_value = 0.0);

/// Shifts and scales to zero mean and unit variance (left centered when the
/// variance vanishes).
void normalize(std::vector<double>& values);

class RolloutBuffer {
 public:
  struct Step {
    Eigen::VectorXd state;
    ActionVector sample;
    double log_prob = 0.0;
    double reward = 0.0;
    double value = 0.0;
    bool done = false;
  };

  void add(Step step) { steps_.push_back(std::move(step)); }
  /// Bootstrap value for a trailing episode that has not terminated.
  void set_last_value(double v) { last_value_ = v; }
  void append(const RolloutBuffer& other);
  void clear();

  std::size_t size() const { return steps_.size(); }
  const std::vector<Step>& steps() const { return steps_; }
  double last_value() const { return last_value_; }

  /// Per-step discounted returns, episode by episode.
  std::vector<double> returns(double discount) const;
  std::vector<double> advantages(double discount, double gae_lambda) const;

 private:
  std::vector<Step> steps_;
  double last_value_ = 0.0;
};

struct Minibatch {
  Eigen::MatrixXd states;   // state_dim x B
  Eigen::MatrixXd samples;  // 4 x B
  Eigen::VectorXd old_log_prob;
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;
};

struct PpoGradients {
  Network::Gradients actor;
  Network::Gradients critic;
  ActionVector log_std = ActionVector::Zero();
};

struct LossTerms {
  double policy = 0.0;  // negated clipped surrogate
  double critic = 0.0;  // mean squared error
  double entropy = 0.0;
  double total = 0.0;
  double clip_fraction = 0.0;
};

/// Full loss policy + critic_coef * critic - entropy_coef * entropy over the
/// batch, with exact gradients when `grads` is given.
LossTerms ppo_loss(const ActorCritic& model, const Minibatch& batch, const PpoConfig& config,
                   PpoGradients* grads = nullptr);

/// Per-sample clipped surrogate min(r A, clip(r, 1-eps, 1+eps) A).
double clipped_surrogate(double ratio, double advantage, double epsilon);

struct UpdateReport {
  double policy_loss = 0.0;
  double critic_loss = 0.0;
  double clip_fraction = 0.0;
  int minibatches = 0;
  bool aborted = false;
};

/// Momentum state for SGD, shaped like the model.
struct OptimizerState {
  Network::Gradients actor;
  Network::Gradients critic;
  ActionVector log_std = ActionVector::Zero();
  bool initialized = false;
};

/// K epochs of shuffled minibatch SGD on the clipped surrogate and the critic
/// MSE. A non-finite loss stops the update before that step is applied.
UpdateReport ppo_update(ActorCritic& model, OptimizerState& optimizer, const RolloutBuffer& buffer,
                        const PpoConfig& config, std::mt19937_64& rng);

void save_model(const ActorCritic& model, const std::filesystem::path& path);
ActorCritic load_model(const std::filesystem::path& path);

}  // namespace tfta
