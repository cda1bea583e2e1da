#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace tfta {

enum class OutputActivation { kTanh, kLinear };

/// Fully connected network with rectifier hidden layers. Samples are columns.
template <typename Scalar>
class Mlp {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  struct Cache {
    std::vector<Matrix> pre;   // pre-activations per layer
    std::vector<Matrix> post;  // post[0] is the input batch
  };

  /// Same shape as the parameters; also used for optimizer state.
  struct Gradients {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;

    Scalar squared_norm() const {
      Scalar s(0);
      for (const auto& w : weights) s += w.squaredNorm();
      for (const auto& b : biases) s += b.squaredNorm();
      return s;
    }
    void scale(Scalar k) {
      for (auto& w : weights) w *= k;
      for (auto& b : biases) b *= k;
    }
  };

  Mlp() = default;
  Mlp(std::vector<int> layer_dims, OutputActivation output) : dims_(std::move(layer_dims)), output_(output) {
    if (dims_.size() < 2) throw std::invalid_argument("Mlp needs at least input and output dims");
    for (int d : dims_)
      if (d <= 0) throw std::invalid_argument("Mlp layer dims must be positive");
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
      weights_.push_back(Matrix::Zero(dims_[l + 1], dims_[l]));
      biases_.push_back(Vector::Zero(dims_[l + 1]));
    }
  }

  /// He-uniform hidden layers; the last layer is scaled by `output_gain`.
  template <typename Rng>
  void initialize(Rng& rng, Scalar output_gain = Scalar(1)) {
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      const double bound = std::sqrt(6.0 / dims_[l]);
      std::uniform_real_distribution<double> dist(-bound, bound);
      const Scalar gain = (l + 1 == weights_.size()) ? output_gain : Scalar(1);
      for (Eigen::Index c = 0; c < weights_[l].cols(); ++c)
        for (Eigen::Index r = 0; r < weights_[l].rows(); ++r) weights_[l](r, c) = gain * Scalar(dist(rng));
      biases_[l].setZero();
    }
  }

  const std::vector<int>& dims() const { return dims_; }
  OutputActivation output_activation() const { return output_; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  std::size_t num_layers() const { return weights_.size(); }

  std::vector<Matrix>& weights() { return weights_; }
  const std::vector<Matrix>& weights() const { return weights_; }
  std::vector<Vector>& biases() { return biases_; }
  const std::vector<Vector>& biases() const { return biases_; }

  Gradients zero_like() const {
    Gradients g;
    for (const auto& w : weights_) g.weights.push_back(Matrix::Zero(w.rows(), w.cols()));
    for (const auto& b : biases_) g.biases.push_back(Vector::Zero(b.size()));
    return g;
  }

  Matrix forward_batch(const Matrix& x, Cache* cache = nullptr) const {
    if (x.rows() != dims_.front()) throw std::invalid_argument("Mlp input dimension mismatch");
    if (cache) {
      cache->pre.clear();
      cache->post.clear();
      cache->post.push_back(x);
    }
    Matrix a = x;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      Matrix z = weights_[l] * a;
      z.colwise() += biases_[l];
      const bool last = l + 1 == weights_.size();
      if (!last) {
        a = z.cwiseMax(Scalar(0));
      } else if (output_ == OutputActivation::kTanh) {
        a = z.array().tanh().matrix();
      } else {
        a = z;
      }
      if (cache) {
        cache->pre.push_back(std::move(z));
        cache->post.push_back(a);
      }
    }
    return a;
  }

  Vector forward(const Vector& x) const { return forward_batch(Matrix(x)).col(0); }

  /// Accumulates dLoss/dparams given dLoss/d(output) for the cached batch.
  void backward(const Cache& cache, const Matrix& d_output, Gradients& grads) const {
    const std::size_t n = weights_.size();
    Matrix delta;
    if (output_ == OutputActivation::kTanh) {
      delta = (d_output.array() * (Scalar(1) - cache.post[n].array().square())).matrix();
    } else {
      delta = d_output;
    }
    for (std::size_t l = n; l-- > 0;) {
      grads.weights[l] += delta * cache.post[l].transpose();
      grads.biases[l] += delta.rowwise().sum();
      if (l == 0) break;
      Matrix back = weights_[l].transpose() * delta;
      delta = (back.array() * (cache.pre[l - 1].array() > Scalar(0)).template cast<Scalar>()).matrix();
    }
  }

  bool all_finite() const {
    for (const auto& w : weights_)
      if (!w.allFinite()) return false;
    for (const auto& b : biases_)
      if (!b.allFinite()) return false;
    return true;
  }

  bool operator==(const Mlp& other) const {
    if (dims_ != other.dims_ || output_ != other.output_) return false;
    for (std::size_t l = 0; l < weights_.size(); ++l)
      if (weights_[l] != other.weights_[l] || biases_[l] != other.biases_[l]) return false;
    return true;
  }

 private:
  std::vector<int> dims_;
  OutputActivation output_ = OutputActivation::kLinear;
  std::vector<Matrix> weights_;
  std::vector<Vector> biases_;
};

}  // namespace tfta
