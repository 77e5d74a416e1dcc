#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "tacnet/rng.hpp"

namespace tacnet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Fully connected network with rectifier hidden layers and an optional
/// tanh output head. All weights and biases live in one flat vector so
/// optimizers, soft updates and checkpoints treat them uniformly. Inputs
/// and outputs are column-major batches: one column per sample.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<int> sizes, bool tanh_output);

  void init(Rng& rng);

  const std::vector<int>& sizes() const { return sizes_; }
  bool tanh_output() const { return tanh_output_; }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }

  Vector& params() { return params_; }
  const Vector& params() const { return params_; }

  /// Pure evaluation, no cached activations.
  Matrix predict(const Matrix& x) const;
  /// Evaluation that keeps activations for a following backward().
  const Matrix& forward(const Matrix& x);
  /// Gradient of sum(dy .* y) w.r.t. the parameters (written to `grad`)
  /// and w.r.t. the last forward input (returned, empty unless requested).
  Matrix backward(const Matrix& dy, Vector& grad, bool input_grad = true) const;

  /// params = tau * other + (1 - tau) * params
  void soft_update(const Mlp& other, double tau);

  bool operator==(const Mlp& o) const {
    return sizes_ == o.sizes_ && tanh_output_ == o.tanh_output_ && params_.size() == o.params_.size() &&
           params_ == o.params_;
  }

 private:
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }

  std::vector<int> sizes_;
  bool tanh_output_ = false;
  Vector params_;
  std::vector<std::size_t> offsets_;  // start of layer l: weights (out x in), then bias (out)
  std::vector<Matrix> acts_;          // acts_[0] input, acts_[l] post-activation of layer l
};

class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(Vector& params, const Vector& grad);
  double lr() const { return lr_; }

 private:
  double lr_ = 1e-3;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  std::int64_t t_ = 0;
  Vector m_;
  Vector v_;
};

}  // namespace tacnet
