#include "tacnet/nn.hpp"

#include <cmath>

#include "tacnet/sim.hpp"

namespace tacnet {

Mlp::Mlp(std::vector<int> sizes, bool tanh_output) : sizes_(std::move(sizes)), tanh_output_(tanh_output) {
  if (sizes_.size() < 2) throw Error("mlp: need at least input and output sizes");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] <= 0 || sizes_[l + 1] <= 0) throw Error("mlp: layer sizes must be positive");
    offsets_.push_back(total);
    total += static_cast<std::size_t>(sizes_[l + 1]) * static_cast<std::size_t>(sizes_[l] + 1);
  }
  params_ = Vector::Zero(static_cast<Eigen::Index>(total));
}

void Mlp::init(Rng& rng) {
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    const std::size_t n = static_cast<std::size_t>(out) * static_cast<std::size_t>(in + 1);
    for (std::size_t i = 0; i < n; ++i) params_[static_cast<Eigen::Index>(offsets_[l] + i)] = rng.uniform(-bound, bound);
  }
}

namespace {

using ConstMap = Eigen::Map<const Matrix>;
using ConstVecMap = Eigen::Map<const Vector>;

}  // namespace

Matrix Mlp::predict(const Matrix& x) const {
  if (x.rows() != sizes_.front()) throw Error("mlp: input dimension mismatch");
  Matrix h = x;
  const std::size_t layers = sizes_.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    ConstMap w(params_.data() + offsets_[l], out, in);
    ConstVecMap b(params_.data() + offsets_[l] + static_cast<std::size_t>(out) * in, out);
    Matrix z = w * h;
    z.colwise() += b;
    if (l + 1 < layers) {
      h = z.cwiseMax(0.0);
    } else {
      h = tanh_output_ ? Matrix(z.array().tanh()) : z;
    }
  }
  return h;
}

const Matrix& Mlp::forward(const Matrix& x) {
  if (x.rows() != sizes_.front()) throw Error("mlp: input dimension mismatch");
  const std::size_t layers = sizes_.size() - 1;
  acts_.resize(layers + 1);
  acts_[0] = x;
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    ConstMap w(params_.data() + offsets_[l], out, in);
    ConstVecMap b(params_.data() + offsets_[l] + static_cast<std::size_t>(out) * in, out);
    Matrix z = w * acts_[l];
    z.colwise() += b;
    if (l + 1 < layers) {
      acts_[l + 1] = z.cwiseMax(0.0);
    } else {
      acts_[l + 1] = tanh_output_ ? Matrix(z.array().tanh()) : z;
    }
  }
  return acts_.back();
}

Matrix Mlp::backward(const Matrix& dy, Vector& grad, bool input_grad) const {
  const std::size_t layers = sizes_.size() - 1;
  if (acts_.size() != layers + 1) throw Error("mlp: backward without forward");
  if (dy.rows() != sizes_.back() || dy.cols() != acts_.back().cols()) throw Error("mlp: gradient shape mismatch");
  grad.setZero(params_.size());
  Matrix delta = dy;
  if (tanh_output_) delta = delta.array() * (1.0 - acts_.back().array().square());
  for (std::size_t l = layers; l-- > 0;) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    Eigen::Map<Matrix> gw(grad.data() + offsets_[l], out, in);
    Eigen::Map<Vector> gb(grad.data() + offsets_[l] + static_cast<std::size_t>(out) * in, out);
    gw.noalias() = delta * acts_[l].transpose();
    gb = delta.rowwise().sum();
    if (l == 0 && !input_grad) return {};
    ConstMap w(params_.data() + offsets_[l], out, in);
    Matrix prev = w.transpose() * delta;
    if (l > 0) prev = prev.array() * (acts_[l].array() > 0.0).cast<double>();
    delta = std::move(prev);
  }
  return delta;
}

void Mlp::soft_update(const Mlp& other, double tau) {
  if (other.params_.size() != params_.size()) throw Error("mlp: soft update shape mismatch");
  if (tau == 1.0) {
    params_ = other.params_;
  } else {
    params_ = tau * other.params_ + (1.0 - tau) * params_;
  }
}

Adam::Adam(std::size_t n, double lr, double beta1, double beta2, double eps)
    : lr_(lr),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps),
      m_(Vector::Zero(static_cast<Eigen::Index>(n))),
      v_(Vector::Zero(static_cast<Eigen::Index>(n))) {}

void Adam::step(Vector& params, const Vector& grad) {
  if (lr_ == 0.0) return;
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

}  // namespace tacnet
