#include "weavesim/net.hpp"

#include <cmath>
#include <stdexcept>

namespace weavesim {

Mlp::Mlp(const std::vector<int>& dims) : dims_(dims) {
  if (dims.size() < 2) throw std::invalid_argument("Mlp: need >= 2 dims");
  for (size_t i = 0; i + 1 < dims.size(); ++i) {
    w_.emplace_back(Eigen::MatrixXd::Zero(dims[i + 1], dims[i]));
    b_.emplace_back(Eigen::VectorXd::Zero(dims[i + 1]));
    n_params_ += dims[i + 1] * dims[i] + dims[i + 1];
  }
}

void Mlp::init_random(RngStream& rng) {
  for (auto& w : w_) {
    const double s = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        w(r, c) = rng.uniform(-s, s);
      }
    }
  }
  for (auto& b : b_) b.setZero();
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd h = x;
  for (size_t i = 0; i < w_.size(); ++i) {
    h = (w_[i] * h).colwise() + b_[i];
    if (i + 1 < w_.size()) h = h.array().tanh();
  }
  return h;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, Trace& trace) const {
  trace.input = x;
  trace.post.clear();
  trace.post.reserve(w_.size());
  Eigen::MatrixXd h = x;
  for (size_t i = 0; i < w_.size(); ++i) {
    h = (w_[i] * h).colwise() + b_[i];
    if (i + 1 < w_.size()) h = h.array().tanh();
    trace.post.push_back(h);
  }
  return h;
}

Eigen::MatrixXd Mlp::backward(const Trace& trace, const Eigen::MatrixXd& dy,
                              Eigen::VectorXd& grad) const {
  if (grad.size() != n_params_) {
    throw std::invalid_argument("Mlp::backward: gradient buffer size mismatch");
  }
  Eigen::MatrixXd delta = dy;
  // Offsets of each layer's block in the flat parameter vector.
  std::vector<int> offsets(w_.size());
  int off = 0;
  for (size_t i = 0; i < w_.size(); ++i) {
    offsets[i] = off;
    off += static_cast<int>(w_[i].size() + b_[i].size());
  }
  for (int i = static_cast<int>(w_.size()) - 1; i >= 0; --i) {
    if (i + 1 < static_cast<int>(w_.size())) {
      // Undo tanh of layer i output.
      delta = delta.array() * (1.0 - trace.post[i].array().square());
    }
    const Eigen::MatrixXd& prev =
        (i == 0) ? trace.input : trace.post[i - 1];
    Eigen::MatrixXd dw = delta * prev.transpose();
    Eigen::VectorXd db = delta.rowwise().sum();
    Eigen::Map<Eigen::MatrixXd>(grad.data() + offsets[i], dw.rows(), dw.cols()) += dw;
    grad.segment(offsets[i] + dw.size(), db.size()) += db;
    if (i > 0) delta = w_[i].transpose() * delta;
  }
  return w_[0].transpose() * delta;
}

Eigen::VectorXd Mlp::params() const {
  Eigen::VectorXd p(n_params_);
  int off = 0;
  for (size_t i = 0; i < w_.size(); ++i) {
    Eigen::Map<Eigen::MatrixXd>(p.data() + off, w_[i].rows(), w_[i].cols()) = w_[i];
    off += static_cast<int>(w_[i].size());
    p.segment(off, b_[i].size()) = b_[i];
    off += static_cast<int>(b_[i].size());
  }
  return p;
}

void Mlp::set_params(const Eigen::VectorXd& p) {
  if (p.size() != n_params_) {
    throw std::invalid_argument("Mlp::set_params: size mismatch");
  }
  int off = 0;
  for (size_t i = 0; i < w_.size(); ++i) {
    w_[i] = Eigen::Map<const Eigen::MatrixXd>(p.data() + off, w_[i].rows(), w_[i].cols());
    off += static_cast<int>(w_[i].size());
    b_[i] = p.segment(off, b_[i].size());
    off += static_cast<int>(b_[i].size());
  }
}

void Mlp::set_output_layer_bias(const Eigen::VectorXd& bias) {
  if (bias.size() != b_.back().size()) {
    throw std::invalid_argument("set_output_layer_bias: size mismatch");
  }
  w_.back().setZero();
  b_.back() = bias;
}

Eigen::VectorXd Adam::step(const Eigen::VectorXd& grad) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_.array().matrix() + (1.0 - beta2_) * grad.cwiseAbs2();
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  Eigen::VectorXd m_hat = m_ / bc1;
  Eigen::VectorXd v_hat = v_ / bc2;
  return (-lr_) * m_hat.array().matrix().cwiseQuotient(
      (v_hat.array().sqrt() + eps_).matrix());
}

}  // namespace weavesim
