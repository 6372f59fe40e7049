#pragma once

#include <Eigen/Core>
#include <vector>

#include "weavesim/rng.hpp"

namespace weavesim {

// Small dense feedforward network with tanh hidden activations and a linear
// output layer. Parameters are exposed as one flat vector (layer by layer,
// W column-major then b) so optimizers and finite-difference checks can stay
// agnostic of the layer structure. Forward/backward operate on column-batched
// matrices.
class Mlp {
 public:
  Mlp() = default;
  // dims = {input, hidden..., output}; weights start at zero.
  explicit Mlp(const std::vector<int>& dims);

  // He-style uniform init: W_ij ~ U(-s, s) with s = sqrt(6 / (fan_in+fan_out)),
  // biases zero. Deterministic given the stream.
  void init_random(RngStream& rng);

  int input_dim() const { return dims_.empty() ? 0 : dims_.front(); }
  int output_dim() const { return dims_.empty() ? 0 : dims_.back(); }
  bool empty() const { return dims_.empty(); }
  const std::vector<int>& dims() const { return dims_; }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;

  struct Trace {
    Eigen::MatrixXd input;
    std::vector<Eigen::MatrixXd> post;  // activations after each layer
  };
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Trace& trace) const;

  // Backpropagates dL/dy (same shape as the forward output), accumulating
  // the flat parameter gradient into `grad` (must be param_count() long) and
  // returning dL/dx.
  Eigen::MatrixXd backward(const Trace& trace, const Eigen::MatrixXd& dy,
                           Eigen::VectorXd& grad) const;

  int param_count() const { return n_params_; }
  Eigen::VectorXd params() const;
  void set_params(const Eigen::VectorXd& p);

  // Pins the output layer to a constant map: W_last = 0, b_last = bias.
  void set_output_layer_bias(const Eigen::VectorXd& bias);

 private:
  std::vector<int> dims_;
  std::vector<Eigen::MatrixXd> w_;
  std::vector<Eigen::VectorXd> b_;
  int n_params_ = 0;
};

// Adam over a flat parameter vector.
class Adam {
 public:
  Adam() = default;
  Adam(int n, double lr) : lr_(lr), m_(Eigen::VectorXd::Zero(n)), v_(Eigen::VectorXd::Zero(n)) {}

  // Returns the update to add to the parameters for gradient-descent on
  // `grad` (flip the gradient sign beforehand for ascent).
  Eigen::VectorXd step(const Eigen::VectorXd& grad);

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }

 private:
  double lr_ = 1e-3;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  int t_ = 0;
  Eigen::VectorXd m_, v_;
};

}  // namespace weavesim
