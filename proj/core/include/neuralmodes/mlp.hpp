#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace nmodes {

/// Fully connected network, GELU on hidden layers, identity on the output.
/// Parameters live in one flat vector; layer k stores its weight matrix
/// (out x in, column-major) followed by its bias.
struct MlpParams {
  std::vector<int> widths;
  Eigen::VectorXd theta;

  static long parameter_count(const std::vector<int>& widths);

  int num_layers() const { return static_cast<int>(widths.size()) - 1; }
  int input_dim() const { return widths.front(); }
  int output_dim() const { return widths.back(); }
  long weight_offset(int layer) const;
  long bias_offset(int layer) const { return weight_offset(layer) + long(widths[layer]) * widths[layer + 1]; }

  Eigen::Map<const Eigen::MatrixXd> weight(int layer) const;
  Eigen::Map<Eigen::MatrixXd> weight(int layer);
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const;
  Eigen::Map<Eigen::VectorXd> bias(int layer);

  void validate() const;
};

/// Hidden layers drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights
/// and biases; the final layer is zero so the network output is exactly zero.
MlpParams mlp_init(const std::vector<int>& widths, uint64_t seed);

/// GELU, tanh form: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
double gelu(double x);
double gelu_derivative(double x);

/// Activations kept by a batched forward pass for the backward pass.
struct MlpTape {
  std::vector<Eigen::MatrixXd> inputs;  // input to layer k, one column per sample
  std::vector<Eigen::MatrixXd> pre;     // pre-activation of hidden layer k
};

Eigen::VectorXd mlp_forward(const MlpParams& params, const Eigen::VectorXd& input);
/// One column per sample. Pass a tape to enable mlp_pullback_batch.
Eigen::MatrixXd mlp_forward_batch(const MlpParams& params, const Eigen::MatrixXd& inputs, MlpTape* tape = nullptr);

/// Gradient over theta of sum_b cotangent_b . y(input_b).
Eigen::VectorXd mlp_pullback_batch(const MlpParams& params, const MlpTape& tape, const Eigen::MatrixXd& cotangents);
Eigen::VectorXd mlp_pullback(const MlpParams& params, const Eigen::VectorXd& input, const Eigen::VectorXd& cotangent);

/// Gradient over the input of cotangent . y(input).
Eigen::VectorXd mlp_input_vjp(const MlpParams& params, const Eigen::VectorXd& input, const Eigen::VectorXd& cotangent);
/// Output Jacobian d y / d input (output_dim x input_dim).
Eigen::MatrixXd mlp_input_jacobian(const MlpParams& params, const Eigen::VectorXd& input);

}  // namespace nmodes
