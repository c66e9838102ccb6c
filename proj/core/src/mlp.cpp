#include "neuralmodes/mlp.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "neuralmodes/errors.hpp"

namespace nmodes {

namespace {

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

template <class Derived>
auto gelu_array(const Eigen::ArrayBase<Derived>& x) {
  return 0.5 * x * (1.0 + (kGeluC * (x + kGeluA * x.cube())).tanh());
}

template <class Derived>
auto gelu_derivative_array(const Eigen::ArrayBase<Derived>& x) {
  const auto t = (kGeluC * (x + kGeluA * x.cube())).tanh();
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t.square()) * kGeluC * (1.0 + 3.0 * kGeluA * x.square());
}

void check_input(const MlpParams& p, Eigen::Index rows) {
  if (rows != p.input_dim())
    throw InputError("mlp: input has length " + std::to_string(rows) + ", expected " + std::to_string(p.input_dim()));
}

}  // namespace

double gelu(double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x))); }

double gelu_derivative(double x) {
  const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

long MlpParams::parameter_count(const std::vector<int>& widths) {
  long n = 0;
  for (size_t k = 0; k + 1 < widths.size(); ++k) n += long(widths[k] + 1) * widths[k + 1];
  return n;
}

long MlpParams::weight_offset(int layer) const {
  long off = 0;
  for (int k = 0; k < layer; ++k) off += long(widths[k] + 1) * widths[k + 1];
  return off;
}

Eigen::Map<const Eigen::MatrixXd> MlpParams::weight(int layer) const {
  return {theta.data() + weight_offset(layer), widths[layer + 1], widths[layer]};
}
Eigen::Map<Eigen::MatrixXd> MlpParams::weight(int layer) {
  return {theta.data() + weight_offset(layer), widths[layer + 1], widths[layer]};
}
Eigen::Map<const Eigen::VectorXd> MlpParams::bias(int layer) const {
  return {theta.data() + bias_offset(layer), widths[layer + 1]};
}
Eigen::Map<Eigen::VectorXd> MlpParams::bias(int layer) { return {theta.data() + bias_offset(layer), widths[layer + 1]}; }

void MlpParams::validate() const {
  if (widths.size() < 2) throw InputError("mlp: need at least input and output widths");
  for (int w : widths)
    if (w < 1) throw InputError("mlp: layer widths must be >= 1");
  if (theta.size() != parameter_count(widths))
    throw InputError("mlp: parameter vector has length " + std::to_string(theta.size()) + ", expected " +
                     std::to_string(parameter_count(widths)));
  if (!theta.allFinite()) throw NumericError("mlp: non-finite parameters");
}

MlpParams mlp_init(const std::vector<int>& widths, uint64_t seed) {
  MlpParams p;
  p.widths = widths;
  if (widths.size() < 2) throw InputError("mlp: need at least input and output widths");
  for (int w : widths)
    if (w < 1) throw InputError("mlp: layer widths must be >= 1");
  p.theta = Eigen::VectorXd::Zero(MlpParams::parameter_count(widths));
  std::mt19937_64 rng(seed);
  for (int k = 0; k + 1 < p.num_layers(); ++k) {
    const double bound = 1.0 / std::sqrt(double(widths[k]));
    std::uniform_real_distribution<double> u(-bound, bound);
    auto w = p.weight(k);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = u(rng);
    auto b = p.bias(k);
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = u(rng);
  }
  return p;
}

Eigen::MatrixXd mlp_forward_batch(const MlpParams& params, const Eigen::MatrixXd& inputs, MlpTape* tape) {
  check_input(params, inputs.rows());
  const int layers = params.num_layers();
  if (tape) {
    tape->inputs.assign(layers, {});
    tape->pre.assign(layers - 1, {});
  }
  Eigen::MatrixXd a = inputs;
  for (int k = 0; k < layers; ++k) {
    Eigen::MatrixXd z = params.weight(k) * a;
    z.colwise() += params.bias(k);
    if (tape) tape->inputs[k] = std::move(a);
    if (k + 1 < layers) {
      a = gelu_array(z.array()).matrix();
      if (tape) tape->pre[k] = std::move(z);
    } else {
      a = std::move(z);
    }
  }
  return a;
}

Eigen::VectorXd mlp_forward(const MlpParams& params, const Eigen::VectorXd& input) {
  return mlp_forward_batch(params, input);
}

Eigen::VectorXd mlp_pullback_batch(const MlpParams& params, const MlpTape& tape, const Eigen::MatrixXd& cotangents) {
  const int layers = params.num_layers();
  if (static_cast<int>(tape.inputs.size()) != layers) throw InputError("mlp: tape does not match the network");
  if (cotangents.rows() != params.output_dim() || cotangents.cols() != tape.inputs[0].cols())
    throw InputError("mlp: cotangent shape mismatch");
  if (!cotangents.allFinite()) throw NumericError("mlp: non-finite cotangent");
  Eigen::VectorXd grad(params.theta.size());
  Eigen::MatrixXd delta = cotangents;
  for (int k = layers - 1; k >= 0; --k) {
    Eigen::Map<Eigen::MatrixXd>(grad.data() + params.weight_offset(k), params.widths[k + 1], params.widths[k]) =
        delta * tape.inputs[k].transpose();
    Eigen::Map<Eigen::VectorXd>(grad.data() + params.bias_offset(k), params.widths[k + 1]) = delta.rowwise().sum();
    if (k > 0) {
      Eigen::MatrixXd back = params.weight(k).transpose() * delta;
      delta = (back.array() * gelu_derivative_array(tape.pre[k - 1].array())).matrix();
    }
  }
  return grad;
}

Eigen::VectorXd mlp_pullback(const MlpParams& params, const Eigen::VectorXd& input, const Eigen::VectorXd& cotangent) {
  MlpTape tape;
  mlp_forward_batch(params, input, &tape);
  return mlp_pullback_batch(params, tape, cotangent);
}

Eigen::VectorXd mlp_input_vjp(const MlpParams& params, const Eigen::VectorXd& input, const Eigen::VectorXd& cotangent) {
  if (cotangent.size() != params.output_dim()) throw InputError("mlp: cotangent shape mismatch");
  MlpTape tape;
  mlp_forward_batch(params, input, &tape);
  Eigen::VectorXd delta = cotangent;
  for (int k = params.num_layers() - 1; k >= 0; --k) {
    delta = params.weight(k).transpose() * delta;
    if (k > 0) delta = (delta.array() * gelu_derivative_array(tape.pre[k - 1].col(0).array())).matrix();
  }
  return delta;
}

Eigen::MatrixXd mlp_input_jacobian(const MlpParams& params, const Eigen::VectorXd& input) {
  MlpTape tape;
  mlp_forward_batch(params, input, &tape);
  Eigen::MatrixXd j = params.weight(0);
  for (int k = 1; k < params.num_layers(); ++k) {
    j = params.weight(k) * (gelu_derivative_array(tape.pre[k - 1].col(0).array()).matrix().asDiagonal() * j);
  }
  return j;
}

}  // namespace nmodes
