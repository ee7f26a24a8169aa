#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "nmf/tensor.hpp"

namespace nmf {

using Rng = std::mt19937_64;

// Uniform [-bound, bound] leaf tensor that requires a gradient.
Tensor uniform_parameter(Shape shape, double bound, Rng& rng);
Tensor constant_parameter(Shape shape, double value);

/// Standard LSTM cell without peepholes. Each gate owns a
/// [hidden_dim x (input_dim + hidden_dim)] weight acting on [x; h].
struct LstmParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Tensor w_input, w_forget, w_output, w_cell;
  Tensor b_input, b_forget, b_output, b_cell;

  // Weights in [-1/sqrt(hidden), 1/sqrt(hidden)], forget bias 1, other biases 0.
  static LstmParams init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng);
  static LstmParams zeros(std::size_t input_dim, std::size_t hidden_dim);

  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

struct LstmState {
  Tensor h;
  Tensor c;

  static LstmState zeros(std::size_t hidden_dim);
};

LstmState lstm_step(const LstmParams& params, const Tensor& x, const LstmState& state);

/// affine -> tanh -> affine
struct MlpParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t output_dim = 0;
  Tensor w_hidden, b_hidden, w_out, b_out;

  static MlpParams init(std::size_t input_dim, std::size_t hidden_dim, std::size_t output_dim, Rng& rng);
  static MlpParams zeros(std::size_t input_dim, std::size_t hidden_dim, std::size_t output_dim);

  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

Tensor mlp_forward(const MlpParams& params, const Tensor& x);

struct DenseSoftmaxParams {
  std::size_t input_dim = 0;
  std::size_t num_classes = 0;
  Tensor weight;  // [num_classes x input_dim]
  Tensor bias;

  // Zero weight and bias: a fresh head predicts the uniform distribution.
  static DenseSoftmaxParams zeros(std::size_t input_dim, std::size_t num_classes);

  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

Tensor dense_softmax(const DenseSoftmaxParams& params, const Tensor& x);

}  // namespace nmf
