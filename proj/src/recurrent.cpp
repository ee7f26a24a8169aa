#include "nmf/recurrent.hpp"

#include <cmath>

#include "nmf/errors.hpp"
#include "nmf/ops.hpp"

namespace nmf {

Tensor uniform_parameter(Shape shape, double bound, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : t.mutable_data()) v = dist(rng);
  t.set_requires_grad(true);
  return t;
}

Tensor constant_parameter(Shape shape, double value) {
  Tensor t = Tensor::filled(std::move(shape), value);
  t.set_requires_grad(true);
  return t;
}

LstmParams LstmParams::init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
  LstmParams p = zeros(input_dim, hidden_dim);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  const Shape w{hidden_dim, input_dim + hidden_dim};
  p.w_input = uniform_parameter(w, bound, rng);
  p.w_forget = uniform_parameter(w, bound, rng);
  p.w_output = uniform_parameter(w, bound, rng);
  p.w_cell = uniform_parameter(w, bound, rng);
  p.b_forget = constant_parameter({hidden_dim}, 1.0);
  return p;
}

LstmParams LstmParams::zeros(std::size_t input_dim, std::size_t hidden_dim) {
  if (input_dim == 0 || hidden_dim == 0) throw ConfigError("LSTM dimensions must be positive");
  LstmParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  const Shape w{hidden_dim, input_dim + hidden_dim};
  p.w_input = constant_parameter(w, 0.0);
  p.w_forget = constant_parameter(w, 0.0);
  p.w_output = constant_parameter(w, 0.0);
  p.w_cell = constant_parameter(w, 0.0);
  p.b_input = constant_parameter({hidden_dim}, 0.0);
  p.b_forget = constant_parameter({hidden_dim}, 0.0);
  p.b_output = constant_parameter({hidden_dim}, 0.0);
  p.b_cell = constant_parameter({hidden_dim}, 0.0);
  return p;
}

void LstmParams::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".w_input", w_input});
  out.push_back({prefix + ".w_forget", w_forget});
  out.push_back({prefix + ".w_output", w_output});
  out.push_back({prefix + ".w_cell", w_cell});
  out.push_back({prefix + ".b_input", b_input});
  out.push_back({prefix + ".b_forget", b_forget});
  out.push_back({prefix + ".b_output", b_output});
  out.push_back({prefix + ".b_cell", b_cell});
}

LstmState LstmState::zeros(std::size_t hidden_dim) {
  return LstmState{Tensor::zeros({hidden_dim}), Tensor::zeros({hidden_dim})};
}

LstmState lstm_step(const LstmParams& params, const Tensor& x, const LstmState& state) {
  if (x.rank() != 1 || x.size() != params.input_dim) {
    throw DimensionError("lstm_step: input " + shape_string(x.shape()) + " does not match input_dim " +
                         std::to_string(params.input_dim));
  }
  if (state.h.size() != params.hidden_dim || state.c.size() != params.hidden_dim) {
    throw DimensionError("lstm_step: state " + shape_string(state.h.shape()) + "/" +
                         shape_string(state.c.shape()) + " does not match hidden_dim " +
                         std::to_string(params.hidden_dim));
  }
  const Tensor xh = concat_rows(x, state.h);
  const Tensor i = sigmoid(affine(params.w_input, xh, params.b_input));
  const Tensor f = sigmoid(affine(params.w_forget, xh, params.b_forget));
  const Tensor o = sigmoid(affine(params.w_output, xh, params.b_output));
  const Tensor g = tanh(affine(params.w_cell, xh, params.b_cell));
  Tensor c = add(mul(f, state.c), mul(i, g));
  Tensor h = mul(o, tanh(c));
  return LstmState{std::move(h), std::move(c)};
}

MlpParams MlpParams::init(std::size_t input_dim, std::size_t hidden_dim, std::size_t output_dim, Rng& rng) {
  MlpParams p = zeros(input_dim, hidden_dim, output_dim);
  p.w_hidden = uniform_parameter({hidden_dim, input_dim}, 1.0 / std::sqrt(static_cast<double>(input_dim)), rng);
  p.w_out = uniform_parameter({output_dim, hidden_dim}, 1.0 / std::sqrt(static_cast<double>(hidden_dim)), rng);
  return p;
}

MlpParams MlpParams::zeros(std::size_t input_dim, std::size_t hidden_dim, std::size_t output_dim) {
  if (input_dim == 0 || hidden_dim == 0 || output_dim == 0) throw ConfigError("MLP dimensions must be positive");
  MlpParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  p.output_dim = output_dim;
  p.w_hidden = constant_parameter({hidden_dim, input_dim}, 0.0);
  p.b_hidden = constant_parameter({hidden_dim}, 0.0);
  p.w_out = constant_parameter({output_dim, hidden_dim}, 0.0);
  p.b_out = constant_parameter({output_dim}, 0.0);
  return p;
}

void MlpParams::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".w_hidden", w_hidden});
  out.push_back({prefix + ".b_hidden", b_hidden});
  out.push_back({prefix + ".w_out", w_out});
  out.push_back({prefix + ".b_out", b_out});
}

Tensor mlp_forward(const MlpParams& params, const Tensor& x) {
  if (x.rank() != 1 || x.size() != params.input_dim) {
    throw DimensionError("mlp_forward: input " + shape_string(x.shape()) + " does not match input_dim " +
                         std::to_string(params.input_dim));
  }
  const Tensor hidden = tanh(affine(params.w_hidden, x, params.b_hidden));
  return affine(params.w_out, hidden, params.b_out);
}

DenseSoftmaxParams DenseSoftmaxParams::zeros(std::size_t input_dim, std::size_t num_classes) {
  if (input_dim == 0 || num_classes == 0) throw ConfigError("dense head dimensions must be positive");
  DenseSoftmaxParams p;
  p.input_dim = input_dim;
  p.num_classes = num_classes;
  p.weight = constant_parameter({num_classes, input_dim}, 0.0);
  p.bias = constant_parameter({num_classes}, 0.0);
  return p;
}

void DenseSoftmaxParams::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

Tensor dense_softmax(const DenseSoftmaxParams& params, const Tensor& x) {
  if (x.rank() != 1 || x.size() != params.input_dim) {
    throw DimensionError("dense_softmax: input " + shape_string(x.shape()) + " does not match input_dim " +
                         std::to_string(params.input_dim));
  }
  return softmax_row(affine(params.weight, x, params.bias));
}

}  // namespace nmf
