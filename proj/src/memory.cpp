#include "nmf/memory.hpp"

#include <cmath>

#include "nmf/errors.hpp"
#include "nmf/ops.hpp"

namespace nmf {

void MemoryConfig::validate(const std::string& what) const {
  if (slots < 1 || slot_dim < 1) {
    throw ConfigError(what + ": memory needs at least one slot of positive dimension, got l=" +
                      std::to_string(slots) + " k=" + std::to_string(slot_dim));
  }
}

MemoryParams MemoryParams::init(const MemoryConfig& config, std::size_t input_dim, Rng& rng) {
  config.validate("memory");
  if (input_dim == 0) throw ConfigError("memory input dimension must be positive");
  MemoryParams p;
  p.config = config;
  p.input_dim = input_dim;
  p.read_cell = LstmParams::init(input_dim, config.slot_dim, rng);
  p.write_cell = LstmParams::init(config.slot_dim, config.slot_dim, rng);
  p.output_mlp = MlpParams::init(input_dim + config.slot_dim, config.slot_dim, config.slot_dim, rng);
  return p;
}

void MemoryParams::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  read_cell.collect(prefix + ".read", out);
  write_cell.collect(prefix + ".write", out);
  output_mlp.collect(prefix + ".output", out);
}

MemoryState MemoryState::fresh(const MemoryConfig& config) {
  config.validate("memory");
  return MemoryState{Tensor::zeros({config.slots, config.slot_dim}), LstmState::zeros(config.slot_dim),
                     LstmState::zeros(config.slot_dim)};
}

Tensor attend(const Tensor& query, const Tensor& slots) {
  if (slots.rank() != 2 || query.rank() != 1 || query.size() != slots.cols()) {
    throw DimensionError("attend: query " + shape_string(query.shape()) + " does not match slots " +
                         shape_string(slots.shape()));
  }
  return softmax_row(matvec(slots, query));
}

std::pair<ReadResult, LstmState> read_step(const MemoryParams& params, const Tensor& h, const MemoryState& state) {
  if (h.rank() != 1 || h.size() != params.input_dim) {
    throw DimensionError("read_step: hidden state " + shape_string(h.shape()) + " does not match input_dim " +
                         std::to_string(params.input_dim));
  }
  LstmState controller = lstm_step(params.read_cell, h, state.read_controller);
  ReadResult r;
  r.q = controller.h;
  r.z = attend(r.q, state.slots);
  r.m = vecmat(r.z, state.slots);
  r.c = mlp_forward(params.output_mlp, concat_rows(h, r.m));
  return {std::move(r), std::move(controller)};
}

MemoryState write_step(const MemoryParams& params, const Tensor& c, const Tensor& z, const MemoryState& state) {
  if (z.rank() != 1 || z.size() != state.slots.rows()) {
    throw DimensionError("write_step: scores " + shape_string(z.shape()) + " do not match slots " +
                         shape_string(state.slots.shape()));
  }
  double total = 0.0;
  for (double v : z.data()) total += v;
  if (!(std::abs(total - 1.0) <= 1e-6)) {
    throw ContractError("write_step: attention scores sum to " + std::to_string(total) + ", expected 1");
  }
  MemoryState next;
  next.read_controller = state.read_controller;
  next.write_controller = lstm_step(params.write_cell, c, state.write_controller);
  next.slots = slot_blend(state.slots, z, next.write_controller.h);
  return next;
}

std::pair<Tensor, MemoryState> memory_step(const MemoryParams& params, const Tensor& h, const MemoryState& state) {
  auto [read, read_controller] = read_step(params, h, state);
  MemoryState advanced = state;
  advanced.read_controller = std::move(read_controller);
  MemoryState next = write_step(params, read.c, read.z, advanced);
  return {std::move(read.c), std::move(next)};
}

}  // namespace nmf
