#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "nmf/recurrent.hpp"
#include "nmf/tensor.hpp"

namespace nmf {

struct MemoryConfig {
  std::size_t slots = 0;     // l
  std::size_t slot_dim = 0;  // k

  void validate(const std::string& what) const;
};

/// Controllers and output composition of one external memory.
/// The read cell maps the stream's hidden state to a length-k query, the MLP
/// composes [h; m] into the memory output, and the write cell turns that
/// output into the vector blended into the slots.
struct MemoryParams {
  MemoryConfig config;
  std::size_t input_dim = 0;
  LstmParams read_cell;   // input_dim -> k
  LstmParams write_cell;  // k -> k
  MlpParams output_mlp;   // input_dim + k -> k -> k

  static MemoryParams init(const MemoryConfig& config, std::size_t input_dim, Rng& rng);
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

struct MemoryState {
  Tensor slots;  // [l x k]
  LstmState read_controller;
  LstmState write_controller;

  // All-zero slots and controller states.
  static MemoryState fresh(const MemoryConfig& config);
};

struct ReadResult {
  Tensor c;  // memory output, [k]
  Tensor z;  // attention over slots, [l]
  Tensor m;  // attention-weighted slot content, [k]
  Tensor q;  // query, [k]
};

// softmax over the slot scores q . M[i, :]
Tensor attend(const Tensor& query, const Tensor& slots);

// Reads against the current slots; the slots themselves are left untouched.
std::pair<ReadResult, LstmState> read_step(const MemoryParams& params, const Tensor& h, const MemoryState& state);

// Advances the write controller on c and blends its output into every slot
// in proportion to z. Throws ContractError if z does not sum to 1 within 1e-6.
MemoryState write_step(const MemoryParams& params, const Tensor& c, const Tensor& z, const MemoryState& state);

// One full read-then-write interaction. Returns the memory output c.
std::pair<Tensor, MemoryState> memory_step(const MemoryParams& params, const Tensor& h, const MemoryState& state);

}  // namespace nmf
