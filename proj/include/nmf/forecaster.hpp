#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nmf/memory.hpp"
#include "nmf/protocol.hpp"
#include "nmf/recurrent.hpp"
#include "nmf/synthdata.hpp"
#include "nmf/tensor.hpp"

namespace nmf {

// What the visual stream receives at prediction steps, where no frames exist.
enum class FutureVisualInput { zeros, learned_token };

/// Model variants. `full` is the dual-memory model; a-e are the ablations:
///   a  visual stream, encoder + decoder only
///   b  label stream, encoder + decoder only
///   c  a plus a visual memory
///   d  b plus a label memory
///   e  both streams concatenated into one shared memory
enum class Variant { a, b, c, d, e, full };

std::string to_string(Variant variant);
Variant parse_variant(std::string_view name);
std::string to_string(FutureVisualInput input);
FutureVisualInput parse_future_visual_input(std::string_view name);

struct ForecasterConfig {
  std::size_t num_classes = 0;
  std::size_t feature_dim = 0;
  std::size_t hidden_visual = 300;
  std::size_t hidden_label = 30;
  MemoryConfig mem_visual{24, 300};
  MemoryConfig mem_label{20, 30};
  std::size_t decoder_hidden = 300;
  bool persist_memory = false;
  FutureVisualInput future_visual_input = FutureVisualInput::zeros;

  void validate() const;
};

struct ForecasterParams {
  Variant variant = Variant::full;
  ForecasterConfig config;
  std::optional<LstmParams> encoder_visual;
  std::optional<LstmParams> encoder_label;
  std::optional<MemoryParams> memory_visual;
  std::optional<MemoryParams> memory_label;
  std::optional<MemoryParams> memory_joint;  // variant e only
  LstmParams decoder;
  DenseSoftmaxParams head;
  std::optional<Tensor> future_token;  // [feature_dim], learned_token mode only

  bool uses_visual() const { return encoder_visual.has_value(); }
  bool uses_label() const { return encoder_label.has_value(); }

  // Deterministic order; names are the checkpoint keys.
  std::vector<NamedTensor> named_parameters() const;
  std::size_t parameter_count() const;
  std::size_t memory_count() const;
};

/// Builds the dual-memory model. Deterministic given the seed.
ForecasterParams build(const ForecasterConfig& config, std::uint64_t seed);
ForecasterParams build_ablation(Variant variant, const ForecasterConfig& config, std::uint64_t seed);

struct ForecasterState {
  std::optional<LstmState> encoder_visual;
  std::optional<LstmState> encoder_label;
  std::optional<MemoryState> memory_visual;
  std::optional<MemoryState> memory_label;
  std::optional<MemoryState> memory_joint;
  LstmState decoder;
  std::size_t steps = 0;
};

// Slot contents carried between sequences when persist_memory is set.
// Controller states are never carried.
struct MemoryCarry {
  std::optional<Tensor> visual;
  std::optional<Tensor> label;
  std::optional<Tensor> joint;
};

ForecasterState initial_state(const ForecasterParams& params, const MemoryCarry* carry = nullptr);
// Detached copies of the state's slot matrices.
MemoryCarry carry_memory(const ForecasterState& state);

/// Runs both streams over the observed frames and advances every recurrent
/// state once per frame. features is [T x feature_dim], labels_onehot is
/// [T x num_classes].
ForecasterState observe(const ForecasterParams& params, const Tensor& features, const Tensor& labels_onehot,
                        ForecasterState state);

struct RolloutPolicy {
  enum class Mode { greedy, sampled };
  Mode mode = Mode::greedy;
  std::uint64_t seed = 0;
};

struct PredictStep {
  Tensor probs;  // gamma_t
  std::size_t chosen = 0;
  ForecasterState state;
};

/// One fused prediction step: the label stream sees prev_label_onehot, the
/// visual stream sees the future-input surrogate. `rng` is used by sampled
/// policies only and may be null for greedy ones.
PredictStep predict_step(const ForecasterParams& params, ForecasterState state, const Tensor& prev_label_onehot,
                         const RolloutPolicy& policy, Rng* rng = nullptr);

struct Rollout {
  std::vector<Tensor> probs;
  std::vector<std::size_t> classes;
  ForecasterState state;
};

// Feeds each chosen class back as the next step's label input.
Rollout rollout(const ForecasterParams& params, ForecasterState state, int first_prev_label, std::size_t horizon,
                const RolloutPolicy& policy);

struct SequenceLoss {
  Tensor loss;  // mean cross-entropy over the prediction window
  ForecasterState state;
};

/// Observes the window's prefix of `sample`, then scores every predicted
/// frame by cross-entropy. With teacher forcing the label stream receives
/// the true previous label; otherwise the model's own greedy choice.
SequenceLoss sequence_loss(const ForecasterParams& params, const Sample& sample, const Window& window,
                           bool teacher_forcing, ForecasterState state);

Tensor forward_loss(const ForecasterParams& params, const Sample& sample, double observed_fraction,
                    double predicted_fraction, bool teacher_forcing);

}  // namespace nmf
