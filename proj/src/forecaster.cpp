#include "nmf/forecaster.hpp"

#include <cmath>

#include "nmf/errors.hpp"
#include "nmf/ops.hpp"

namespace nmf {

namespace {

Tensor row_of(const Tensor& matrix, std::size_t r) {
  const std::size_t cols = matrix.cols();
  const auto begin = matrix.data().begin() + static_cast<std::ptrdiff_t>(r * cols);
  return Tensor::from({cols}, std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(cols)));
}

Tensor detached(const Tensor& t) {
  return Tensor::from(t.shape(), std::vector<double>(t.data().begin(), t.data().end()));
}

bool has_visual(Variant v) { return v == Variant::a || v == Variant::c || v == Variant::e || v == Variant::full; }
bool has_label(Variant v) { return v == Variant::b || v == Variant::d || v == Variant::e || v == Variant::full; }

MemoryState fresh_or_carried(const MemoryParams& params, const std::optional<Tensor>& carried) {
  MemoryState state = MemoryState::fresh(params.config);
  if (carried) {
    if (carried->shape() != state.slots.shape()) {
      throw DimensionError("carried memory " + shape_string(carried->shape()) + " does not match " +
                           shape_string(state.slots.shape()));
    }
    state.slots = detached(*carried);
  }
  return state;
}

// One fused time step shared by observation and prediction. Returns the
// decoder's hidden state.
Tensor fused_step(const ForecasterParams& p, ForecasterState& s, const Tensor& visual, const Tensor& label) {
  std::optional<Tensor> hv, hl;
  if (p.encoder_visual) {
    s.encoder_visual = lstm_step(*p.encoder_visual, visual, *s.encoder_visual);
    hv = s.encoder_visual->h;
  }
  if (p.encoder_label) {
    s.encoder_label = lstm_step(*p.encoder_label, label, *s.encoder_label);
    hl = s.encoder_label->h;
  }

  Tensor fused;
  switch (p.variant) {
    case Variant::a:
      fused = *hv;
      break;
    case Variant::b:
      fused = *hl;
      break;
    case Variant::c: {
      auto [c, next] = memory_step(*p.memory_visual, *hv, *s.memory_visual);
      s.memory_visual = std::move(next);
      fused = std::move(c);
      break;
    }
    case Variant::d: {
      auto [c, next] = memory_step(*p.memory_label, *hl, *s.memory_label);
      s.memory_label = std::move(next);
      fused = std::move(c);
      break;
    }
    case Variant::e: {
      auto [c, next] = memory_step(*p.memory_joint, concat_rows(*hv, *hl), *s.memory_joint);
      s.memory_joint = std::move(next);
      fused = std::move(c);
      break;
    }
    case Variant::full: {
      auto [cv, next_v] = memory_step(*p.memory_visual, *hv, *s.memory_visual);
      auto [cl, next_l] = memory_step(*p.memory_label, *hl, *s.memory_label);
      s.memory_visual = std::move(next_v);
      s.memory_label = std::move(next_l);
      fused = concat_rows(cv, cl);
      break;
    }
  }
  s.decoder = lstm_step(p.decoder, fused, s.decoder);
  ++s.steps;
  return s.decoder.h;
}

Tensor future_visual(const ForecasterParams& p) {
  if (p.future_token) return *p.future_token;
  return Tensor::zeros({p.config.feature_dim});
}

}  // namespace

std::string to_string(Variant variant) {
  switch (variant) {
    case Variant::a: return "a";
    case Variant::b: return "b";
    case Variant::c: return "c";
    case Variant::d: return "d";
    case Variant::e: return "e";
    case Variant::full: return "full";
  }
  return "full";
}

Variant parse_variant(std::string_view name) {
  if (name == "a") return Variant::a;
  if (name == "b") return Variant::b;
  if (name == "c") return Variant::c;
  if (name == "d") return Variant::d;
  if (name == "e") return Variant::e;
  if (name == "full") return Variant::full;
  throw ConfigError("unknown variant '" + std::string(name) + "' (expected a, b, c, d, e or full)");
}

std::string to_string(FutureVisualInput input) {
  return input == FutureVisualInput::zeros ? "zeros" : "learned_token";
}

FutureVisualInput parse_future_visual_input(std::string_view name) {
  if (name == "zeros") return FutureVisualInput::zeros;
  if (name == "learned_token") return FutureVisualInput::learned_token;
  throw ConfigError("unknown future_visual_input '" + std::string(name) + "' (expected zeros or learned_token)");
}

void ForecasterConfig::validate() const {
  if (num_classes < 1 || feature_dim < 1 || hidden_visual < 1 || hidden_label < 1 || decoder_hidden < 1) {
    throw ConfigError("forecaster dimensions must all be at least 1");
  }
  mem_visual.validate("mem_visual");
  mem_label.validate("mem_label");
  if (mem_visual.slot_dim != hidden_visual) {
    throw ConfigError("mem_visual slot_dim " + std::to_string(mem_visual.slot_dim) + " must equal hidden_visual " +
                      std::to_string(hidden_visual));
  }
  if (mem_label.slot_dim != hidden_label) {
    throw ConfigError("mem_label slot_dim " + std::to_string(mem_label.slot_dim) + " must equal hidden_label " +
                      std::to_string(hidden_label));
  }
}

std::vector<NamedTensor> ForecasterParams::named_parameters() const {
  std::vector<NamedTensor> out;
  if (encoder_visual) encoder_visual->collect("encoder_visual", out);
  if (encoder_label) encoder_label->collect("encoder_label", out);
  if (memory_visual) memory_visual->collect("memory_visual", out);
  if (memory_label) memory_label->collect("memory_label", out);
  if (memory_joint) memory_joint->collect("memory_joint", out);
  decoder.collect("decoder", out);
  head.collect("head", out);
  if (future_token) out.push_back({"future_token", *future_token});
  return out;
}

std::size_t ForecasterParams::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : named_parameters()) total += p.tensor.size();
  return total;
}

std::size_t ForecasterParams::memory_count() const {
  return static_cast<std::size_t>(memory_visual.has_value()) + static_cast<std::size_t>(memory_label.has_value()) +
         static_cast<std::size_t>(memory_joint.has_value());
}

ForecasterParams build(const ForecasterConfig& config, std::uint64_t seed) {
  return build_ablation(Variant::full, config, seed);
}

ForecasterParams build_ablation(Variant variant, const ForecasterConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  ForecasterParams p;
  p.variant = variant;
  p.config = config;
  if (has_visual(variant)) p.encoder_visual = LstmParams::init(config.feature_dim, config.hidden_visual, rng);
  if (has_label(variant)) p.encoder_label = LstmParams::init(config.num_classes, config.hidden_label, rng);

  std::size_t fused_dim = 0;
  switch (variant) {
    case Variant::a:
      fused_dim = config.hidden_visual;
      break;
    case Variant::b:
      fused_dim = config.hidden_label;
      break;
    case Variant::c:
      p.memory_visual = MemoryParams::init(config.mem_visual, config.hidden_visual, rng);
      fused_dim = config.hidden_visual;
      break;
    case Variant::d:
      p.memory_label = MemoryParams::init(config.mem_label, config.hidden_label, rng);
      fused_dim = config.hidden_label;
      break;
    case Variant::e: {
      const std::size_t joint = config.hidden_visual + config.hidden_label;
      p.memory_joint = MemoryParams::init(MemoryConfig{config.mem_visual.slots, joint}, joint, rng);
      fused_dim = joint;
      break;
    }
    case Variant::full:
      p.memory_visual = MemoryParams::init(config.mem_visual, config.hidden_visual, rng);
      p.memory_label = MemoryParams::init(config.mem_label, config.hidden_label, rng);
      fused_dim = config.hidden_visual + config.hidden_label;
      break;
  }
  p.decoder = LstmParams::init(fused_dim, config.decoder_hidden, rng);
  p.head = DenseSoftmaxParams::zeros(config.decoder_hidden, config.num_classes);
  if (has_visual(variant) && config.future_visual_input == FutureVisualInput::learned_token) {
    p.future_token =
        uniform_parameter({config.feature_dim}, 1.0 / std::sqrt(static_cast<double>(config.feature_dim)), rng);
  }
  return p;
}

ForecasterState initial_state(const ForecasterParams& params, const MemoryCarry* carry) {
  static const MemoryCarry none;
  const MemoryCarry& c = carry ? *carry : none;
  ForecasterState s;
  if (params.encoder_visual) s.encoder_visual = LstmState::zeros(params.encoder_visual->hidden_dim);
  if (params.encoder_label) s.encoder_label = LstmState::zeros(params.encoder_label->hidden_dim);
  if (params.memory_visual) s.memory_visual = fresh_or_carried(*params.memory_visual, c.visual);
  if (params.memory_label) s.memory_label = fresh_or_carried(*params.memory_label, c.label);
  if (params.memory_joint) s.memory_joint = fresh_or_carried(*params.memory_joint, c.joint);
  s.decoder = LstmState::zeros(params.decoder.hidden_dim);
  return s;
}

MemoryCarry carry_memory(const ForecasterState& state) {
  MemoryCarry c;
  if (state.memory_visual) c.visual = detached(state.memory_visual->slots);
  if (state.memory_label) c.label = detached(state.memory_label->slots);
  if (state.memory_joint) c.joint = detached(state.memory_joint->slots);
  return c;
}

ForecasterState observe(const ForecasterParams& params, const Tensor& features, const Tensor& labels_onehot,
                        ForecasterState state) {
  if (features.rank() != 2 || labels_onehot.rank() != 2) {
    throw DimensionError("observe: features and labels must be matrices");
  }
  if (features.rows() != labels_onehot.rows()) {
    throw ContractError("observe: stream lengths differ (" + std::to_string(features.rows()) + " frames vs " +
                        std::to_string(labels_onehot.rows()) + " labels)");
  }
  if (features.cols() != params.config.feature_dim) {
    throw DimensionError("observe: features " + shape_string(features.shape()) + " do not match feature_dim " +
                         std::to_string(params.config.feature_dim));
  }
  if (labels_onehot.cols() != params.config.num_classes) {
    throw DimensionError("observe: labels " + shape_string(labels_onehot.shape()) + " do not match num_classes " +
                         std::to_string(params.config.num_classes));
  }
  for (std::size_t t = 0; t < features.rows(); ++t) {
    fused_step(params, state, row_of(features, t), row_of(labels_onehot, t));
  }
  return state;
}

PredictStep predict_step(const ForecasterParams& params, ForecasterState state, const Tensor& prev_label_onehot,
                         const RolloutPolicy& policy, Rng* rng) {
  if (prev_label_onehot.rank() != 1 || prev_label_onehot.size() != params.config.num_classes) {
    throw DimensionError("predict_step: previous label " + shape_string(prev_label_onehot.shape()) +
                         " does not match num_classes " + std::to_string(params.config.num_classes));
  }
  const Tensor h = fused_step(params, state, future_visual(params), prev_label_onehot);
  PredictStep out;
  out.probs = dense_softmax(params.head, h);
  if (policy.mode == RolloutPolicy::Mode::greedy) {
    out.chosen = argmax(out.probs);
  } else {
    if (rng == nullptr) throw ContractError("predict_step: sampled policy needs a random generator");
    std::discrete_distribution<std::size_t> dist(out.probs.data().begin(), out.probs.data().end());
    out.chosen = dist(*rng);
  }
  out.state = std::move(state);
  return out;
}

Rollout rollout(const ForecasterParams& params, ForecasterState state, int first_prev_label, std::size_t horizon,
                const RolloutPolicy& policy) {
  if (horizon < 1) throw ContractError("rollout: horizon must be at least 1");
  Rng rng(policy.seed);
  Rollout out;
  out.probs.reserve(horizon);
  out.classes.reserve(horizon);
  Tensor prev = one_hot(first_prev_label, params.config.num_classes);
  for (std::size_t step = 0; step < horizon; ++step) {
    PredictStep next = predict_step(params, std::move(state), prev, policy, &rng);
    state = std::move(next.state);
    prev = one_hot(static_cast<int>(next.chosen), params.config.num_classes);
    out.probs.push_back(std::move(next.probs));
    out.classes.push_back(next.chosen);
  }
  out.state = std::move(state);
  return out;
}

SequenceLoss sequence_loss(const ForecasterParams& params, const Sample& sample, const Window& window,
                           bool teacher_forcing, ForecasterState state) {
  if (window.observed < 1 || window.predicted < 1) throw ProtocolError("sequence_loss: empty window");
  if (window.pred_end() > sample.length()) {
    throw ProtocolError("sequence_loss: window runs past the sequence (T=" + std::to_string(sample.length()) + ")");
  }
  const std::size_t num_classes = params.config.num_classes;
  std::vector<double> observed_features(sample.features.data().begin(),
                                        sample.features.data().begin() +
                                            static_cast<std::ptrdiff_t>(window.observed * sample.features.cols()));
  const Tensor features = Tensor::matrix(window.observed, sample.features.cols(), std::move(observed_features));
  const std::span<const int> observed_labels(sample.labels.data(), window.observed);
  state = observe(params, features, one_hot(observed_labels, num_classes), std::move(state));

  const RolloutPolicy greedy;
  Tensor total;
  int prev = sample.labels[window.observed - 1];
  for (std::size_t t = window.pred_begin(); t < window.pred_end(); ++t) {
    PredictStep step = predict_step(params, std::move(state), one_hot(prev, num_classes), greedy);
    state = std::move(step.state);
    const int truth = sample.labels[t];
    Tensor term = nll(step.probs, static_cast<std::size_t>(truth));
    total = total.defined() ? add(total, term) : term;
    prev = teacher_forcing ? truth : static_cast<int>(step.chosen);
  }
  return SequenceLoss{scale(total, 1.0 / static_cast<double>(window.predicted)), std::move(state)};
}

Tensor forward_loss(const ForecasterParams& params, const Sample& sample, double observed_fraction,
                    double predicted_fraction, bool teacher_forcing) {
  const Window window = windows(sample.length(), observed_fraction, predicted_fraction);
  return sequence_loss(params, sample, window, teacher_forcing, initial_state(params)).loss;
}

}  // namespace nmf
