#include "nmf/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <numeric>
#include <optional>
#include <sstream>
#include <thread>
#include <tuple>

#include "nmf/errors.hpp"
#include "nmf/ops.hpp"
#include "nmf/tape.hpp"

namespace nmf {

std::string format_double(double value) {
  char buffer[64];
  auto [end, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
  return std::string(buffer, end);
}

// ---------------------------------------------------------------- training

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train: epochs must be positive");
  if (batch_size < 1) throw ConfigError("train: batch_size must be positive");
  if (!(learning_rate >= 0.0)) throw ConfigError("train: learning_rate must be non-negative");
  if (!(clip_norm > 0.0)) throw ConfigError("train: clip_norm must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("train: beta1 and beta2 must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("train: epsilon must be positive");
  if (observed_fractions.empty()) throw ConfigError("train: observed_fractions is empty");
  EvalProtocol{observed_fractions, {predicted_fraction}}.validate();
}

Adam::Adam(std::vector<NamedTensor> params, double learning_rate, double beta1, double beta2, double epsilon)
    : params_(std::move(params)), learning_rate_(learning_rate), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
  for (const auto& p : params_) {
    first_moment_.emplace_back(p.tensor.size(), 0.0);
    second_moment_.emplace_back(p.tensor.size(), 0.0);
  }
}

void Adam::step() {
  ++steps_;
  const double correction1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double correction2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (std::size_t p = 0; p < params_.size(); ++p) {
    Tensor& t = params_[p].tensor;
    if (!t.has_grad()) continue;
    auto g = t.grad();
    auto w = t.mutable_data();
    auto& m = first_moment_[p];
    auto& v = second_moment_[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      w[i] -= learning_rate_ * m_hat / (std::sqrt(v_hat) + epsilon_);
    }
  }
}

double global_grad_norm(std::span<const NamedTensor> params) {
  double total = 0.0;
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad()) total += g * g;
  }
  return std::sqrt(total);
}

double clip_grad_norm(std::span<const NamedTensor> params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (norm > max_norm) {
    const double factor = max_norm / norm;
    for (const auto& p : params) {
      Tensor t = p.tensor;
      if (!t.has_grad()) continue;
      for (double& g : t.grad_buffer()) g *= factor;
    }
  }
  return norm;
}

TrainResult train(ForecasterParams& model, std::span<const Sample> data, const TrainConfig& config) {
  config.validate();
  if (data.empty()) throw ContractError("train: empty dataset");
  std::vector<NamedTensor> params = model.named_parameters();
  Adam optimizer(params, config.learning_rate, config.beta1, config.beta2, config.epsilon);
  Rng rng(config.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::uniform_int_distribution<std::size_t> pick_observed(0, config.observed_fractions.size() - 1);

  TrainResult result;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t scored = 0;
    MemoryCarry carry;
    bool have_carry = false;

    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      for (auto& p : params) p.tensor.zero_grad();
      std::size_t in_batch = 0;
      for (std::size_t pos = begin; pos < end; ++pos) {
        const Sample& sample = data[order[pos]];
        const double observed = config.observed_fractions[pick_observed(rng)];
        Window window;
        try {
          window = windows(sample.length(), observed, config.predicted_fraction);
        } catch (const ProtocolError&) {
          ++result.skipped_sequences;
          continue;
        }
        Tape tape;
        TapeScope scope(tape);
        const bool use_carry = model.config.persist_memory && have_carry;
        SequenceLoss scored_loss = sequence_loss(model, sample, window, config.teacher_forcing,
                                                 initial_state(model, use_carry ? &carry : nullptr));
        const double value = scored_loss.loss.item();
        if (!std::isfinite(value)) {
          throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                              std::to_string(optimizer.steps()) + " (sequence " + std::to_string(order[pos]) + ")");
        }
        tape.backward(scored_loss.loss);
        if (model.config.persist_memory) {
          carry = carry_memory(scored_loss.state);
          have_carry = true;
        }
        loss_sum += value;
        ++scored;
        ++in_batch;
      }
      if (in_batch == 0) continue;
      const double mean_factor = 1.0 / static_cast<double>(in_batch);
      for (auto& p : params) {
        if (!p.tensor.has_grad()) continue;
        for (double& g : p.tensor.grad_buffer()) g *= mean_factor;
      }
      clip_grad_norm(params, config.clip_norm);
      result.clipped_norms.push_back(global_grad_norm(params));
      optimizer.step();
    }
    if (scored == 0) throw ProtocolError("train: no sequence long enough for the training windows");
    result.epoch_losses.push_back(loss_sum / static_cast<double>(scored));
  }
  for (auto& p : params) p.tensor.clear_grad();
  return result;
}

// -------------------------------------------------------------- evaluation

void EvalReport::sort_rows() {
  std::sort(rows.begin(), rows.end(), [](const EvalRow& x, const EvalRow& y) {
    return std::tie(x.variant, x.seed, x.observed_frac, x.predicted_frac) <
           std::tie(y.variant, y.seed, y.observed_frac, y.predicted_frac);
  });
}

void EvalReport::merge(const EvalReport& other) {
  rows.insert(rows.end(), other.rows.begin(), other.rows.end());
  skipped += other.skipped;
  for (const auto& [name, count] : other.parameter_counts) parameter_counts[name] = count;
  sort_rows();
}

const EvalRow* EvalReport::find(const std::string& variant, std::uint64_t seed, double observed,
                                double predicted) const {
  for (const auto& row : rows) {
    if (row.variant == variant && row.seed == seed && row.observed_frac == observed &&
        row.predicted_frac == predicted) {
      return &row;
    }
  }
  return nullptr;
}

std::string EvalReport::csv() const {
  std::ostringstream out;
  out << kReportCsvHeader << '\n';
  for (const auto& row : rows) {
    out << row.variant << ',' << row.seed << ',' << format_double(row.observed_frac) << ','
        << format_double(row.predicted_frac) << ',' << format_double(row.accuracy) << ',' << row.num_sequences
        << '\n';
  }
  return out.str();
}

nlohmann::json EvalReport::summary() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& row : rows) {
    rows_json.push_back({{"variant", row.variant},
                         {"seed", row.seed},
                         {"observed_frac", row.observed_frac},
                         {"predicted_frac", row.predicted_frac},
                         {"accuracy", row.accuracy},
                         {"class_mean_accuracy", row.class_mean_accuracy},
                         {"num_sequences", row.num_sequences}});
  }
  return nlohmann::json{{"rows", rows_json}, {"skipped", skipped}, {"parameter_counts", parameter_counts}};
}

EvalReport evaluate_predictor(const SequencePredictor& predictor, std::span<const Sample> test,
                              const EvalProtocol& protocol, const EvalOptions& options) {
  protocol.validate();
  if (test.empty()) throw ProtocolError("evaluate: empty test set");
  if (options.label_corruption > 0.0 && options.num_classes < 2) {
    throw ContractError("evaluate: label corruption needs num_classes");
  }
  EvalReport report;
  const auto& predicted_fractions = protocol.predicted_fractions;
  for (double observed_fraction : protocol.observed_fractions) {
    std::vector<double> frame_sum(predicted_fractions.size(), 0.0);
    std::vector<double> class_sum(predicted_fractions.size(), 0.0);
    std::vector<std::size_t> counted(predicted_fractions.size(), 0);
    Rng corruption_rng(options.corruption_seed);

    for (const Sample& sample : test) {
      std::vector<std::optional<Window>> cells(predicted_fractions.size());
      std::optional<Window> longest;
      for (std::size_t i = 0; i < predicted_fractions.size(); ++i) {
        try {
          cells[i] = windows(sample.length(), observed_fraction, predicted_fractions[i]);
        } catch (const ProtocolError&) {
          ++report.skipped;
          continue;
        }
        if (!longest || cells[i]->predicted > longest->predicted) longest = cells[i];
      }
      if (!longest) continue;

      std::vector<int> observed(sample.labels.begin(),
                                sample.labels.begin() + static_cast<std::ptrdiff_t>(longest->observed));
      if (options.label_corruption > 0.0) {
        observed = corrupt_labels(observed, options.num_classes, options.label_corruption, corruption_rng);
      }
      const std::vector<int> prediction = predictor(sample, observed, *longest);
      if (prediction.size() != longest->predicted) {
        throw ContractError("evaluate: predictor returned " + std::to_string(prediction.size()) +
                            " frames, expected " + std::to_string(longest->predicted));
      }
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (!cells[i]) continue;
        const std::span<const int> guess(prediction.data(), cells[i]->predicted);
        const std::span<const int> truth(sample.labels.data() + cells[i]->pred_begin(), cells[i]->predicted);
        frame_sum[i] += frame_accuracy(guess, truth);
        class_sum[i] += class_mean_accuracy(guess, truth);
        ++counted[i];
      }
    }

    for (std::size_t i = 0; i < predicted_fractions.size(); ++i) {
      if (counted[i] == 0) {
        throw ProtocolError("evaluate: every sequence is too short for observed " + format_double(observed_fraction) +
                            " / predicted " + format_double(predicted_fractions[i]));
      }
      const double n = static_cast<double>(counted[i]);
      report.rows.push_back(EvalRow{options.variant, options.seed, observed_fraction, predicted_fractions[i],
                                    frame_sum[i] / n, class_sum[i] / n, counted[i]});
    }
  }
  report.sort_rows();
  return report;
}

EvalReport evaluate(const ForecasterParams& model, std::span<const Sample> test, const EvalProtocol& protocol,
                    const EvalOptions& options) {
  NoTapeScope no_tape;
  const std::size_t num_classes = model.config.num_classes;
  std::optional<MemoryCarry> carry;
  SequencePredictor predictor = [&](const Sample& sample, std::span<const int> observed, const Window& window) {
    const std::size_t dim = sample.features.cols();
    const Tensor features = Tensor::matrix(
        window.observed, dim,
        std::vector<double>(sample.features.data().begin(),
                            sample.features.data().begin() + static_cast<std::ptrdiff_t>(window.observed * dim)));
    ForecasterState state = initial_state(model, carry ? &*carry : nullptr);
    state = observe(model, features, one_hot(observed, num_classes), std::move(state));
    Rollout r = rollout(model, std::move(state), observed.back(), window.predicted, RolloutPolicy{});
    if (model.config.persist_memory) carry = carry_memory(r.state);
    return std::vector<int>(r.classes.begin(), r.classes.end());
  };
  EvalOptions opts = options;
  opts.num_classes = num_classes;
  EvalReport report = evaluate_predictor(predictor, test, protocol, opts);
  report.parameter_counts[options.variant] = model.parameter_count();
  return report;
}

// ----------------------------------------------------------------- runners

AblationResult run_ablations(std::span<const Sample> train_set, std::span<const Sample> test_set,
                             const ExperimentSetup& setup) {
  struct Job {
    Variant variant;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (Variant v : setup.variants)
    for (std::uint64_t s : setup.seeds) jobs.push_back({v, s});

  const EvalProtocol cell{{setup.observed_fraction}, {setup.predicted_fraction}};
  cell.validate();
  std::vector<TrainedModel> models(jobs.size());
  std::vector<EvalReport> reports(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&]() {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        const Job& job = jobs[i];
        TrainedModel trained;
        trained.variant = job.variant;
        trained.seed = job.seed;
        trained.params = build_ablation(job.variant, setup.model, job.seed);
        TrainConfig config = setup.train;
        config.seed = job.seed;
        trained.training = train(trained.params, train_set, config);
        reports[i] = evaluate(trained.params, test_set, cell, EvalOptions{to_string(job.variant), job.seed});
        models[i] = std::move(trained);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(setup.jobs, 1, std::max<std::size_t>(1, jobs.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  AblationResult result;
  for (const auto& r : reports) result.report.merge(r);
  std::vector<std::size_t> order(jobs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return std::make_tuple(to_string(jobs[x].variant), jobs[x].seed) <
           std::make_tuple(to_string(jobs[y].variant), jobs[y].seed);
  });
  for (std::size_t i : order) result.models.push_back(std::move(models[i]));
  return result;
}

GradCheckReport tiny_model_gradcheck(std::uint64_t seed, double h, double tolerance) {
  ForecasterConfig config;
  config.num_classes = 3;
  config.feature_dim = 8;
  config.hidden_visual = 8;
  config.hidden_label = 6;
  config.mem_visual = {4, 8};
  config.mem_label = {4, 6};
  config.decoder_hidden = 8;
  ForecasterParams model = build(config, seed);

  Rng rng(seed + 1);
  std::uniform_real_distribution<double> uniform(-0.5, 0.5);
  for (double& v : model.head.weight.mutable_data()) v = uniform(rng);
  for (double& v : model.head.bias.mutable_data()) v = uniform(rng);

  constexpr std::size_t kLength = 7;
  std::uniform_int_distribution<int> label(0, static_cast<int>(config.num_classes) - 1);
  std::normal_distribution<double> noise(0.0, 1.0);
  Sample sample;
  for (std::size_t t = 0; t < kLength; ++t) sample.labels.push_back(label(rng));
  sample.features = Tensor::zeros({kLength, config.feature_dim});
  for (double& v : sample.features.mutable_data()) v = noise(rng);

  return grad_check([&] { return forward_loss(model, sample, 4.0 / 7.0, 3.0 / 7.0, true); }, model.named_parameters(), h,
                    tolerance);
}

std::string sensitivity_label(Variant variant, double level) {
  return to_string(variant) + "@p=" + format_double(level);
}

EvalReport run_sensitivity(const ForecasterParams& model, std::span<const Sample> test_set, std::uint64_t seed,
                           const ExperimentSetup& setup) {
  const EvalProtocol cell{{setup.observed_fraction}, {setup.predicted_fraction}};
  EvalReport report;
  for (double level : setup.corruption_levels) {
    if (!(level >= 0.0 && level <= 1.0)) throw ConfigError("corruption level outside [0, 1]");
    EvalOptions options;
    options.variant = sensitivity_label(model.variant, level);
    options.seed = seed;
    options.label_corruption = level;
    options.corruption_seed = seed;
    report.merge(evaluate(model, test_set, cell, options));
  }
  return report;
}

}  // namespace nmf
