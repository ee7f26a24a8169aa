#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "nmf/forecaster.hpp"
#include "nmf/gradcheck.hpp"
#include "nmf/protocol.hpp"
#include "nmf/synthdata.hpp"

namespace nmf {

// ---------------------------------------------------------------- training

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 8;
  double learning_rate = 1e-3;
  double clip_norm = 5.0;
  std::uint64_t seed = 0;
  bool teacher_forcing = true;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Each training sequence is cut at an observed fraction drawn from this
  // list and scored over the following predicted_fraction of frames.
  std::vector<double> observed_fractions{0.2, 0.3};
  double predicted_fraction = 0.5;

  void validate() const;
};

/// Adaptive-moment optimizer over a fixed parameter list.
class Adam {
 public:
  Adam(std::vector<NamedTensor> params, double learning_rate, double beta1, double beta2, double epsilon);

  // Applies one update from the parameters' current gradients.
  void step();
  std::size_t steps() const { return steps_; }

 private:
  std::vector<NamedTensor> params_;
  std::vector<std::vector<double>> first_moment_;
  std::vector<std::vector<double>> second_moment_;
  double learning_rate_, beta1_, beta2_, epsilon_;
  std::size_t steps_ = 0;
};

double global_grad_norm(std::span<const NamedTensor> params);
// Rescales all gradients so their global norm is at most max_norm.
// Returns the norm before clipping.
double clip_grad_norm(std::span<const NamedTensor> params, double max_norm);

struct TrainResult {
  std::vector<double> epoch_losses;
  std::vector<double> clipped_norms;  // global gradient norm after clipping, per update
  std::size_t skipped_sequences = 0;
};

/// Mini-batch training with per-update global-norm clipping. Deterministic
/// given config.seed. Throws TrainingError on a non-finite loss.
TrainResult train(ForecasterParams& model, std::span<const Sample> data, const TrainConfig& config);

// -------------------------------------------------------------- evaluation

struct EvalRow {
  std::string variant;
  std::uint64_t seed = 0;
  double observed_frac = 0.0;
  double predicted_frac = 0.0;
  double accuracy = 0.0;             // frame-wise
  double class_mean_accuracy = 0.0;  // mean over classes present in the window
  std::size_t num_sequences = 0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::size_t skipped = 0;  // (sequence, cell) pairs whose windows could not be formed
  std::map<std::string, std::size_t> parameter_counts;

  // Orders rows by (variant, seed, observed, predicted).
  void sort_rows();
  void merge(const EvalReport& other);
  const EvalRow* find(const std::string& variant, std::uint64_t seed, double observed, double predicted) const;

  std::string csv() const;
  nlohmann::json summary() const;
};

inline constexpr const char* kReportCsvHeader = "variant,seed,observed_frac,predicted_frac,accuracy,num_sequences";

struct EvalOptions {
  std::string variant = "full";
  std::uint64_t seed = 0;
  // Segment-level corruption applied to the observed labels only.
  double label_corruption = 0.0;
  std::uint64_t corruption_seed = 0;
  std::size_t num_classes = 0;  // required when label_corruption > 0
};

/// Produces window.predicted class ids from the (possibly corrupted) observed
/// labels of a sample. Must be causal: a longer window's prediction begins
/// with the shorter one's.
using SequencePredictor =
    std::function<std::vector<int>(const Sample& sample, std::span<const int> observed_labels, const Window& window)>;

EvalReport evaluate_predictor(const SequencePredictor& predictor, std::span<const Sample> test,
                              const EvalProtocol& protocol, const EvalOptions& options);

/// Greedy autoregressive evaluation of a model over every protocol cell.
/// Never modifies the model.
EvalReport evaluate(const ForecasterParams& model, std::span<const Sample> test, const EvalProtocol& protocol,
                    const EvalOptions& options = {});

// ----------------------------------------------------------------- runners

struct ExperimentSetup {
  ForecasterConfig model;
  TrainConfig train;
  std::vector<Variant> variants{Variant::a, Variant::b, Variant::c, Variant::d, Variant::e, Variant::full};
  std::vector<std::uint64_t> seeds{0, 1, 2};
  double observed_fraction = 0.3;
  double predicted_fraction = 0.5;
  std::vector<double> corruption_levels{0.0, 0.1, 0.3};
  std::size_t jobs = 1;
};

struct TrainedModel {
  Variant variant = Variant::full;
  std::uint64_t seed = 0;
  ForecasterParams params;
  TrainResult training;
};

struct AblationResult {
  EvalReport report;
  std::vector<TrainedModel> models;  // sorted by (variant, seed)
};

/// Trains every (variant, seed) pair on identical data and epoch budget and
/// evaluates the single fixed cell. Jobs run on up to setup.jobs threads;
/// the merged report is independent of scheduling.
AblationResult run_ablations(std::span<const Sample> train_set, std::span<const Sample> test_set,
                             const ExperimentSetup& setup);

/// Evaluates a trained model at the fixed cell with the observed labels
/// corrupted at each level. Rows are labelled "<variant>@p=<level>".
EvalReport run_sensitivity(const ForecasterParams& model, std::span<const Sample> test_set, std::uint64_t seed,
                           const ExperimentSetup& setup);

std::string sensitivity_label(Variant variant, double level);

/// Gradient check of a tiny full model: C=3, feature_dim=8, hidden 8/6,
/// memories 4x8 and 4x6, decoder 8, on one random 7-frame sample with 4
/// observed and 3 predicted frames. The head is redrawn uniformly in
/// [-0.5, 0.5] because a freshly built head is zero and would make every
/// other gradient vanish.
GradCheckReport tiny_model_gradcheck(std::uint64_t seed, double h = 1e-5, double tolerance = 1e-4);

// Shortest decimal form that reads back to the same double.
std::string format_double(double value);

}  // namespace nmf
