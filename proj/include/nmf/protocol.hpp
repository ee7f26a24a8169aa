#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace nmf {

/// Observed-%/predicted-% evaluation grid.
struct EvalProtocol {
  std::vector<double> observed_fractions{0.2, 0.3};
  std::vector<double> predicted_fractions{0.1, 0.2, 0.3, 0.5};

  void validate() const;
};

// Half-open, 0-based frame ranges: observe [0, observed), predict
// [observed, observed + predicted).
struct Window {
  std::size_t observed = 0;
  std::size_t predicted = 0;

  std::size_t pred_begin() const { return observed; }
  std::size_t pred_end() const { return observed + predicted; }
};

/// observed = max(1, floor(obs_frac * T)), predicted = floor(pred_frac * T).
/// Throws ProtocolError when the prediction window is empty or would run past T.
Window windows(std::size_t length, double observed_fraction, double predicted_fraction);

// Fraction of positions where the classes agree.
double frame_accuracy(std::span<const int> predicted, std::span<const int> truth);

// Mean over the classes present in `truth` of the per-class hit rate.
double class_mean_accuracy(std::span<const int> predicted, std::span<const int> truth);

}  // namespace nmf
