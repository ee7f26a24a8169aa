#include "nmf/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "nmf/errors.hpp"

namespace nmf {

namespace {

// Products such as 0.3 * 100 land a few ulps away from the integer they
// denote; the slack keeps floor() on the intended side.
std::size_t floor_frames(double fraction, std::size_t length) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(length) + 1e-9));
}

bool valid_fraction(double f) { return f > 0.0 && f < 1.0; }

}  // namespace

void EvalProtocol::validate() const {
  if (observed_fractions.empty() || predicted_fractions.empty()) {
    throw ConfigError("protocol needs at least one observed and one predicted fraction");
  }
  for (double obs : observed_fractions) {
    if (!valid_fraction(obs)) throw ConfigError("observed fraction " + std::to_string(obs) + " outside (0, 1)");
    for (double pred : predicted_fractions) {
      if (!valid_fraction(pred)) throw ConfigError("predicted fraction " + std::to_string(pred) + " outside (0, 1)");
      if (obs + pred > 1.0 + 1e-12) {
        throw ConfigError("observed + predicted fraction exceeds 1: " + std::to_string(obs) + " + " +
                          std::to_string(pred));
      }
    }
  }
}

Window windows(std::size_t length, double observed_fraction, double predicted_fraction) {
  if (length < 1) throw ProtocolError("windows: sequence is empty");
  if (!valid_fraction(observed_fraction) || !valid_fraction(predicted_fraction)) {
    throw ProtocolError("windows: fractions must lie in (0, 1)");
  }
  Window w;
  w.observed = std::max<std::size_t>(1, floor_frames(observed_fraction, length));
  w.predicted = floor_frames(predicted_fraction, length);
  if (w.predicted == 0) {
    throw ProtocolError("windows: prediction window is empty for T=" + std::to_string(length) +
                        " at predicted fraction " + std::to_string(predicted_fraction));
  }
  if (w.pred_end() > length) {
    throw ProtocolError("windows: observed + predicted frames exceed T=" + std::to_string(length));
  }
  return w;
}

double frame_accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size() || truth.empty()) {
    throw ContractError("frame_accuracy: need equal non-zero lengths, got " + std::to_string(predicted.size()) +
                        " and " + std::to_string(truth.size()));
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double class_mean_accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size() || truth.empty()) {
    throw ContractError("class_mean_accuracy: need equal non-zero lengths");
  }
  std::map<int, std::pair<std::size_t, std::size_t>> per_class;  // hits, total
  for (std::size_t i = 0; i < truth.size(); ++i) {
    auto& [hits, total] = per_class[truth[i]];
    hits += predicted[i] == truth[i];
    ++total;
  }
  double acc = 0.0;
  for (const auto& [cls, counts] : per_class) {
    acc += static_cast<double>(counts.first) / static_cast<double>(counts.second);
  }
  return acc / static_cast<double>(per_class.size());
}

}  // namespace nmf
