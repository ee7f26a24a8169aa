#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "nmf/forecaster.hpp"
#include "nmf/synthdata.hpp"

namespace fixtures {

// The smallest configuration that still exercises every component.
inline nmf::ForecasterConfig tiny_config(std::size_t num_classes = 3, std::size_t feature_dim = 8) {
  nmf::ForecasterConfig c;
  c.num_classes = num_classes;
  c.feature_dim = feature_dim;
  c.hidden_visual = 8;
  c.hidden_label = 6;
  c.mem_visual = {4, 8};
  c.mem_label = {4, 6};
  c.decoder_hidden = 8;
  return c;
}

// A freshly built head is all zero, which blocks every gradient below it.
inline void randomize_head(nmf::ForecasterParams& params, nmf::Rng& rng, double bound = 0.5) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : params.head.weight.mutable_data()) v = dist(rng);
  for (double& v : params.head.bias.mutable_data()) v = dist(rng);
}

inline nmf::Sample random_sample(std::size_t length, std::size_t num_classes, std::size_t feature_dim, nmf::Rng& rng) {
  nmf::Sample s;
  std::uniform_int_distribution<int> label(0, static_cast<int>(num_classes) - 1);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t t = 0; t < length; ++t) s.labels.push_back(label(rng));
  s.features = nmf::Tensor::zeros({length, feature_dim});
  for (double& v : s.features.mutable_data()) v = noise(rng);
  return s;
}

inline std::vector<double> flatten(const nmf::ForecasterParams& params) {
  std::vector<double> out;
  for (const auto& p : params.named_parameters()) out.insert(out.end(), p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

// Worst |analytic - numeric| over every element of params, where numeric is
// Richardson-extrapolated central differences at steps h and h/2. Fourth
// order, so h can be large enough that rounding stays near 1e-13.
// `analytic` holds one gradient vector per parameter, in order.
inline double richardson_max_abs_error(const std::function<double()>& f, const std::vector<nmf::NamedTensor>& params,
                                       const std::vector<std::vector<double>>& analytic, double h = 1e-3) {
  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    nmf::Tensor t = params[p].tensor;
    auto data = t.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double original = data[i];
      auto central = [&](double step) {
        data[i] = original + step;
        const double plus = f();
        data[i] = original - step;
        const double minus = f();
        data[i] = original;
        return (plus - minus) / (2.0 * step);
      };
      const double coarse = central(h);
      const double fine = central(h / 2.0);
      worst = std::max(worst, std::abs(analytic[p][i] - (4.0 * fine - coarse) / 3.0));
    }
  }
  return worst;
}

}  // namespace fixtures
