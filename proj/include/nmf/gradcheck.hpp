#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nmf/tensor.hpp"

namespace nmf {

struct ParamGradError {
  std::string name;
  std::vector<double> relative_errors;  // one per element
  double max_relative_error = 0.0;
};

struct GradCheckReport {
  std::vector<ParamGradError> params;
  double max_relative_error = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

// |a - n| / max(|a|, |n|, 1e-8)
double relative_error(double analytic, double numeric);

/// Compares tape gradients of a scalar objective against central differences
/// (f(p + h) - f(p - h)) / 2h, element by element.
///
/// `objective` must be deterministic and build its result from `params` with
/// ordinary ops; it is called once under a tape and 2N times without one.
/// Existing gradients on `params` are discarded.
GradCheckReport grad_check(const std::function<Tensor()>& objective, std::span<const NamedTensor> params,
                           double h = 1e-5, double tolerance = 1e-4);

}  // namespace nmf
