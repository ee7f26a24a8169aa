#include "nmf/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "nmf/errors.hpp"
#include "nmf/tape.hpp"

namespace nmf {

namespace {

double evaluate(const std::function<Tensor()>& objective) {
  const double value = objective().item();
  if (!std::isfinite(value)) throw EvaluationError("grad_check: objective is not finite");
  return value;
}

}  // namespace

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const std::function<Tensor()>& objective, std::span<const NamedTensor> params,
                           double h, double tolerance) {
  if (!(h > 0.0)) throw ContractError("grad_check: step h must be positive");

  std::vector<Tensor> tensors;
  for (const auto& p : params) {
    Tensor t = p.tensor;
    if (!t.requires_grad()) throw ContractError("grad_check: parameter '" + p.name + "' does not require grad");
    t.clear_grad();
    tensors.push_back(t);
  }

  {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = objective();
    if (!std::isfinite(loss.item())) throw EvaluationError("grad_check: objective is not finite");
    // An objective that never touches the parameters has zero gradient.
    if (loss.requires_grad()) tape.backward(loss);
  }

  GradCheckReport report;
  report.tolerance = tolerance;
  for (std::size_t p = 0; p < tensors.size(); ++p) {
    Tensor& t = tensors[p];
    std::vector<double> analytic(t.size(), 0.0);
    if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.begin());

    ParamGradError entry{params[p].name, std::vector<double>(t.size(), 0.0), 0.0};
    auto data = t.mutable_data();
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double original = data[i];
      data[i] = original + h;
      const double plus = evaluate(objective);
      data[i] = original - h;
      const double minus = evaluate(objective);
      data[i] = original;
      const double numeric = (plus - minus) / (2.0 * h);
      entry.relative_errors[i] = relative_error(analytic[i], numeric);
      entry.max_relative_error = std::max(entry.max_relative_error, entry.relative_errors[i]);
    }
    report.max_relative_error = std::max(report.max_relative_error, entry.max_relative_error);
    report.params.push_back(std::move(entry));
  }
  report.pass = report.max_relative_error < tolerance;
  return report;
}

}  // namespace nmf
