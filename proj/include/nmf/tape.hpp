#pragma once

#include <functional>
#include <span>
#include <vector>

#include "nmf/tensor.hpp"

namespace nmf {

/// Ordered record of differentiable operations.
///
/// Operations record themselves onto the tape installed by a TapeScope on the
/// current thread, and only when at least one operand requires a gradient.
/// Without an active tape every op is a plain forward computation.
class Tape {
 public:
  // Receives the gradient of the recorded output and accumulates into the
  // operands it captured.
  using BackwardRule = std::function<void(std::span<const double> output_grad)>;

  // Marks output as requiring a gradient.
  void record(Tensor output, BackwardRule rule);

  /// Seeds d(loss)/d(loss) = 1 and replays the rules in reverse order.
  /// Rules whose output received no gradient are skipped, so tensors that do
  /// not reach the loss keep whatever gradient they had.
  void backward(const Tensor& loss);

  std::size_t size() const { return records_.size(); }
  void clear() { records_.clear(); }

 private:
  struct Record {
    Tensor output;
    BackwardRule rule;
  };
  std::vector<Record> records_;
};

// Installs a tape as the recording target for the current thread.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

// Suspends recording on the current thread, e.g. during evaluation.
class NoTapeScope {
 public:
  NoTapeScope();
  ~NoTapeScope();
  NoTapeScope(const NoTapeScope&) = delete;
  NoTapeScope& operator=(const NoTapeScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape();

// The active tape when at least one operand requires a gradient, else null.
Tape* tracking_tape(std::initializer_list<const Tensor*> operands);

}  // namespace nmf
