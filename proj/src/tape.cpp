#include "nmf/tape.hpp"

#include "nmf/errors.hpp"

namespace nmf {

namespace {
thread_local Tape* current_tape = nullptr;
}

void Tape::record(Tensor output, BackwardRule rule) {
  output.set_requires_grad(true);
  records_.push_back(Record{std::move(output), std::move(rule)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        (loss.defined() ? shape_string(loss.shape()) : std::string("<undefined>")));
  }
  if (!loss.requires_grad()) {
    throw ContractError("backward() loss was not produced through a tape");
  }
  Tensor seed = loss;
  seed.grad_buffer()[0] = 1.0;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    if (!it->output.has_grad()) continue;
    it->rule(it->output.grad());
  }
}

TapeScope::TapeScope(Tape& tape) : previous_(current_tape) { current_tape = &tape; }
TapeScope::~TapeScope() { current_tape = previous_; }

NoTapeScope::NoTapeScope() : previous_(current_tape) { current_tape = nullptr; }
NoTapeScope::~NoTapeScope() { current_tape = previous_; }

Tape* active_tape() { return current_tape; }

Tape* tracking_tape(std::initializer_list<const Tensor*> operands) {
  if (current_tape == nullptr) return nullptr;
  for (const Tensor* t : operands) {
    if (t->requires_grad()) return current_tape;
  }
  return nullptr;
}

}  // namespace nmf
