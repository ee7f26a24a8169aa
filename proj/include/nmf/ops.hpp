#pragma once

#include <cstddef>

#include "nmf/tensor.hpp"

// Differentiable tensor operations. Each op computes its forward value and,
// when a tape is active and an operand requires a gradient, records its
// backward rule. Shape violations raise DimensionError naming the operands.
namespace nmf {

// Elementwise, operands of identical shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);

// Stacks vectors end to end, or matrices with equal column counts row-wise.
Tensor concat_rows(const Tensor& a, const Tensor& b);
// Contiguous sub-vector [begin, begin + length) of a rank-1 tensor.
Tensor slice(const Tensor& x, std::size_t begin, std::size_t length);

// [m x n] * [n x p] -> [m x p]
Tensor matmul(const Tensor& a, const Tensor& b);
// [m x n] * [n] -> [m]
Tensor matvec(const Tensor& a, const Tensor& x);
// x^T A: [m] * [m x n] -> [n]
Tensor vecmat(const Tensor& x, const Tensor& a);
// W x + b
Tensor affine(const Tensor& weight, const Tensor& x, const Tensor& bias);

// Max-subtracted softmax over a rank-1 tensor.
Tensor softmax_row(const Tensor& x);

Tensor sum(const Tensor& x);
Tensor dot(const Tensor& x, const Tensor& y);
// -log p[target] for a probability vector p.
Tensor nll(const Tensor& probs, std::size_t target);

/// Moves every row of `slots` toward `value` by its weight:
///   out[i, :] = (1 - weight[i]) * slots[i, :] + weight[i] * value
/// slots is [l x k], weight is [l], value is [k].
Tensor slot_blend(const Tensor& slots, const Tensor& weight, const Tensor& value);

std::size_t argmax(const Tensor& x);

}  // namespace nmf
