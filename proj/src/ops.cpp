#include "nmf/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "nmf/errors.hpp"
#include "nmf/tape.hpp"

namespace nmf {

namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) +
                       " and " + shape_string(b.shape()));
}

void require_defined(const char* op, const Tensor& t) {
  if (!t.defined()) throw DimensionError(std::string(op) + ": undefined operand");
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  require_defined(op, a);
  require_defined(op, b);
  if (a.shape() != b.shape()) shape_error(op, a, b);
}

void require_vector(const char* op, const Tensor& t) {
  require_defined(op, t);
  if (t.rank() != 1) {
    throw DimensionError(std::string(op) + ": expected a vector, got " + shape_string(t.shape()));
  }
}

void require_matrix(const char* op, const Tensor& t) {
  require_defined(op, t);
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_string(t.shape()));
  }
}

// Accumulates factor * g into t's gradient when t participates.
void accumulate(const Tensor& t, std::span<const double> g, double factor = 1.0) {
  if (!t.requires_grad()) return;
  auto dst = t.grad_buffer();
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += factor * g[i];
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  Tensor out = Tensor::zeros(a.shape());
  auto o = out.mutable_data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
  if (Tape* tape = tracking_tape({&a, &b})) {
    tape->record(out, [a, b](std::span<const double> g) mutable {
      accumulate(a, g);
      accumulate(b, g);
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  Tensor out = Tensor::zeros(a.shape());
  auto o = out.mutable_data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] - y[i];
  if (Tape* tape = tracking_tape({&a, &b})) {
    tape->record(out, [a, b](std::span<const double> g) mutable {
      accumulate(a, g);
      accumulate(b, g, -1.0);
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  Tensor out = Tensor::zeros(a.shape());
  auto o = out.mutable_data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
  if (Tape* tape = tracking_tape({&a, &b})) {
    tape->record(out, [a, b](std::span<const double> g) mutable {
      if (a.requires_grad()) {
        auto da = a.grad_buffer();
        auto y = b.data();
        for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * y[i];
      }
      if (b.requires_grad()) {
        auto db = b.grad_buffer();
        auto x = a.data();
        for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * x[i];
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& a, double factor) {
  require_defined("scale", a);
  Tensor out = Tensor::zeros(a.shape());
  auto o = out.mutable_data();
  auto x = a.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = factor * x[i];
  if (Tape* tape = tracking_tape({&a})) {
    tape->record(out, [a, factor](std::span<const double> g) mutable { accumulate(a, g, factor); });
  }
  return out;
}

Tensor sigmoid(const Tensor& x) {
  require_defined("sigmoid", x);
  Tensor out = Tensor::zeros(x.shape());
  auto o = out.mutable_data();
  auto v = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    // Branches keep exp() from overflowing for large |v|.
    o[i] = v[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-v[i])) : std::exp(v[i]) / (1.0 + std::exp(v[i]));
  }
  if (Tape* tape = tracking_tape({&x})) {
    tape->record(out, [x, out](std::span<const double> g) mutable {
      auto dx = x.grad_buffer();
      auto s = out.data();
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * s[i] * (1.0 - s[i]);
    });
  }
  return out;
}

Tensor tanh(const Tensor& x) {
  require_defined("tanh", x);
  Tensor out = Tensor::zeros(x.shape());
  auto o = out.mutable_data();
  auto v = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::tanh(v[i]);
  if (Tape* tape = tracking_tape({&x})) {
    tape->record(out, [x, out](std::span<const double> g) mutable {
      auto dx = x.grad_buffer();
      auto t = out.data();
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * (1.0 - t[i] * t[i]);
    });
  }
  return out;
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  require_defined("concat_rows", a);
  require_defined("concat_rows", b);
  Shape shape;
  if (a.rank() == 1 && b.rank() == 1) {
    shape = {a.size() + b.size()};
  } else if (a.rank() == 2 && b.rank() == 2 && a.cols() == b.cols()) {
    shape = {a.rows() + b.rows(), a.cols()};
  } else {
    shape_error("concat_rows", a, b);
  }
  Tensor out = Tensor::zeros(shape);
  auto o = out.mutable_data();
  std::copy(a.data().begin(), a.data().end(), o.begin());
  std::copy(b.data().begin(), b.data().end(), o.begin() + static_cast<std::ptrdiff_t>(a.size()));
  if (Tape* tape = tracking_tape({&a, &b})) {
    tape->record(out, [a, b](std::span<const double> g) mutable {
      accumulate(a, g.first(a.size()));
      accumulate(b, g.subspan(a.size()));
    });
  }
  return out;
}

Tensor slice(const Tensor& x, std::size_t begin, std::size_t length) {
  require_vector("slice", x);
  if (length == 0 || begin + length > x.size()) {
    throw DimensionError("slice: range [" + std::to_string(begin) + ", " +
                         std::to_string(begin + length) + ") outside " + shape_string(x.shape()));
  }
  Tensor out = Tensor::from({length}, std::vector<double>(x.data().begin() + static_cast<std::ptrdiff_t>(begin),
                                                          x.data().begin() + static_cast<std::ptrdiff_t>(begin + length)));
  if (Tape* tape = tracking_tape({&x})) {
    tape->record(out, [x, begin](std::span<const double> g) mutable {
      auto dx = x.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) dx[begin + i] += g[i];
    });
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix("matmul", a);
  require_matrix("matmul", b);
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  const std::size_t m = a.rows(), n = a.cols(), p = b.cols();
  Tensor out = Tensor::zeros({m, p});
  auto o = out.mutable_data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = x[i * n + k];
      for (std::size_t j = 0; j < p; ++j) o[i * p + j] += aik * y[k * p + j];
    }
  }
  if (Tape* tape = tracking_tape({&a, &b})) {
    tape->record(out, [a, b, m, n, p](std::span<const double> g) mutable {
      auto x = a.data();
      auto y = b.data();
      if (a.requires_grad()) {
        auto da = a.grad_buffer();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t k = 0; k < n; ++k) {
            double acc = 0.0;
            for (std::size_t j = 0; j < p; ++j) acc += g[i * p + j] * y[k * p + j];
            da[i * n + k] += acc;
          }
      }
      if (b.requires_grad()) {
        auto db = b.grad_buffer();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t k = 0; k < n; ++k) {
            const double aik = x[i * n + k];
            for (std::size_t j = 0; j < p; ++j) db[k * p + j] += aik * g[i * p + j];
          }
      }
    });
  }
  return out;
}

namespace {

void matvec_backward(const Tensor& a, const Tensor& x, std::span<const double> g) {
  const std::size_t m = a.rows(), n = a.cols();
  auto w = a.data();
  auto v = x.data();
  if (a.requires_grad()) {
    auto da = a.grad_buffer();
    for (std::size_t i = 0; i < m; ++i) {
      const double gi = g[i];
      double* row = da.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += gi * v[j];
    }
  }
  if (x.requires_grad()) {
    auto dx = x.grad_buffer();
    for (std::size_t i = 0; i < m; ++i) {
      const double gi = g[i];
      const double* row = w.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) dx[j] += gi * row[j];
    }
  }
}

void matvec_forward(const Tensor& a, const Tensor& x, std::span<double> o) {
  const std::size_t m = a.rows(), n = a.cols();
  auto w = a.data();
  auto v = x.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = w.data() + i * n;
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += row[j] * v[j];
    o[i] += acc;
  }
}

}  // namespace

Tensor matvec(const Tensor& a, const Tensor& x) {
  require_matrix("matvec", a);
  require_vector("matvec", x);
  if (a.cols() != x.size()) shape_error("matvec", a, x);
  Tensor out = Tensor::zeros({a.rows()});
  matvec_forward(a, x, out.mutable_data());
  if (Tape* tape = tracking_tape({&a, &x})) {
    tape->record(out, [a, x](std::span<const double> g) mutable { matvec_backward(a, x, g); });
  }
  return out;
}

Tensor affine(const Tensor& weight, const Tensor& x, const Tensor& bias) {
  require_matrix("affine", weight);
  require_vector("affine", x);
  require_vector("affine", bias);
  if (weight.cols() != x.size()) shape_error("affine", weight, x);
  if (weight.rows() != bias.size()) shape_error("affine", weight, bias);
  Tensor out = Tensor::from({bias.size()}, std::vector<double>(bias.data().begin(), bias.data().end()));
  matvec_forward(weight, x, out.mutable_data());
  if (Tape* tape = tracking_tape({&weight, &x, &bias})) {
    tape->record(out, [weight, x, bias](std::span<const double> g) mutable {
      matvec_backward(weight, x, g);
      accumulate(bias, g);
    });
  }
  return out;
}

Tensor vecmat(const Tensor& x, const Tensor& a) {
  require_vector("vecmat", x);
  require_matrix("vecmat", a);
  if (a.rows() != x.size()) shape_error("vecmat", x, a);
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out = Tensor::zeros({n});
  auto o = out.mutable_data();
  auto v = x.data();
  auto w = a.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = w.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) o[j] += v[i] * row[j];
  }
  if (Tape* tape = tracking_tape({&x, &a})) {
    tape->record(out, [x, a, m, n](std::span<const double> g) mutable {
      auto v = x.data();
      auto w = a.data();
      if (x.requires_grad()) {
        auto dx = x.grad_buffer();
        for (std::size_t i = 0; i < m; ++i) {
          const double* row = w.data() + i * n;
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += row[j] * g[j];
          dx[i] += acc;
        }
      }
      if (a.requires_grad()) {
        auto da = a.grad_buffer();
        for (std::size_t i = 0; i < m; ++i) {
          double* row = da.data() + i * n;
          for (std::size_t j = 0; j < n; ++j) row[j] += v[i] * g[j];
        }
      }
    });
  }
  return out;
}

Tensor softmax_row(const Tensor& x) {
  require_vector("softmax_row", x);
  auto v = x.data();
  const double peak = *std::max_element(v.begin(), v.end());
  Tensor out = Tensor::zeros(x.shape());
  auto o = out.mutable_data();
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    o[i] = std::exp(v[i] - peak);
    total += o[i];
  }
  for (double& e : o) e /= total;
  if (Tape* tape = tracking_tape({&x})) {
    tape->record(out, [x, out](std::span<const double> g) mutable {
      auto y = out.data();
      double gy = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) gy += g[i] * y[i];
      auto dx = x.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] += y[i] * (g[i] - gy);
    });
  }
  return out;
}

Tensor sum(const Tensor& x) {
  require_defined("sum", x);
  double total = 0.0;
  for (double v : x.data()) total += v;
  Tensor out = Tensor::scalar(total);
  if (Tape* tape = tracking_tape({&x})) {
    tape->record(out, [x](std::span<const double> g) mutable {
      auto dx = x.grad_buffer();
      for (double& d : dx) d += g[0];
    });
  }
  return out;
}

Tensor dot(const Tensor& x, const Tensor& y) {
  require_same_shape("dot", x, y);
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) total += x[i] * y[i];
  Tensor out = Tensor::scalar(total);
  if (Tape* tape = tracking_tape({&x, &y})) {
    tape->record(out, [x, y](std::span<const double> g) mutable {
      if (x.requires_grad()) {
        auto dx = x.grad_buffer();
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g[0] * y[i];
      }
      if (y.requires_grad()) {
        auto dy = y.grad_buffer();
        for (std::size_t i = 0; i < dy.size(); ++i) dy[i] += g[0] * x[i];
      }
    });
  }
  return out;
}

Tensor nll(const Tensor& probs, std::size_t target) {
  require_vector("nll", probs);
  if (target >= probs.size()) {
    throw DimensionError("nll: target " + std::to_string(target) + " outside " +
                         shape_string(probs.shape()));
  }
  const double p = std::max(probs[target], std::numeric_limits<double>::min());
  Tensor out = Tensor::scalar(-std::log(p));
  if (Tape* tape = tracking_tape({&probs})) {
    tape->record(out, [probs, target, p](std::span<const double> g) mutable {
      probs.grad_buffer()[target] -= g[0] / p;
    });
  }
  return out;
}

Tensor slot_blend(const Tensor& slots, const Tensor& weight, const Tensor& value) {
  require_matrix("slot_blend", slots);
  require_vector("slot_blend", weight);
  require_vector("slot_blend", value);
  if (weight.size() != slots.rows()) shape_error("slot_blend", slots, weight);
  if (value.size() != slots.cols()) shape_error("slot_blend", slots, value);
  const std::size_t l = slots.rows(), k = slots.cols();
  Tensor out = Tensor::zeros(slots.shape());
  auto o = out.mutable_data();
  auto m = slots.data();
  auto z = weight.data();
  auto v = value.data();
  // std::lerp is exact at both endpoints and when the row already equals
  // value, and never leaves [min, max] of the two for weights in [0, 1].
  for (std::size_t i = 0; i < l; ++i)
    for (std::size_t j = 0; j < k; ++j) o[i * k + j] = std::lerp(m[i * k + j], v[j], z[i]);
  if (Tape* tape = tracking_tape({&slots, &weight, &value})) {
    tape->record(out, [slots, weight, value, l, k](std::span<const double> g) mutable {
      auto m = slots.data();
      auto z = weight.data();
      auto v = value.data();
      if (slots.requires_grad()) {
        auto dm = slots.grad_buffer();
        for (std::size_t i = 0; i < l; ++i)
          for (std::size_t j = 0; j < k; ++j) dm[i * k + j] += (1.0 - z[i]) * g[i * k + j];
      }
      if (weight.requires_grad()) {
        auto dz = weight.grad_buffer();
        for (std::size_t i = 0; i < l; ++i) {
          double acc = 0.0;
          for (std::size_t j = 0; j < k; ++j) acc += g[i * k + j] * (v[j] - m[i * k + j]);
          dz[i] += acc;
        }
      }
      if (value.requires_grad()) {
        auto dv = value.grad_buffer();
        for (std::size_t i = 0; i < l; ++i)
          for (std::size_t j = 0; j < k; ++j) dv[j] += z[i] * g[i * k + j];
      }
    });
  }
  return out;
}

std::size_t argmax(const Tensor& x) {
  require_defined("argmax", x);
  auto v = x.data();
  // max_element keeps the first maximum, so ties resolve to the lowest index.
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace nmf
