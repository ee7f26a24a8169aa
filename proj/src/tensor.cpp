#include "nmf/tensor.hpp"

#include <algorithm>
#include <cstring>
#include <functional>
#include <numeric>
#include <sstream>

#include "nmf/errors.hpp"

namespace nmf {

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace {

std::size_t element_count(const Shape& shape) {
  if (shape.empty() || shape.size() > 2) {
    throw DimensionError("tensor rank must be 1 or 2, got shape " + shape_string(shape));
  }
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape));
  }
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

Tensor Tensor::zeros(Shape shape) { return filled(std::move(shape), 0.0); }

Tensor Tensor::filled(Shape shape, double value) {
  auto storage = std::make_shared<detail::TensorStorage>();
  storage->data.assign(element_count(shape), value);
  storage->shape = std::move(shape);
  return Tensor(std::move(storage));
}

Tensor Tensor::from(Shape shape, std::vector<double> data) {
  if (element_count(shape) != data.size()) {
    throw DimensionError("shape " + shape_string(shape) + " needs " +
                         std::to_string(element_count(shape)) + " values, got " +
                         std::to_string(data.size()));
  }
  auto storage = std::make_shared<detail::TensorStorage>();
  storage->shape = std::move(shape);
  storage->data = std::move(data);
  return Tensor(std::move(storage));
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return from({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return from({rows, cols}, std::move(values));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

const Shape& Tensor::shape() const { return storage_->shape; }
std::size_t Tensor::size() const { return storage_->data.size(); }

std::size_t Tensor::rows() const { return rank() == 2 ? shape()[0] : 1; }
std::size_t Tensor::cols() const { return rank() == 2 ? shape()[1] : shape()[0]; }

std::span<const double> Tensor::data() const { return storage_->data; }
std::span<double> Tensor::mutable_data() { return storage_->data; }

double Tensor::at(std::size_t r, std::size_t c) const { return storage_->data[r * cols() + c]; }

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on non-scalar tensor of shape " + shape_string(shape()));
  return storage_->data[0];
}

bool Tensor::requires_grad() const { return storage_ && storage_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool flag) {
  storage_->requires_grad = flag;
  return *this;
}

bool Tensor::has_grad() const { return storage_ && !storage_->grad.empty(); }
std::span<const double> Tensor::grad() const { return storage_->grad; }

std::span<double> Tensor::grad_buffer() const {
  if (storage_->grad.empty()) storage_->grad.assign(storage_->data.size(), 0.0);
  return storage_->grad;
}

void Tensor::zero_grad() {
  if (!storage_->grad.empty()) std::fill(storage_->grad.begin(), storage_->grad.end(), 0.0);
}

void Tensor::clear_grad() {
  storage_->grad.clear();
  storage_->grad.shrink_to_fit();
}

Tensor Tensor::clone() const {
  auto storage = std::make_shared<detail::TensorStorage>(*storage_);
  return Tensor(std::move(storage));
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  return std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

}  // namespace nmf
