#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace nmf {

// Rank-1 ({n}) or rank-2 ({rows, cols}) shape. Every dimension is positive.
using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

namespace detail {
struct TensorStorage {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a gradient is first accumulated
  bool requires_grad = false;
};
}  // namespace detail

/// Dense row-major array of doubles with an optional gradient buffer.
///
/// Tensor is a handle: copies share storage, the way a tape needs to refer to
/// the same buffer from several recorded operations. Use clone() for an
/// independent copy.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor filled(Shape shape, double value);
  static Tensor from(Shape shape, std::vector<double> data);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor scalar(double value);

  bool defined() const { return static_cast<bool>(storage_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const;
  // Direct write access. Only for leaves (parameters, inputs); mutating a
  // tensor that a tape has recorded invalidates its backward rules.
  std::span<double> mutable_data();
  double operator[](std::size_t i) const { return data()[i]; }
  double at(std::size_t r, std::size_t c) const;
  double item() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool flag);

  bool has_grad() const;
  std::span<const double> grad() const;
  // Gradient buffer, allocated as zeros on first use. Gradients live in the
  // shared storage, so this is available through const handles.
  std::span<double> grad_buffer() const;
  void zero_grad();
  void clear_grad();

  Tensor clone() const;
  bool shares_storage(const Tensor& other) const { return storage_ == other.storage_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorStorage> storage) : storage_(std::move(storage)) {}
  std::shared_ptr<detail::TensorStorage> storage_;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

bool bitwise_equal(const Tensor& a, const Tensor& b);

}  // namespace nmf
