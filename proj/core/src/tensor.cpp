#include "coopseg/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "coopseg/error.hpp"

COOPSEG_NAMESPACE_BEGIN

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return filled(std::move(shape), real(0), requires_grad);
}

Tensor Tensor::filled(Shape shape, real value, bool requires_grad) {
  auto impl = std::make_shared<Impl>();
  impl->data.assign(shape_numel(shape), value);
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::from(Shape shape, std::vector<real> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("tensor shape " + shape_str(shape) + " needs " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  check_finite(values, "Tensor::from");
  auto impl = std::make_shared<Impl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(real value, bool requires_grad) {
  return from(Shape{}, {value}, requires_grad);
}

Tensor::Impl& Tensor::impl() const {
  if (!impl_) throw Error("use of an undefined tensor");
  return *impl_;
}

const Shape& Tensor::shape() const { return impl().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return impl().data.size(); }

std::span<const real> Tensor::data() const { return impl().data; }
std::span<real> Tensor::mutable_data() { return impl().data; }

real Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return impl().data[0];
}

bool Tensor::requires_grad() const { return impl().requires_grad; }

bool Tensor::has_grad() const { return !impl().grad.empty() || impl().data.empty(); }

std::span<real> Tensor::grad() const {
  auto& i = impl();
  if (i.grad.size() != i.data.size()) i.grad.assign(i.data.size(), real(0));
  return i.grad;
}

void Tensor::zero_grad() const {
  auto& g = impl().grad;
  std::fill(g.begin(), g.end(), real(0));
}

Tensor Tensor::detach() const {
  auto impl = std::make_shared<Impl>();
  impl->shape = shape();
  impl->data = this->impl().data;
  return Tensor(std::move(impl));
}

Tensor Tensor::clone() const {
  auto impl = std::make_shared<Impl>();
  impl->shape = shape();
  impl->data = this->impl().data;
  impl->requires_grad = requires_grad();
  return Tensor(std::move(impl));
}

void check_finite(std::span<const real> values, const char* where) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NumericalError(std::string("non-finite value in ") + where + " at index " +
                           std::to_string(i));
    }
  }
}

COOPSEG_NAMESPACE_END
