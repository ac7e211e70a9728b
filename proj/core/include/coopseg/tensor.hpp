#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "coopseg/config.hpp"

COOPSEG_NAMESPACE_BEGIN

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major array with an optional gradient buffer.
///
/// Tensor is a shared handle: copies refer to the same storage, which is what
/// lets a recorded graph route gradients back to the tensors it was given.
/// Data is treated as immutable once an op has produced it; only parameters
/// are updated in place (by the optimizer, through mutable_data()).
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, real value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<real> values, bool requires_grad = false);
  static Tensor scalar(real value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }

  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;

  std::span<const real> data() const;
  std::span<real> mutable_data();
  real item() const;

  bool requires_grad() const;

  bool has_grad() const;
  /// Gradient buffers stay writable through const handles; a zero buffer is
  /// allocated on first access.
  std::span<real> grad() const;
  void zero_grad() const;

  /// Copy of the data with no gradient tracking. Cuts the graph.
  Tensor detach() const;
  /// Deep copy, including requires_grad but not the gradient.
  Tensor clone() const;

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  struct Impl {
    Shape shape;
    std::vector<real> data;
    std::vector<real> grad;
    bool requires_grad = false;
  };

  explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}
  Impl& impl() const;

  std::shared_ptr<Impl> impl_;
};

/// Per-pixel class ids laid out [N, H, W].
struct LabelMap {
  std::size_t n = 0;
  std::size_t h = 0;
  std::size_t w = 0;
  std::vector<std::uint8_t> values;

  std::size_t size() const { return values.size(); }
};

/// Throws NumericalError naming `where` if any value is NaN or infinite.
void check_finite(std::span<const real> values, const char* where);

COOPSEG_NAMESPACE_END
