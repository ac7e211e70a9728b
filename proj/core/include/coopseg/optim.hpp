#pragma once

#include <vector>

#include "coopseg/config.hpp"
#include "coopseg/tensor.hpp"

COOPSEG_NAMESPACE_BEGIN

/// SGD with heavy-ball momentum:
///   v <- momentum * v + grad
///   p <- p - lr * v
/// Gradients are left untouched; callers zero them between steps.
class Sgd {
 public:
  Sgd(double lr, double momentum);

  /// `params` must be the same list, in the same order, on every call.
  void step(const std::vector<Tensor>& params);

  double lr() const { return lr_; }
  double momentum() const { return momentum_; }

 private:
  double lr_;
  double momentum_;
  std::vector<std::vector<real>> velocity_;
};

/// Scales every gradient by min(1, max_norm / n), where n is the L2 norm of
/// all gradients taken together. Returns n. Parameters without a gradient
/// buffer are skipped.
double clip_grad_norm(const std::vector<Tensor>& params, double max_norm);

/// Allocates missing gradient buffers and sets every gradient to zero.
void zero_grads(const std::vector<Tensor>& params);

COOPSEG_NAMESPACE_END
