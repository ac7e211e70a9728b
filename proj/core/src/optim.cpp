#include "coopseg/optim.hpp"

#include <cmath>

#include "coopseg/error.hpp"

COOPSEG_NAMESPACE_BEGIN

Sgd::Sgd(double lr, double momentum) : lr_(lr), momentum_(momentum) {
  if (!(lr > 0)) throw ConfigError("learning rate must be positive");
  if (!(momentum >= 0 && momentum < 1)) throw ConfigError("momentum must be in [0, 1)");
}

void Sgd::step(const std::vector<Tensor>& params) {
  if (velocity_.empty()) {
    velocity_.reserve(params.size());
    for (const auto& p : params) velocity_.emplace_back(p.numel(), real(0));
  }
  if (velocity_.size() != params.size()) {
    throw ConfigError("Sgd::step called with a different parameter list");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i];
    if (!p.has_grad()) {
      throw GraphError("parameter " + std::to_string(i) + " " + shape_str(p.shape()) +
                       " has no gradient buffer");
    }
    auto& v = velocity_[i];
    if (v.size() != p.numel()) throw ConfigError("Sgd::step parameter shape changed");
    auto g = p.grad();
    auto w = p.mutable_data();
    const auto mu = static_cast<real>(momentum_);
    const auto lr = static_cast<real>(lr_);
    for (std::size_t j = 0; j < w.size(); ++j) {
      v[j] = mu * v[j] + g[j];
      w[j] -= lr * v[j];
    }
  }
}

double clip_grad_norm(const std::vector<Tensor>& params, double max_norm) {
  if (!(max_norm > 0)) throw ConfigError("clip norm must be positive");
  double sq = 0;
  for (const auto& p : params) {
    if (!p.has_grad()) continue;
    for (real g : p.grad()) sq += double(g) * double(g);
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const auto scale = static_cast<real>(max_norm / norm);
    for (const auto& p : params) {
      if (!p.has_grad()) continue;
      for (real& g : p.grad()) g *= scale;
    }
  }
  return norm;
}

void zero_grads(const std::vector<Tensor>& params) {
  for (Tensor p : params) {
    p.grad();
    p.zero_grad();
  }
}

COOPSEG_NAMESPACE_END
