#include "coopseg/coop.hpp"

#include <iostream>

#include "coopseg/error.hpp"
#include "coopseg/ops.hpp"

COOPSEG_NAMESPACE_BEGIN

std::string_view method_name(Method m) {
  switch (m) {
    case Method::Single:
      return "single";
    case Method::Ensemble:
      return "ensemble";
    case Method::SameLayer:
      return "same";
    case Method::MultiLayer:
      return "multi";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  if (name == "single") return Method::Single;
  if (name == "ensemble") return Method::Ensemble;
  if (name == "same") return Method::SameLayer;
  if (name == "multi") return Method::MultiLayer;
  throw ConfigError("unknown method '" + std::string(name) + "' (expected single|ensemble|same|multi)");
}

Method ConnectionScheme::method() const {
  return static_cast<Method>(variant.index());
}

ConnectionScheme default_scheme(Method m, const NetworkSpec& spec) {
  switch (m) {
    case Method::Single:
      return ConnectionScheme::single();
    case Method::Ensemble:
      return ConnectionScheme::ensemble();
    case Method::SameLayer: {
      std::vector<std::string> taps;
      for (std::size_t i = 1; i < spec.blocks.size(); ++i) {
        if (std::holds_alternative<ConvRelu>(spec.blocks[i].kind)) taps.push_back(spec.blocks[i].name);
      }
      if (taps.empty()) throw ConfigError("spec has no conv block that can receive a same-layer connection");
      return ConnectionScheme::same_layer(std::move(taps));
    }
    case Method::MultiLayer: {
      // Target: first conv after an upsample (the decoder entry), else the last conv.
      std::optional<std::size_t> target;
      bool seen_up = false;
      for (std::size_t i = 0; i < spec.blocks.size(); ++i) {
        const auto& kind = spec.blocks[i].kind;
        if (std::holds_alternative<Upsample>(kind)) seen_up = true;
        if (seen_up && std::holds_alternative<ConvRelu>(kind)) {
          target = i;
          break;
        }
      }
      if (!target) {
        for (std::size_t i = spec.blocks.size(); i-- > 0;) {
          if (std::holds_alternative<ConvRelu>(spec.blocks[i].kind)) {
            target = i;
            break;
          }
        }
      }
      std::vector<std::string> sources;
      if (target) {
        for (std::size_t i = 0; i < *target; ++i) {
          if (std::holds_alternative<ConvRelu>(spec.blocks[i].kind)) sources.push_back(spec.blocks[i].name);
        }
      }
      if (sources.empty()) throw ConfigError("spec has no conv blocks to serve as multi-layer sources");
      return ConnectionScheme::multi_layer(std::move(sources), spec.blocks[*target].name);
    }
  }
  throw ConfigError("unknown method");
}

void validate_scheme(const NetworkSpec& spec, const ConnectionScheme& scheme) {
  if (const auto* s = std::get_if<SameLayerScheme>(&scheme.variant)) {
    if (s->taps.empty()) throw ConfigError("same-layer scheme needs at least one tap");
    std::vector<std::string> seen;
    for (const auto& t : s->taps) {
      const auto i = spec.require_index(t);
      if (!has_params(spec.blocks[i].kind)) {
        throw ConfigError("same-layer tap '" + t + "' is not a conv or head block");
      }
      if (i == 0) throw ConfigError("same-layer tap '" + t + "' has no upstream feature to receive");
      for (const auto& prev : seen) {
        if (prev == t) throw ConfigError("same-layer tap '" + t + "' listed twice");
      }
      seen.push_back(t);
    }
  } else if (const auto* m = std::get_if<MultiLayerScheme>(&scheme.variant)) {
    if (m->sources.empty()) throw ConfigError("multi-layer scheme needs at least one source tap");
    for (const auto& s : m->sources) spec.require_index(s);
    const auto t = spec.require_index(m->target);
    if (std::holds_alternative<Head>(spec.blocks[t].kind)) {
      throw ConfigError("multi-layer target '" + m->target + "' cannot be the head");
    }
    if (!has_params(spec.blocks[t].kind)) {
      throw ConfigError("multi-layer target '" + m->target + "' is not a conv block");
    }
  }
}

ChannelOverrides bottom_overrides(const NetworkSpec& spec, const ConnectionScheme& scheme) {
  validate_scheme(spec, scheme);
  ChannelOverrides out;
  const auto natural = spec.natural_in_channels();
  const auto produced = spec.out_channels();
  if (const auto* s = std::get_if<SameLayerScheme>(&scheme.variant)) {
    for (const auto& t : s->taps) {
      const auto i = spec.require_index(t);
      out[t] = 2 * natural[i];
    }
  } else if (const auto* m = std::get_if<MultiLayerScheme>(&scheme.variant)) {
    const auto t = spec.require_index(m->target);
    int width = natural[t];
    for (const auto& s : m->sources) width += produced[spec.require_index(s)];
    out[m->target] = width;
  }
  return out;
}

std::vector<Tensor> CoopModel::parameters() const {
  auto params = top.parameters();
  if (bottom) {
    auto b = bottom->parameters();
    params.insert(params.end(), b.begin(), b.end());
  }
  return params;
}

std::size_t CoopModel::parameter_count() const {
  return top.parameter_count() + (bottom ? bottom->parameter_count() : 0);
}

CoopModel build_coop_model(const NetworkSpec& spec, const ConnectionScheme& scheme, std::uint64_t seed1,
                           std::uint64_t seed2) {
  spec.validate();
  const auto overrides = bottom_overrides(spec, scheme);
  if (scheme.two_networks() && seed1 == seed2) {
    std::clog << "warning: top and bottom networks share seed " << seed1 << '\n';
  }
  CoopModel model{spec, scheme, init_params(spec, {}, seed1), std::nullopt};
  if (scheme.two_networks()) model.bottom = init_params(spec, overrides, seed2);
  return model;
}

Tensor aggregate_source_taps(Graph& g, const TapMap& taps, const std::vector<std::string>& sources,
                             std::size_t target_h, std::size_t target_w) {
  if (sources.empty()) throw ConfigError("aggregate_source_taps: empty source list");
  std::optional<Tensor> acc;
  for (const auto& name : sources) {
    auto it = taps.find(name);
    if (it == taps.end()) throw ConfigError("aggregate_source_taps: no tap named '" + name + "'");
    Tensor t = it->second;
    if (t.rank() != 4) throw ShapeError("aggregate_source_taps: tap '" + name + "' is not [N,C,H,W]");
    if (t.dim(2) != target_h || t.dim(3) != target_w) {
      t = upsample_bilinear(g, t, static_cast<int>(target_h), static_cast<int>(target_w));
    }
    acc = acc ? concat_channels(g, *acc, t) : t;
  }
  return *acc;
}

CoopOutput coop_forward(Graph& g, const CoopModel& model, const Tensor& images) {
  CoopOutput out;
  auto top = model.top.forward_with_taps(g, images);
  out.logits_top = top.logits;
  out.top_taps = std::move(top.taps);
  if (!model.bottom) return out;

  const auto& spec = model.spec;
  auto send = [&](Tensor t) { return model.scheme.detach_gradients ? t.detach() : t; };
  // Feature entering block i of the top network.
  auto top_input_of = [&](std::size_t i) -> const Tensor& {
    return i == 0 ? images : out.top_taps.at(spec.blocks[i - 1].name);
  };

  TapMap injections;
  if (const auto* s = std::get_if<SameLayerScheme>(&model.scheme.variant)) {
    for (const auto& t : s->taps) {
      injections.emplace(t, send(top_input_of(spec.require_index(t))));
    }
  } else if (const auto* m = std::get_if<MultiLayerScheme>(&model.scheme.variant)) {
    const Tensor& local = top_input_of(spec.require_index(m->target));
    Tensor agg = aggregate_source_taps(g, out.top_taps, m->sources, local.dim(2), local.dim(3));
    injections.emplace(m->target, send(agg));
  }
  out.logits_bottom = model.bottom->forward_with_taps(g, images, injections).logits;
  return out;
}

JointLoss joint_loss(Graph& g, const Tensor& logits_top, const std::optional<Tensor>& logits_bottom,
                     const LabelMap& labels) {
  JointLoss loss;
  loss.loss1 = softmax_cross_entropy(g, logits_top, labels);
  if (logits_bottom) {
    loss.loss2 = softmax_cross_entropy(g, *logits_bottom, labels);
    loss.total = add(g, loss.loss1, loss.loss2);
  } else {
    loss.loss2 = Tensor::scalar(real(0));
    loss.total = loss.loss1;
  }
  return loss;
}

Tensor ensemble_predict(const Tensor& logits_top, const Tensor& logits_bottom) {
  if (logits_top.shape() != logits_bottom.shape()) {
    throw ShapeError("ensemble_predict: shape mismatch " + shape_str(logits_top.shape()) + " vs " +
                     shape_str(logits_bottom.shape()));
  }
  const Tensor pa = softmax_channels(logits_top);
  const Tensor pb = softmax_channels(logits_bottom);
  auto a = pa.data();
  auto b = pb.data();
  std::vector<real> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = real(0.5) * (a[i] + b[i]);
  return Tensor::from(logits_top.shape(), std::move(out));
}

COOPSEG_NAMESPACE_END
