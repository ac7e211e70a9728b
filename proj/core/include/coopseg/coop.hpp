#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "coopseg/config.hpp"
#include "coopseg/graph.hpp"
#include "coopseg/network.hpp"
#include "coopseg/tensor.hpp"

COOPSEG_NAMESPACE_BEGIN

// Cooperative pairs of segmentation networks.
//
// A cooperative model holds two networks built from the same spec. The "top"
// network runs on its own; selected top features are sent one way into the
// "bottom" network, which concatenates them onto its own features before the
// receiving block. Both are trained at once on loss1 + loss2.
//
// Four topologies are supported:
//   single    one network, no bottom.
//   ensemble  two networks, no connections; predictions are averaged.
//   same      for each tap t, the top feature entering block t is concatenated
//             onto the bottom feature entering block t (receiving width x2).
//   multi     several top taps are resized to the target's input size,
//             concatenated in listed order and injected before the target.

enum class Method { Single, Ensemble, SameLayer, MultiLayer };

std::string_view method_name(Method m);
/// Accepts single|ensemble|same|multi.
Method parse_method(std::string_view name);

struct SingleScheme {
  bool operator==(const SingleScheme&) const = default;
};
struct EnsembleScheme {
  bool operator==(const EnsembleScheme&) const = default;
};
struct SameLayerScheme {
  /// Receiving blocks; each must be a conv or head block with a predecessor.
  std::vector<std::string> taps;
  bool operator==(const SameLayerScheme&) const = default;
};
struct MultiLayerScheme {
  /// Top taps to send, shallow to deep.
  std::vector<std::string> sources;
  /// Bottom block that receives the aggregate. Not the head.
  std::string target;
  bool operator==(const MultiLayerScheme&) const = default;
};

struct ConnectionScheme {
  std::variant<SingleScheme, EnsembleScheme, SameLayerScheme, MultiLayerScheme> variant;
  /// Cut the graph at the connection so loss2 never reaches top parameters.
  bool detach_gradients = false;

  Method method() const;
  bool two_networks() const { return method() != Method::Single; }

  bool operator==(const ConnectionScheme&) const = default;

  static ConnectionScheme single() { return {SingleScheme{}}; }
  static ConnectionScheme ensemble() { return {EnsembleScheme{}}; }
  static ConnectionScheme same_layer(std::vector<std::string> taps, bool detach = false) {
    return {SameLayerScheme{std::move(taps)}, detach};
  }
  static ConnectionScheme multi_layer(std::vector<std::string> sources, std::string target,
                                      bool detach = false) {
    return {MultiLayerScheme{std::move(sources), std::move(target)}, detach};
  }
};

/// Default tap choices used by the CLI when none are given.
ConnectionScheme default_scheme(Method m, const NetworkSpec& spec);

/// Throws ConfigError if the scheme references unknown taps or invalid targets.
void validate_scheme(const NetworkSpec& spec, const ConnectionScheme& scheme);

/// Widened input channels of the bottom network's receiving blocks.
ChannelOverrides bottom_overrides(const NetworkSpec& spec, const ConnectionScheme& scheme);

struct CoopModel {
  NetworkSpec spec;
  ConnectionScheme scheme;
  Network top;
  std::optional<Network> bottom;

  /// Top parameters followed by bottom parameters.
  std::vector<Tensor> parameters() const;
  std::size_t parameter_count() const;
};

/// Instantiates the top network from seed1 and, for two-network schemes, the
/// bottom network from seed2 with the overrides the scheme requires. Equal
/// seeds are allowed but produce a warning on stderr.
CoopModel build_coop_model(const NetworkSpec& spec, const ConnectionScheme& scheme, std::uint64_t seed1,
                           std::uint64_t seed2);

struct CoopOutput {
  Tensor logits_top;
  std::optional<Tensor> logits_bottom;
  TapMap top_taps;
};

CoopOutput coop_forward(Graph& g, const CoopModel& model, const Tensor& images);

/// Resizes each source tap to target_h x target_w and concatenates them in
/// the given order.
Tensor aggregate_source_taps(Graph& g, const TapMap& taps, const std::vector<std::string>& sources,
                             std::size_t target_h, std::size_t target_w);

struct JointLoss {
  Tensor loss1;
  Tensor loss2;  // scalar zero for single-network models
  Tensor total;  // loss1 + loss2
};

JointLoss joint_loss(Graph& g, const Tensor& logits_top, const std::optional<Tensor>& logits_bottom,
                     const LabelMap& labels);

/// Per-pixel mean of the two softmax distributions, [N,K,H,W].
Tensor ensemble_predict(const Tensor& logits_top, const Tensor& logits_bottom);

COOPSEG_NAMESPACE_END
