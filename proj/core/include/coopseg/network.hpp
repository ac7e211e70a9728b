#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "coopseg/config.hpp"
#include "coopseg/graph.hpp"
#include "coopseg/tensor.hpp"

COOPSEG_NAMESPACE_BEGIN

/// 3x3-style convolution (stride 1) followed by ReLU.
struct ConvRelu {
  int out_channels = 0;
  int kernel = 3;
  int padding = 1;
  bool operator==(const ConvRelu&) const = default;
};

/// Non-overlapping max pooling.
struct Pool {
  int k = 2;
  bool operator==(const Pool&) const = default;
};

/// Bilinear upsampling by an integer factor.
struct Upsample {
  int factor = 2;
  bool operator==(const Upsample&) const = default;
};

/// 1x1 convolution producing per-class logits. Must be the last block.
struct Head {
  int num_classes = 0;
  bool operator==(const Head&) const = default;
};

using BlockKind = std::variant<ConvRelu, Pool, Upsample, Head>;

struct BlockSpec {
  std::string name;
  BlockKind kind;
  bool operator==(const BlockSpec&) const = default;
};

struct NetworkSpec {
  std::vector<BlockSpec> blocks;
  int in_channels = 0;
  int num_classes = 0;

  /// Throws ConfigError if names repeat, the head is missing or misplaced, or
  /// any hyperparameter is out of range.
  void validate() const;

  std::optional<std::size_t> index_of(const std::string& name) const;
  std::size_t require_index(const std::string& name) const;

  /// Input channels of every block when nothing is injected.
  std::vector<int> natural_in_channels() const;
  /// Output channels of every block.
  std::vector<int> out_channels() const;

  bool operator==(const NetworkSpec&) const = default;
};

/// True for blocks that own a weight and bias (ConvRelu and Head).
bool has_params(const BlockKind& kind);

/// Spatial size of every block output for an input of size h x w.
std::vector<std::pair<std::size_t, std::size_t>> spatial_chain(const NetworkSpec& spec,
                                                               std::size_t h, std::size_t w);

/// The bundled encoder-decoder:
/// enc1 conv16 > pool1 > enc2 conv32 > pool2 > mid conv64 > up1 x2 > dec1 conv32
/// > up2 x2 > dec2 conv16 > head.
NetworkSpec default_spec(int in_channels, int num_classes);

/// Block name -> widened input channel count.
using ChannelOverrides = std::map<std::string, int>;

/// Tap name -> tensor. A tap is the output of the block with that name.
using TapMap = std::map<std::string, Tensor>;

struct ForwardResult {
  Tensor logits;
  /// Every block's own output (before anything is injected downstream).
  TapMap taps;
};

struct BlockParams {
  Tensor weight;  // [Cout, Cin, K, K]
  Tensor bias;    // [Cout]
};

class Network {
 public:
  Network(NetworkSpec spec, ChannelOverrides overrides, std::uint64_t seed,
          std::vector<std::optional<BlockParams>> params);

  const NetworkSpec& spec() const { return spec_; }
  const ChannelOverrides& overrides() const { return overrides_; }
  std::uint64_t seed() const { return seed_; }

  /// Input channels of block i after overrides.
  int in_channels(std::size_t block) const;

  /// Parameters of block i, or nullptr for pool/upsample blocks.
  const BlockParams* block_params(std::size_t block) const;
  const BlockParams* block_params(const std::string& name) const;

  /// Weights and biases in block order.
  std::vector<Tensor> parameters() const;
  std::size_t parameter_count() const;

  /// Runs the blocks in order. An injection named after block t is
  /// concatenated onto that block's input before the block consumes it.
  ForwardResult forward_with_taps(Graph& g, const Tensor& input, const TapMap& injections = {}) const;

  /// Independent copy of all parameters.
  Network clone() const;

 private:
  NetworkSpec spec_;
  ChannelOverrides overrides_;
  std::uint64_t seed_;
  std::vector<std::optional<BlockParams>> params_;
};

/// He initialization: N(0, sqrt(2 / (Cin*K*K))) weights, zero biases.
/// Deterministic in `seed`.
Network init_params(const NetworkSpec& spec, const ChannelOverrides& overrides, std::uint64_t seed);

COOPSEG_NAMESPACE_END
