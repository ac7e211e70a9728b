#include "coopseg/network.hpp"

#include <cmath>
#include <set>

#include "coopseg/error.hpp"
#include "coopseg/ops.hpp"
#include "coopseg/rng.hpp"

COOPSEG_NAMESPACE_BEGIN

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

int kernel_of(const BlockKind& kind) {
  if (const auto* c = std::get_if<ConvRelu>(&kind)) return c->kernel;
  return 1;  // head
}

int padding_of(const BlockKind& kind) {
  if (const auto* c = std::get_if<ConvRelu>(&kind)) return c->padding;
  return 0;
}

int param_out_channels(const BlockKind& kind) {
  if (const auto* c = std::get_if<ConvRelu>(&kind)) return c->out_channels;
  return std::get<Head>(kind).num_classes;
}

}  // namespace

bool has_params(const BlockKind& kind) {
  return std::holds_alternative<ConvRelu>(kind) || std::holds_alternative<Head>(kind);
}

void NetworkSpec::validate() const {
  if (in_channels < 1) throw ConfigError("network spec: in_channels must be >= 1");
  if (num_classes < 2) throw ConfigError("network spec: num_classes must be >= 2");
  if (blocks.empty()) throw ConfigError("network spec: no blocks");
  std::set<std::string> names;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    if (b.name.empty()) throw ConfigError("network spec: block " + std::to_string(i) + " has no name");
    if (b.name.find_first_of(" \t\r\n#,") != std::string::npos) {
      throw ConfigError("network spec: block name '" + b.name + "' contains a separator character");
    }
    static const std::set<std::string> kReserved{"in_channels", "num_classes", "method",  "taps",
                                                 "target",      "detach",      "seed_top", "seed_bottom"};
    if (kReserved.count(b.name)) {
      throw ConfigError("network spec: block name '" + b.name + "' is reserved");
    }
    if (!names.insert(b.name).second) throw ConfigError("network spec: duplicate tap name '" + b.name + "'");
    const bool last = i + 1 == blocks.size();
    std::visit(Overloaded{
                   [&](const ConvRelu& c) {
                     if (c.out_channels < 1 || c.kernel < 1 || c.padding < 0) {
                       throw ConfigError("network spec: block '" + b.name + "' has invalid conv arguments");
                     }
                     if (last) throw ConfigError("network spec: the last block must be the head");
                   },
                   [&](const Pool& p) {
                     if (p.k < 1) throw ConfigError("network spec: block '" + b.name + "' pool k < 1");
                     if (last) throw ConfigError("network spec: the last block must be the head");
                   },
                   [&](const Upsample& u) {
                     if (u.factor < 1) throw ConfigError("network spec: block '" + b.name + "' factor < 1");
                     if (last) throw ConfigError("network spec: the last block must be the head");
                   },
                   [&](const Head& h) {
                     if (!last) throw ConfigError("network spec: head block '" + b.name + "' must be last");
                     if (h.num_classes != num_classes) {
                       throw ConfigError("network spec: head has " + std::to_string(h.num_classes) +
                                         " classes but num_classes is " + std::to_string(num_classes));
                     }
                   },
               },
               b.kind);
  }
}

std::optional<std::size_t> NetworkSpec::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (blocks[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t NetworkSpec::require_index(const std::string& name) const {
  auto i = index_of(name);
  if (!i) throw ConfigError("unknown tap '" + name + "'");
  return *i;
}

std::vector<int> NetworkSpec::out_channels() const {
  std::vector<int> out;
  int c = in_channels;
  for (const auto& b : blocks) {
    if (has_params(b.kind)) c = param_out_channels(b.kind);
    out.push_back(c);
  }
  return out;
}

std::vector<int> NetworkSpec::natural_in_channels() const {
  std::vector<int> in;
  int c = in_channels;
  for (const auto& b : blocks) {
    in.push_back(c);
    if (has_params(b.kind)) c = param_out_channels(b.kind);
  }
  return in;
}

std::vector<std::pair<std::size_t, std::size_t>> spatial_chain(const NetworkSpec& spec, std::size_t h,
                                                               std::size_t w) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& b : spec.blocks) {
    std::visit(Overloaded{
                   [&](const ConvRelu& c) {
                     h = conv_out_size(h, static_cast<std::size_t>(c.kernel), 1, c.padding);
                     w = conv_out_size(w, static_cast<std::size_t>(c.kernel), 1, c.padding);
                   },
                   [&](const Pool& p) {
                     const auto k = static_cast<std::size_t>(p.k);
                     if (h % k || w % k) {
                       throw ShapeError("block '" + b.name + "': " + std::to_string(h) + "x" +
                                        std::to_string(w) + " not divisible by " + std::to_string(k));
                     }
                     h /= k;
                     w /= k;
                   },
                   [&](const Upsample& u) {
                     h *= static_cast<std::size_t>(u.factor);
                     w *= static_cast<std::size_t>(u.factor);
                   },
                   [&](const Head&) {},
               },
               b.kind);
    out.emplace_back(h, w);
  }
  return out;
}

NetworkSpec default_spec(int in_channels, int num_classes) {
  NetworkSpec spec;
  spec.in_channels = in_channels;
  spec.num_classes = num_classes;
  spec.blocks = {
      {"enc1", ConvRelu{16, 3, 1}}, {"pool1", Pool{2}},      {"enc2", ConvRelu{32, 3, 1}},
      {"pool2", Pool{2}},           {"mid", ConvRelu{64, 3, 1}}, {"up1", Upsample{2}},
      {"dec1", ConvRelu{32, 3, 1}}, {"up2", Upsample{2}},    {"dec2", ConvRelu{16, 3, 1}},
      {"head", Head{num_classes}},
  };
  spec.validate();
  return spec;
}

Network::Network(NetworkSpec spec, ChannelOverrides overrides, std::uint64_t seed,
                 std::vector<std::optional<BlockParams>> params)
    : spec_(std::move(spec)), overrides_(std::move(overrides)), seed_(seed), params_(std::move(params)) {
  if (params_.size() != spec_.blocks.size()) throw ConfigError("Network: one parameter slot per block");
}

int Network::in_channels(std::size_t block) const {
  const auto& name = spec_.blocks.at(block).name;
  if (auto it = overrides_.find(name); it != overrides_.end()) return it->second;
  return spec_.natural_in_channels()[block];
}

const BlockParams* Network::block_params(std::size_t block) const {
  const auto& p = params_.at(block);
  return p ? &*p : nullptr;
}

const BlockParams* Network::block_params(const std::string& name) const {
  return block_params(spec_.require_index(name));
}

std::vector<Tensor> Network::parameters() const {
  std::vector<Tensor> out;
  for (const auto& p : params_) {
    if (!p) continue;
    out.push_back(p->weight);
    out.push_back(p->bias);
  }
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : parameters()) n += t.numel();
  return n;
}

ForwardResult Network::forward_with_taps(Graph& g, const Tensor& input, const TapMap& injections) const {
  if (input.rank() != 4) throw ShapeError("network input must be [N,C,H,W], got " + shape_str(input.shape()));
  if (input.dim(1) != static_cast<std::size_t>(spec_.in_channels)) {
    throw ShapeError("network expects " + std::to_string(spec_.in_channels) + " input channels, got " +
                     std::to_string(input.dim(1)));
  }
  for (const auto& [name, t] : injections) {
    if (!spec_.index_of(name)) throw ShapeError("injection at unknown tap '" + name + "'");
  }

  ForwardResult result;
  Tensor x = input;
  for (std::size_t i = 0; i < spec_.blocks.size(); ++i) {
    const auto& block = spec_.blocks[i];
    if (auto it = injections.find(block.name); it != injections.end()) {
      if (!has_params(block.kind)) {
        throw ShapeError("cannot inject before '" + block.name + "': only conv and head blocks accept injections");
      }
      const Tensor& inj = it->second;
      if (inj.rank() != 4 || inj.dim(0) != x.dim(0) || inj.dim(2) != x.dim(2) || inj.dim(3) != x.dim(3)) {
        throw ShapeError("injection at '" + block.name + "' has shape " + shape_str(inj.shape()) +
                         " but the local feature is " + shape_str(x.shape()));
      }
      x = concat_channels(g, x, inj);
    }
    if (const auto* p = block_params(i)) {
      const auto expected = static_cast<std::size_t>(in_channels(i));
      if (x.dim(1) != expected) {
        throw ShapeError("block '" + block.name + "' expects " + std::to_string(expected) +
                         " input channels, got " + std::to_string(x.dim(1)));
      }
      x = conv2d(g, x, p->weight, p->bias, 1, padding_of(block.kind));
      if (std::holds_alternative<ConvRelu>(block.kind)) x = relu(g, x);
    } else if (const auto* pool = std::get_if<Pool>(&block.kind)) {
      x = max_pool2d(g, x, pool->k);
    } else {
      const int f = std::get<Upsample>(block.kind).factor;
      x = upsample_bilinear(g, x, static_cast<int>(x.dim(2)) * f, static_cast<int>(x.dim(3)) * f);
    }
    result.taps.emplace(block.name, x);
  }
  result.logits = x;
  return result;
}

Network Network::clone() const {
  std::vector<std::optional<BlockParams>> copy;
  for (const auto& p : params_) {
    if (p) {
      copy.emplace_back(BlockParams{p->weight.clone(), p->bias.clone()});
    } else {
      copy.emplace_back(std::nullopt);
    }
  }
  return Network(spec_, overrides_, seed_, std::move(copy));
}

Network init_params(const NetworkSpec& spec, const ChannelOverrides& overrides, std::uint64_t seed) {
  spec.validate();
  const auto natural = spec.natural_in_channels();
  for (const auto& [name, channels] : overrides) {
    const auto idx = spec.index_of(name);
    if (!idx) throw ConfigError("channel override for unknown block '" + name + "'");
    if (!has_params(spec.blocks[*idx].kind)) {
      throw ConfigError("channel override on '" + name + "', which has no parameters");
    }
    if (channels < natural[*idx]) {
      throw ConfigError("channel override for '" + name + "' (" + std::to_string(channels) +
                        ") is below its natural input width " + std::to_string(natural[*idx]));
    }
  }

  Rng rng(seed);
  std::vector<std::optional<BlockParams>> params;
  for (std::size_t i = 0; i < spec.blocks.size(); ++i) {
    const auto& block = spec.blocks[i];
    if (!has_params(block.kind)) {
      params.emplace_back(std::nullopt);
      continue;
    }
    int cin = natural[i];
    if (auto it = overrides.find(block.name); it != overrides.end()) cin = it->second;
    const auto cout = static_cast<std::size_t>(param_out_channels(block.kind));
    const auto k = static_cast<std::size_t>(kernel_of(block.kind));
    const auto fan_in = static_cast<std::size_t>(cin) * k * k;
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    std::vector<real> w(cout * fan_in);
    for (auto& v : w) v = static_cast<real>(rng.normal(0.0, stddev));
    params.emplace_back(BlockParams{
        Tensor::from({cout, static_cast<std::size_t>(cin), k, k}, std::move(w), true),
        Tensor::zeros({cout}, true),
    });
  }
  return Network(spec, overrides, seed, std::move(params));
}

COOPSEG_NAMESPACE_END
