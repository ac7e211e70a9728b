#include <gtest/gtest.h>

#include <cmath>

#include "coopseg/error.hpp"
#include "coopseg/graph.hpp"
#include "coopseg/network.hpp"
#include "coopseg/spec_io.hpp"
#include "test_util.hpp"

using namespace coopseg;
using coopseg::testing::bit_equal;
using coopseg::testing::max_abs_diff;
using coopseg::testing::random_tensor;
using coopseg::testing::splice_weights;

TEST(DefaultSpec, BlocksAndChannelChain) {
  const NetworkSpec spec = default_spec(3, 4);
  ASSERT_EQ(spec.blocks.size(), 10u);
  EXPECT_EQ(std::get<Head>(spec.blocks.back().kind).num_classes, 4);
  std::vector<int> chain{spec.in_channels};
  for (int c : spec.out_channels()) chain.push_back(c);
  EXPECT_EQ(chain, (std::vector<int>{3, 16, 16, 32, 32, 64, 64, 32, 32, 16, 4}));
  EXPECT_EQ(spec.natural_in_channels(), (std::vector<int>{3, 16, 16, 32, 32, 64, 64, 32, 32, 16}));
}

TEST(DefaultSpec, ForwardShape) {
  const NetworkSpec spec = default_spec(3, 4);
  const Network net = init_params(spec, {}, 1);
  Rng rng(1);
  Graph g = Graph::inference();
  auto r = net.forward_with_taps(g, random_tensor(rng, {1, 3, 64, 64}));
  EXPECT_EQ(r.logits.shape(), (Shape{1, 4, 64, 64}));
}

TEST(InitParams, DeterministicInSeed) {
  const NetworkSpec spec = default_spec(3, 4);
  const auto a = init_params(spec, {}, 7).parameters();
  const auto b = init_params(spec, {}, 7).parameters();
  const auto c = init_params(spec, {}, 8).parameters();
  ASSERT_EQ(a.size(), b.size());
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_TRUE(bit_equal(a[i], b[i]));
    any_diff = any_diff || !bit_equal(a[i], c[i]);
  }
  EXPECT_TRUE(any_diff);
}

TEST(InitParams, HeStandardDeviation) {
  const Network net = init_params(default_spec(3, 4), {}, 3);
  const Tensor w = net.block_params("enc1")->weight;
  ASSERT_EQ(w.numel(), 432u);
  double ss = 0, mean = 0;
  for (real v : w.data()) mean += v;
  mean /= 432;
  for (real v : w.data()) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / 431), expected = std::sqrt(2.0 / 27.0);
  EXPECT_NEAR(sd, expected, 0.2 * expected);
  for (real v : net.block_params("enc1")->bias.data()) EXPECT_EQ(v, 0);
}

TEST(InitParams, ParameterShapesFollowSpecAndOverrides) {
  const NetworkSpec spec = default_spec(3, 4);
  const Network net = init_params(spec, {{"dec1", 96}}, 1);
  EXPECT_EQ(net.block_params("dec1")->weight.shape(), (Shape{32, 96, 3, 3}));
  EXPECT_EQ(net.block_params("head")->weight.shape(), (Shape{4, 16, 1, 1}));
  EXPECT_EQ(net.block_params("pool1"), nullptr);
  EXPECT_EQ(net.in_channels(*spec.index_of("dec1")), 96);

  std::size_t expected = 0;
  const auto in = spec.natural_in_channels();
  const auto out = spec.out_channels();
  for (std::size_t i = 0; i < spec.blocks.size(); ++i) {
    if (const auto* c = std::get_if<ConvRelu>(&spec.blocks[i].kind)) {
      const int cin = spec.blocks[i].name == "dec1" ? 96 : in[i];
      expected += std::size_t(c->out_channels * cin * c->kernel * c->kernel + c->out_channels);
    } else if (std::holds_alternative<Head>(spec.blocks[i].kind)) {
      expected += std::size_t(out[i] * in[i] + out[i]);
    }
  }
  EXPECT_EQ(net.parameter_count(), expected);
}

TEST(InitParams, OverrideErrors) {
  const NetworkSpec spec = default_spec(3, 4);
  EXPECT_THROW(init_params(spec, {{"nope", 10}}, 1), ConfigError);
  EXPECT_THROW(init_params(spec, {{"pool1", 32}}, 1), ConfigError);
  EXPECT_THROW(init_params(spec, {{"dec1", 63}}, 1), ConfigError);
}

TEST(Forward, TapsCoverEveryBlockWithChainShapes) {
  const NetworkSpec spec = default_spec(3, 5);
  const Network net = init_params(spec, {}, 2);
  Rng rng(2);
  Graph g = Graph::inference();
  auto r = net.forward_with_taps(g, random_tensor(rng, {2, 3, 16, 24}));
  ASSERT_EQ(r.taps.size(), spec.blocks.size());
  const auto chain = spatial_chain(spec, 16, 24);
  const auto out = spec.out_channels();
  for (std::size_t i = 0; i < spec.blocks.size(); ++i) {
    const auto& t = r.taps.at(spec.blocks[i].name);
    EXPECT_EQ(t.shape(), (Shape{2, std::size_t(out[i]), chain[i].first, chain[i].second})) << spec.blocks[i].name;
  }
  EXPECT_TRUE(bit_equal(r.taps.at("head"), r.logits));
}

TEST(Forward, ZeroWeightSpliceMatchesPlainNetwork) {
  const NetworkSpec spec = default_spec(3, 4);
  const Network plain = init_params(spec, {}, 1);
  const Network wide = init_params(spec, {{"dec1", 96}}, 2);
  splice_weights(plain, wide);
  Rng rng(5);
  const Tensor x = random_tensor(rng, {2, 3, 16, 16});
  Graph g = Graph::inference();
  const Tensor ref = plain.forward_with_taps(g, x).logits;
  // Zero tensor and random tensor injections both vanish against zero weights.
  for (const Tensor& inj : {Tensor::zeros({2, 32, 8, 8}), random_tensor(rng, {2, 32, 8, 8})}) {
    auto r = wide.forward_with_taps(g, x, {{"dec1", inj}});
    EXPECT_LT(max_abs_diff(r.logits, ref), 1e-6);
  }
}

TEST(Forward, DoubledReceivingBlockAtDec1) {
  const NetworkSpec spec = default_spec(3, 4);
  const Network net = init_params(spec, {{"dec1", 128}}, 1);
  Rng rng(3);
  Graph g = Graph::inference();
  auto r = net.forward_with_taps(g, random_tensor(rng, {2, 3, 64, 64}), {{"dec1", random_tensor(rng, {2, 64, 32, 32})}});
  EXPECT_EQ(r.logits.shape(), (Shape{2, 4, 64, 64}));
}

TEST(Forward, InjectionLocality) {
  const NetworkSpec spec = default_spec(3, 4);
  Rng rng(8);
  const Tensor x = random_tensor(rng, {1, 3, 16, 16});
  const auto natural = spec.natural_in_channels();
  const auto chain = spatial_chain(spec, 16, 16);
  for (std::size_t t = 0; t < spec.blocks.size(); ++t) {
    if (!has_params(spec.blocks[t].kind)) continue;
    const auto& name = spec.blocks[t].name;
    const Network plain = init_params(spec, {}, 4);
    const Network wide = init_params(spec, {{name, natural[t] + 5}}, 9);
    splice_weights(plain, wide);
    const auto [h, w] = t == 0 ? std::pair<std::size_t, std::size_t>{16, 16} : chain[t - 1];
    Graph g = Graph::inference();
    auto a = plain.forward_with_taps(g, x);
    auto b = wide.forward_with_taps(g, x, {{name, random_tensor(rng, {1, 5, h, w})}});
    for (std::size_t i = 0; i < t; ++i) {
      EXPECT_TRUE(bit_equal(a.taps.at(spec.blocks[i].name), b.taps.at(spec.blocks[i].name)))
          << "tap " << spec.blocks[i].name << " with injection at " << name;
    }
  }
}

// Forward succeeds iff the override equals natural + injected channels.
TEST(Forward, OverrideArithmetic) {
  const NetworkSpec spec = default_spec(3, 4);
  const auto natural = spec.natural_in_channels();
  const auto chain = spatial_chain(spec, 16, 16);
  Rng rng(12);
  const Tensor x = random_tensor(rng, {1, 3, 16, 16});
  std::vector<std::size_t> receivers;
  for (std::size_t i = 1; i < spec.blocks.size(); ++i) {
    if (has_params(spec.blocks[i].kind)) receivers.push_back(i);
  }
  for (int trial = 0; trial < 24; ++trial) {
    const auto t = receivers[std::size_t(rng.uniform_int(0, std::int64_t(receivers.size()) - 1))];
    const int injected = int(rng.uniform_int(1, 8));
    const int override_in = natural[t] + injected + int(rng.uniform_int(-1, 1));
    const Network net = init_params(spec, {{spec.blocks[t].name, override_in}}, 1);
    Graph g = Graph::inference();
    const TapMap inj{{spec.blocks[t].name,
                      Tensor::zeros({1, std::size_t(injected), chain[t - 1].first, chain[t - 1].second})}};
    if (override_in == natural[t] + injected) {
      EXPECT_NO_THROW(net.forward_with_taps(g, x, inj));
    } else {
      EXPECT_THROW(net.forward_with_taps(g, x, inj), ShapeError);
    }
  }
}

TEST(Forward, Errors) {
  const NetworkSpec spec = default_spec(3, 4);
  const Network net = init_params(spec, {{"dec1", 96}}, 1);
  Graph g = Graph::inference();
  const Tensor x = Tensor::zeros({1, 3, 16, 16});
  EXPECT_THROW(net.forward_with_taps(g, Tensor::zeros({1, 2, 16, 16})), ShapeError);
  EXPECT_THROW(net.forward_with_taps(g, x, {{"pool1", Tensor::zeros({1, 4, 16, 16})}}), ShapeError);
  EXPECT_THROW(net.forward_with_taps(g, x, {{"nowhere", Tensor::zeros({1, 4, 16, 16})}}), ShapeError);
  EXPECT_THROW(net.forward_with_taps(g, x, {{"dec1", Tensor::zeros({1, 32, 4, 4})}}), ShapeError);
  // Override present but nothing injected.
  EXPECT_THROW(net.forward_with_taps(g, x), ShapeError);
}

TEST(Forward, CloneIsIndependent) {
  const Network net = init_params(default_spec(3, 4), {}, 1);
  const Network copy = net.clone();
  Tensor w = copy.block_params("enc1")->weight;
  w.mutable_data()[0] += 1;
  EXPECT_NE(net.block_params("enc1")->weight.data()[0], copy.block_params("enc1")->weight.data()[0]);
}

TEST(SpecValidation, Errors) {
  NetworkSpec base = default_spec(3, 4);
  auto expect_bad = [](NetworkSpec s) { EXPECT_THROW(s.validate(), ConfigError); };
  {
    auto s = base;
    s.blocks[2].name = "enc1";
    expect_bad(s);
  }
  {
    auto s = base;
    std::swap(s.blocks[8], s.blocks[9]);
    expect_bad(s);
  }
  {
    auto s = base;
    s.blocks.back().kind = Head{5};
    expect_bad(s);
  }
  {
    auto s = base;
    s.blocks[0].name = "method";
    expect_bad(s);
  }
  {
    auto s = base;
    s.blocks[0].name = "a b";
    expect_bad(s);
  }
  {
    auto s = base;
    s.blocks.insert(s.blocks.begin(), BlockSpec{"head0", Head{4}});
    expect_bad(s);
  }
  {
    auto s = base;
    s.num_classes = 1;
    expect_bad(s);
  }
}

TEST(SpatialChain, PoolDivisibility) {
  EXPECT_THROW(spatial_chain(default_spec(3, 4), 62, 64), ShapeError);
  EXPECT_EQ(spatial_chain(default_spec(3, 4), 64, 32)[4], (std::pair<std::size_t, std::size_t>{16, 8}));
}

TEST(SpecText, RoundTrip) {
  NetworkSpec spec = default_spec(3, 6);
  spec.blocks[0].kind = ConvRelu{8, 5, 2};
  const std::string text = format_spec(spec);
  EXPECT_EQ(parse_spec(text), spec);
  EXPECT_EQ(format_spec(parse_spec(text)), text);
}

TEST(SpecText, ParsesCommentsAndBlankLines) {
  const NetworkSpec spec = parse_spec(
      "# tiny\n"
      "in_channels 1\n"
      "num_classes 2\n"
      "\n"
      "c1 conv 4 3 1   # first\n"
      "p pool 2\n"
      "u upsample 2\n"
      "out head 2\n");
  ASSERT_EQ(spec.blocks.size(), 4u);
  EXPECT_EQ(std::get<ConvRelu>(spec.blocks[0].kind), (ConvRelu{4, 3, 1}));
  EXPECT_EQ(spec.in_channels, 1);
}

TEST(SpecText, Errors) {
  EXPECT_THROW(parse_spec("num_classes 2\nout head 2\n"), ConfigError);
  EXPECT_THROW(parse_spec("in_channels 1\nout head 2\n"), ConfigError);
  EXPECT_THROW(parse_spec("in_channels 1\nnum_classes 2\nc1 dense 4\nout head 2\n"), ConfigError);
  EXPECT_THROW(parse_spec("in_channels x\nnum_classes 2\nout head 2\n"), ConfigError);
  EXPECT_THROW(parse_spec("in_channels 1\nnum_classes 2\nc1 conv 4\nout head 2\n"), ConfigError);
  EXPECT_THROW(load_spec_file("/nonexistent/spec.txt"), ConfigError);
}
