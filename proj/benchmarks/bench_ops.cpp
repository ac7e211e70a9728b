#include <benchmark/benchmark.h>

#include "coopseg/coop.hpp"
#include "coopseg/graph.hpp"
#include "coopseg/ops.hpp"
#include "coopseg/optim.hpp"
#include "coopseg/rng.hpp"

using namespace coopseg;

namespace {

Tensor random_tensor(Rng& rng, Shape shape, bool requires_grad = false) {
  std::vector<real> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<real>(rng.normal(0.0, 1.0));
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

LabelMap random_labels(Rng& rng, std::size_t n, std::size_t h, std::size_t w, int k) {
  LabelMap l{n, h, w, std::vector<std::uint8_t>(n * h * w)};
  for (auto& v : l.values) v = static_cast<std::uint8_t>(rng.uniform_int(0, k - 1));
  return l;
}

// Args: channels in, channels out, spatial size. Batch of 8, 3x3 kernel.
void BM_Conv2dForward(benchmark::State& state) {
  const auto cin = std::size_t(state.range(0)), cout = std::size_t(state.range(1)), hw = std::size_t(state.range(2));
  Rng rng(1);
  const Tensor x = random_tensor(rng, {8, cin, hw, hw});
  const Tensor w = random_tensor(rng, {cout, cin, 3, 3});
  const Tensor b = random_tensor(rng, {cout});
  for (auto _ : state) {
    Graph g = Graph::inference();
    benchmark::DoNotOptimize(conv2d(g, x, w, b, 1, 1));
  }
  state.SetItemsProcessed(state.iterations() * std::int64_t(8 * cout * cin * 9 * hw * hw));
}
BENCHMARK(BM_Conv2dForward)->Args({3, 16, 32})->Args({16, 32, 16})->Args({64, 64, 8})->Args({112, 32, 8});

void BM_Conv2dForwardBackward(benchmark::State& state) {
  const auto cin = std::size_t(state.range(0)), cout = std::size_t(state.range(1)), hw = std::size_t(state.range(2));
  Rng rng(2);
  const Tensor x = random_tensor(rng, {8, cin, hw, hw}, true);
  const Tensor w = random_tensor(rng, {cout, cin, 3, 3}, true);
  const Tensor b = random_tensor(rng, {cout}, true);
  for (auto _ : state) {
    zero_grads({x, w, b});
    Graph g;
    backward(sum(g, conv2d(g, x, w, b, 1, 1)), g);
  }
}
BENCHMARK(BM_Conv2dForwardBackward)->Args({3, 16, 32})->Args({16, 32, 16})->Args({64, 64, 8});

void BM_UpsampleBilinear(benchmark::State& state) {
  Rng rng(3);
  const Tensor x = random_tensor(rng, {8, 64, 8, 8});
  for (auto _ : state) {
    Graph g = Graph::inference();
    benchmark::DoNotOptimize(upsample_bilinear(g, x, 32, 32));
  }
}
BENCHMARK(BM_UpsampleBilinear);

// One joint SGD step on a batch of 8 crops of 32x32, per method.
void BM_CoopTrainStep(benchmark::State& state) {
  const auto method = static_cast<Method>(state.range(0));
  const NetworkSpec spec = default_spec(3, 4);
  CoopModel model = build_coop_model(spec, default_scheme(method, spec), 1, 1001);
  const auto params = model.parameters();
  Sgd sgd(0.01, 0.9);
  Rng rng(4);
  const Tensor x = random_tensor(rng, {8, 3, 32, 32});
  const LabelMap labels = random_labels(rng, 8, 32, 32, 4);
  for (auto _ : state) {
    zero_grads(params);
    Graph g;
    const CoopOutput out = coop_forward(g, model, x);
    const JointLoss loss = joint_loss(g, out.logits_top, out.logits_bottom, labels);
    backward(loss.total, g);
    sgd.step(params);
  }
  state.SetLabel(std::string(method_name(method)));
}
BENCHMARK(BM_CoopTrainStep)
    ->Arg(int(Method::Single))
    ->Arg(int(Method::Ensemble))
    ->Arg(int(Method::SameLayer))
    ->Arg(int(Method::MultiLayer))
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
