#include "coopseg/gradcheck.hpp"

#include <cmath>
#include <functional>
#include <map>

#include "coopseg/coop.hpp"
#include "coopseg/error.hpp"
#include "coopseg/ops.hpp"
#include "coopseg/optim.hpp"
#include "coopseg/rng.hpp"

COOPSEG_NAMESPACE_BEGIN

namespace {

using OpFn = std::function<Tensor(Graph&, const std::vector<Tensor>&)>;

struct Case {
  std::string op;
  std::vector<Tensor> inputs;
  OpFn fn;
};

Tensor random_tensor(Rng& rng, Shape shape, double scale = 1.0) {
  std::vector<real> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<real>(rng.normal(0.0, scale));
  return Tensor::from(std::move(shape), std::move(v), true);
}

// Values bounded away from zero so a +-eps step never crosses the ReLU kink.
Tensor away_from_zero(Rng& rng, Shape shape) {
  std::vector<real> v(shape_numel(shape));
  for (auto& x : v) {
    const double mag = rng.uniform(0.1, 1.0);
    x = static_cast<real>(rng.uniform() < 0.5 ? -mag : mag);
  }
  return Tensor::from(std::move(shape), std::move(v), true);
}

// Distinct values spaced 0.05 apart, so pooling windows never tie within +-eps.
Tensor spaced_values(Rng& rng, Shape shape) {
  std::vector<real> v(shape_numel(shape));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<real>(0.05 * static_cast<double>(i) - 1.0);
  rng.shuffle(v.begin(), v.end());
  return Tensor::from(std::move(shape), std::move(v), true);
}

double projected(const Tensor& y, const std::vector<real>& r) {
  auto d = y.data();
  double acc = 0;
  for (std::size_t i = 0; i < d.size(); ++i) acc += static_cast<double>(d[i]) * static_cast<double>(r[i]);
  return acc;
}

// Returns the worst relative error over the case's differentiable inputs and
// the number of coordinates probed.
std::pair<double, std::size_t> check_case(Case& c, const GradcheckOptions& opts, Rng& rng) {
  Graph g;
  Tensor y = c.fn(g, c.inputs);
  std::vector<real> r(y.numel(), real(1));
  Tensor loss = y;
  if (y.numel() != 1) {
    for (auto& v : r) v = static_cast<real>(rng.normal());
    loss = weighted_sum(g, y, r);
  }
  zero_grads(c.inputs);
  backward(loss, g);

  double worst = 0;
  std::size_t coords = 0;
  for (auto& in : c.inputs) {
    if (!in.requires_grad()) continue;
    std::vector<double> analytic(in.numel());
    auto grad = in.grad();
    for (std::size_t i = 0; i < analytic.size(); ++i) analytic[i] = grad[i];
    if (opts.corrupt_op && *opts.corrupt_op == c.op) {
      for (auto& a : analytic) a *= 1.1;
    }

    std::vector<double> numeric(in.numel());
    auto data = in.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const real saved = data[i];
      data[i] = static_cast<real>(saved + opts.eps);
      Graph gp = Graph::inference();
      const double plus = projected(c.fn(gp, c.inputs), r);
      data[i] = static_cast<real>(saved - opts.eps);
      Graph gm = Graph::inference();
      const double minus = projected(c.fn(gm, c.inputs), r);
      data[i] = saved;
      // The actual step after rounding to `real`.
      const double h = (static_cast<double>(static_cast<real>(saved + opts.eps)) -
                        static_cast<double>(static_cast<real>(saved - opts.eps)));
      numeric[i] = (plus - minus) / h;
    }
    coords += data.size();

    double diff = 0, na = 0, nn = 0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
      na += analytic[i] * analytic[i];
      nn += numeric[i] * numeric[i];
    }
    const double denom = std::max(std::sqrt(na), std::sqrt(nn));
    const double rel = denom > 0 ? std::sqrt(diff) / denom : 0.0;
    worst = std::max(worst, rel);
  }
  return {worst, coords};
}

std::vector<Case> build_cases(Rng& rng) {
  std::vector<Case> cases;

  auto conv_case = [&](Shape in, Shape w, int stride, int pad) {
    const std::size_t cout = w[0];
    cases.push_back({"conv2d",
                     {random_tensor(rng, in), random_tensor(rng, w, 0.5), random_tensor(rng, {cout}, 0.5)},
                     [stride, pad](Graph& g, const std::vector<Tensor>& x) {
                       return conv2d(g, x[0], x[1], x[2], stride, pad);
                     }});
  };
  conv_case({2, 3, 5, 5}, {4, 3, 3, 3}, 1, 1);
  conv_case({1, 2, 7, 7}, {3, 2, 3, 3}, 2, 0);
  conv_case({2, 4, 4, 4}, {2, 4, 1, 1}, 1, 0);

  cases.push_back({"relu", {away_from_zero(rng, {2, 3, 4, 4})},
                   [](Graph& g, const std::vector<Tensor>& x) { return relu(g, x[0]); }});

  cases.push_back({"max_pool2d", {spaced_values(rng, {1, 2, 4, 4})},
                   [](Graph& g, const std::vector<Tensor>& x) { return max_pool2d(g, x[0], 2); }});
  cases.push_back({"max_pool2d", {spaced_values(rng, {2, 1, 6, 6})},
                   [](Graph& g, const std::vector<Tensor>& x) { return max_pool2d(g, x[0], 3); }});

  cases.push_back({"upsample_bilinear", {random_tensor(rng, {1, 2, 3, 4})},
                   [](Graph& g, const std::vector<Tensor>& x) { return upsample_bilinear(g, x[0], 7, 8); }});
  cases.push_back({"upsample_bilinear", {random_tensor(rng, {2, 1, 8, 8})},
                   [](Graph& g, const std::vector<Tensor>& x) { return upsample_bilinear(g, x[0], 3, 5); }});

  cases.push_back({"concat_channels", {random_tensor(rng, {2, 3, 3, 3}), random_tensor(rng, {2, 2, 3, 3})},
                   [](Graph& g, const std::vector<Tensor>& x) { return concat_channels(g, x[0], x[1]); }});

  {
    LabelMap labels{2, 3, 4, std::vector<std::uint8_t>(24)};
    for (auto& l : labels.values) l = static_cast<std::uint8_t>(rng.uniform_int(0, 4));
    cases.push_back({"softmax_cross_entropy", {random_tensor(rng, {2, 5, 3, 4}, 2.0)},
                     [labels](Graph& g, const std::vector<Tensor>& x) {
                       return softmax_cross_entropy(g, x[0], labels);
                     }});
  }

  cases.push_back({"add", {random_tensor(rng, {2, 3}), random_tensor(rng, {2, 3})},
                   [](Graph& g, const std::vector<Tensor>& x) { return add(g, x[0], x[1]); }});
  cases.push_back({"sum", {random_tensor(rng, {3, 4})},
                   [](Graph& g, const std::vector<Tensor>& x) { return sum(g, x[0]); }});
  return cases;
}

double grad_norm(const std::vector<Tensor>& params) {
  double acc = 0;
  for (const auto& p : params) {
    if (!p.has_grad()) continue;
    for (real v : p.grad()) acc += static_cast<double>(v) * static_cast<double>(v);
  }
  return std::sqrt(acc);
}

}  // namespace

GradcheckOptions default_gradcheck_options() {
  GradcheckOptions o;
  if constexpr (sizeof(real) == sizeof(double)) {
    o.eps = 1e-5;
    o.tolerance = 1e-5;
  } else {
    o.eps = 1e-3;
    o.tolerance = 1e-2;
  }
  return o;
}

std::vector<OpCheck> run_gradient_suite(const GradcheckOptions& opts) {
  if (!(opts.eps > 0) || !(opts.tolerance > 0)) throw ConfigError("gradcheck needs positive eps and tolerance");
  Rng rng(opts.seed);
  auto cases = build_cases(rng);
  std::map<std::string, OpCheck> by_op;
  std::vector<std::string> order;
  for (auto& c : cases) {
    auto [err, coords] = check_case(c, opts, rng);
    auto [it, fresh] = by_op.try_emplace(c.op, OpCheck{c.op, 0.0, opts.tolerance, 0, true});
    if (fresh) order.push_back(c.op);
    it->second.worst_rel_error = std::max(it->second.worst_rel_error, err);
    it->second.coordinates += coords;
  }
  std::vector<OpCheck> out;
  for (const auto& name : order) {
    OpCheck oc = by_op.at(name);
    oc.pass = oc.worst_rel_error < oc.tolerance;
    out.push_back(oc);
  }
  return out;
}

std::vector<IsolationCheck> run_isolation_suite(std::uint64_t seed) {
  const NetworkSpec spec = default_spec(3, 3);
  Rng rng(seed);
  std::vector<real> img(2 * 3 * 16 * 16);
  for (auto& v : img) v = static_cast<real>(rng.uniform());
  const Tensor images = Tensor::from({2, 3, 16, 16}, img);
  LabelMap labels{2, 16, 16, std::vector<std::uint8_t>(2 * 16 * 16)};
  for (auto& l : labels.values) l = static_cast<std::uint8_t>(rng.uniform_int(0, 2));

  struct Variant {
    Method method;
    bool detach;
  };
  const Variant variants[] = {{Method::Single, false},    {Method::Ensemble, false}, {Method::SameLayer, false},
                              {Method::SameLayer, true},  {Method::MultiLayer, false}, {Method::MultiLayer, true}};
  std::vector<IsolationCheck> out;
  for (const auto& v : variants) {
    ConnectionScheme scheme = default_scheme(v.method, spec);
    scheme.detach_gradients = v.detach;
    CoopModel model = build_coop_model(spec, scheme, seed + 1, seed + 2);
    const auto top = model.top.parameters();
    const auto bottom = model.bottom ? model.bottom->parameters() : std::vector<Tensor>{};

    IsolationCheck chk;
    chk.scheme = std::string(method_name(v.method));
    chk.detach = v.detach;

    {
      zero_grads(model.parameters());
      Graph g;
      auto o = coop_forward(g, model, images);
      auto loss = joint_loss(g, o.logits_top, o.logits_bottom, labels);
      backward(loss.loss1, g);
      chk.loss1_bottom_norm = grad_norm(bottom);
    }
    if (model.bottom) {
      zero_grads(model.parameters());
      Graph g;
      auto o = coop_forward(g, model, images);
      auto loss = joint_loss(g, o.logits_top, o.logits_bottom, labels);
      backward(loss.loss2, g);
      chk.loss2_top_norm = grad_norm(top);
    }
    zero_grads(model.parameters());

    const bool coupled = (v.method == Method::SameLayer || v.method == Method::MultiLayer) && !v.detach;
    if (coupled) {
      chk.expectation = "dL1/dbottom == 0, dL2/dtop > 0";
      chk.pass = chk.loss1_bottom_norm == 0.0 && chk.loss2_top_norm > 0.0;
    } else {
      chk.expectation = "dL1/dbottom == 0, dL2/dtop == 0";
      chk.pass = chk.loss1_bottom_norm == 0.0 && chk.loss2_top_norm == 0.0;
    }
    out.push_back(chk);
  }
  return out;
}

COOPSEG_NAMESPACE_END
