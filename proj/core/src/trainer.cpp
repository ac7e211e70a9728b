#include "coopseg/trainer.hpp"

#include <atomic>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "coopseg/error.hpp"
#include "coopseg/graph.hpp"
#include "coopseg/ops.hpp"
#include "coopseg/optim.hpp"
#include "coopseg/rng.hpp"

COOPSEG_NAMESPACE_BEGIN

namespace {

constexpr std::uint64_t kBottomSeedOffset = 1000;
constexpr std::uint64_t kStreamSalt = 0x5eedda7a5eedda7aULL;

std::string fixed(double v, int digits) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string_view head_name(HeadKind h) {
  switch (h) {
    case HeadKind::Top:
      return "top";
    case HeadKind::Bottom:
      return "bottom";
    case HeadKind::Ensemble:
      return "ensemble";
  }
  return "?";
}

HeadKind parse_head(std::string_view name) {
  if (name == "top") return HeadKind::Top;
  if (name == "bottom") return HeadKind::Bottom;
  if (name == "ensemble") return HeadKind::Ensemble;
  throw ConfigError("unknown head '" + std::string(name) + "' (expected top|bottom|ensemble)");
}

HeadKind primary_head(Method m) {
  switch (m) {
    case Method::Single:
      return HeadKind::Top;
    case Method::Ensemble:
      return HeadKind::Ensemble;
    default:
      return HeadKind::Bottom;
  }
}

std::vector<HeadKind> available_heads(Method m) {
  if (m == Method::Single) return {HeadKind::Top};
  return {HeadKind::Top, HeadKind::Bottom, HeadKind::Ensemble};
}

void TrainConfig::validate(const Dataset& train) const {
  if (batch < 1) throw ConfigError("batch must be >= 1");
  if (!(lr > 0)) throw ConfigError("lr must be positive");
  if (!(momentum >= 0 && momentum < 1)) throw ConfigError("momentum must be in [0, 1)");
  if (!(clip_norm >= 0)) throw ConfigError("clip norm must be >= 0");
  if (crop == 0 || crop % 4 != 0) throw ConfigError("crop must be a positive multiple of 4");
  if (crop > train.height || crop > train.width) {
    throw ConfigError("crop " + std::to_string(crop) + " exceeds image size " + std::to_string(train.height) + "x" +
                      std::to_string(train.width));
  }
  if (eval_crop % 4 != 0) throw ConfigError("eval crop must be a multiple of 4");
}

CoopModel build_for_seed(const NetworkSpec& spec, const ConnectionScheme& scheme, std::uint64_t seed) {
  return build_coop_model(spec, scheme, seed, seed + kBottomSeedOffset);
}

std::vector<EvalReport> evaluate_heads(const CoopModel& model, const Dataset& data, const std::vector<HeadKind>& heads,
                                       const EvalOptions& opts) {
  const Method method = model.scheme.method();
  for (HeadKind h : heads) {
    if (h != HeadKind::Top && !model.bottom) {
      throw ConfigError("head unavailable: '" + std::string(head_name(h)) + "' needs a two-network scheme, model is '" +
                        std::string(method_name(method)) + "'");
    }
  }
  if (data.num_classes != static_cast<std::uint32_t>(model.spec.num_classes)) {
    throw DataError("dataset has " + std::to_string(data.num_classes) + " classes, model has " +
                    std::to_string(model.spec.num_classes));
  }
  if (data.size() == 0) throw DataError("cannot evaluate on an empty dataset");
  const std::size_t ch = opts.crop ? opts.crop : data.height;
  const std::size_t cw = opts.crop ? opts.crop : data.width;
  if (ch > data.height || cw > data.width) throw ConfigError("eval crop exceeds image size");
  const std::size_t oy = (data.height - ch) / 2, ox = (data.width - cw) / 2;
  const std::size_t batch = std::max<std::uint32_t>(opts.batch, 1);

  std::vector<ConfusionMatrix> cms(heads.size(), ConfusionMatrix(data.num_classes));
  for (std::size_t start = 0; start < data.size(); start += batch) {
    const std::size_t end = std::min(start + batch, data.size());
    std::vector<std::size_t> idx(end - start);
    std::iota(idx.begin(), idx.end(), start);
    std::vector<std::pair<std::size_t, std::size_t>> offs(idx.size(), {oy, ox});
    Batch b = make_batch(data, idx, offs, ch, cw);
    Graph g = Graph::inference();
    CoopOutput out = coop_forward(g, model, b.images);
    for (std::size_t i = 0; i < heads.size(); ++i) {
      std::vector<std::uint8_t> pred;
      switch (heads[i]) {
        case HeadKind::Top:
          pred = argmax_channels(out.logits_top);
          break;
        case HeadKind::Bottom:
          pred = argmax_channels(*out.logits_bottom);
          break;
        case HeadKind::Ensemble:
          pred = argmax_channels(ensemble_predict(out.logits_top, *out.logits_bottom));
          break;
      }
      cms[i].accumulate(pred, b.labels.values);
    }
  }
  std::vector<EvalReport> reports;
  for (std::size_t i = 0; i < heads.size(); ++i) {
    reports.push_back(make_report(cms[i], std::string(method_name(method)), opts.seed, std::string(head_name(heads[i])),
                                  opts.epoch, opts.split));
  }
  return reports;
}

EvalReport evaluate(const CoopModel& model, const Dataset& data, HeadKind head, const EvalOptions& opts) {
  return evaluate_heads(model, data, {head}, opts).front();
}

RunRecord train(CoopModel& model, const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg) {
  cfg.validate(train_set);
  if (train_set.num_classes != static_cast<std::uint32_t>(model.spec.num_classes)) {
    throw DataError("class-count mismatch: dataset has " + std::to_string(train_set.num_classes) +
                    " classes, model has " + std::to_string(model.spec.num_classes));
  }
  if (train_set.channels != static_cast<std::uint32_t>(model.spec.in_channels)) {
    throw DataError("channel mismatch: dataset has " + std::to_string(train_set.channels) +
                    " channels, model expects " + std::to_string(model.spec.in_channels));
  }
  RunRecord record;
  if (cfg.epochs == 0) return record;
  if (train_set.size() == 0) throw DataError("training set is empty");

  const auto params = model.parameters();
  Sgd sgd(cfg.lr, cfg.momentum);
  Rng stream(cfg.seed ^ kStreamSalt);
  Fnv1a stream_hash;
  const std::size_t n = train_set.size();
  const std::size_t max_y = train_set.height - cfg.crop, max_x = train_set.width - cfg.crop;
  std::vector<std::size_t> order(n);
  std::uint64_t step = 0;

  for (std::uint32_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    stream.shuffle(order.begin(), order.end());
    double s1 = 0, s2 = 0, st = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch) {
      const std::size_t end = std::min<std::size_t>(start + cfg.batch, n);
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                   order.begin() + static_cast<std::ptrdiff_t>(end));
      std::vector<std::pair<std::size_t, std::size_t>> offs;
      for (std::size_t i : idx) {
        const auto y = static_cast<std::size_t>(stream.uniform_int(0, static_cast<std::int64_t>(max_y)));
        const auto x = static_cast<std::size_t>(stream.uniform_int(0, static_cast<std::int64_t>(max_x)));
        offs.emplace_back(y, x);
        stream_hash.update_value(static_cast<std::uint64_t>(i));
        stream_hash.update_value(static_cast<std::uint64_t>(y));
        stream_hash.update_value(static_cast<std::uint64_t>(x));
      }
      Batch b = make_batch(train_set, idx, offs, cfg.crop, cfg.crop);

      zero_grads(params);
      try {
        Graph g;
        CoopOutput out = coop_forward(g, model, b.images);
        JointLoss loss = joint_loss(g, out.logits_top, out.logits_bottom, b.labels);
        backward(loss.total, g);
        for (const auto& p : params) check_finite(p.grad(), "parameter gradient");
        if (cfg.clip_norm > 0) clip_grad_norm(params, cfg.clip_norm);
        sgd.step(params);
        const double w = static_cast<double>(idx.size());
        s1 += w * loss.loss1.item();
        s2 += w * loss.loss2.item();
        st += w * loss.total.item();
      } catch (const NumericalError& e) {
        throw NumericalError("training diverged at step " + std::to_string(step) + " (epoch " +
                             std::to_string(epoch) + "): " + e.what());
      }
      ++step;
    }
    const double dn = static_cast<double>(n);
    record.losses.push_back({epoch, s1 / dn, s2 / dn, st / dn});

    const bool scheduled = cfg.eval_every != 0 && epoch % cfg.eval_every == 0;
    if (val_set.size() > 0 && (scheduled || epoch == cfg.epochs)) {
      EvalOptions opts{cfg.eval_crop, cfg.batch, cfg.seed, epoch, "val"};
      auto reports = evaluate_heads(model, val_set, available_heads(model.scheme.method()), opts);
      record.evals.insert(record.evals.end(), reports.begin(), reports.end());
    }
  }
  record.stream_hash = stream_hash.value();
  return record;
}

double CompareResult::seed_mean(Method m) const {
  double sum = 0;
  std::size_t count = 0;
  for (const auto& c : cells) {
    if (c.method != m) continue;
    sum += c.miou;
    ++count;
  }
  if (count == 0) throw ConfigError("no cells for method " + std::string(method_name(m)));
  return sum / static_cast<double>(count);
}

CompareResult compare(const NetworkSpec& spec, const Dataset& train_set, const Dataset& test_set,
                      const CompareConfig& cfg) {
  if (cfg.seeds.empty()) throw ConfigError("compare needs at least one seed");
  cfg.base.validate(train_set);

  auto scheme_for = [&](Method m) {
    ConnectionScheme s = default_scheme(m, spec);
    if (m == Method::SameLayer && cfg.same) s = *cfg.same;
    if (m == Method::MultiLayer && cfg.multi) s = *cfg.multi;
    if (m == Method::SameLayer || m == Method::MultiLayer) s.detach_gradients = cfg.detach;
    validate_scheme(spec, s);
    return s;
  };

  CompareResult result;
  std::vector<ConnectionScheme> schemes;
  for (Method m : kAllMethods) {
    for (std::uint64_t seed : cfg.seeds) {
      result.cells.push_back({m, seed, primary_head(m), 0.0, {}});
      schemes.push_back(scheme_for(m));
    }
  }
  std::vector<std::vector<EvalReport>> test_reports(result.cells.size());

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= result.cells.size()) return;
      try {
        auto& cell = result.cells[i];
        TrainConfig tc = cfg.base;
        tc.seed = cell.seed;
        tc.scheme = schemes[i];
        CoopModel model = build_for_seed(spec, tc.scheme, cell.seed);
        cell.record = train(model, train_set, Dataset{}, tc);
        EvalOptions opts{tc.eval_crop, tc.batch, cell.seed, tc.epochs, "test"};
        test_reports[i] = evaluate_heads(model, test_set, available_heads(cell.method), opts);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(cfg.jobs, static_cast<unsigned>(result.cells.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t i = 0; i < result.cells.size(); ++i) {
    auto& cell = result.cells[i];
    for (auto& r : test_reports[i]) {
      if (r.head == head_name(cell.head)) cell.miou = r.miou;
    }
    cell.record.evals = std::move(test_reports[i]);
  }

  // Every method must have consumed the same batch/crop stream for a seed.
  for (const auto& c : result.cells) {
    for (const auto& d : result.cells) {
      if (c.seed == d.seed && c.record.stream_hash != d.record.stream_hash) {
        throw Error("data stream differs between " + std::string(method_name(c.method)) + " and " +
                    std::string(method_name(d.method)) + " for seed " + std::to_string(c.seed));
      }
    }
  }
  return result;
}

std::string comparison_csv(const CompareResult& r) {
  std::string s = "method,seed,head,miou\n";
  for (Method m : kAllMethods) {
    std::string head;
    for (const auto& c : r.cells) {
      if (c.method != m) continue;
      head = std::string(head_name(c.head));
      s += std::string(method_name(m)) + ',' + std::to_string(c.seed) + ',' + head + ',' + format_metric(c.miou) + '\n';
    }
    if (!head.empty()) s += std::string(method_name(m)) + ",mean," + head + ',' + format_metric(r.seed_mean(m)) + '\n';
  }
  return s;
}

std::string comparison_evals_csv(const CompareResult& r, std::size_t num_classes) {
  std::string s = eval_csv_header(num_classes) + '\n';
  for (const auto& c : r.cells) {
    for (const auto& e : c.record.evals) s += eval_csv_row(e) + '\n';
  }
  return s;
}

std::string losses_csv_header() { return "method,seed,epoch,loss1,loss2,total"; }

std::string losses_csv_rows(const RunRecord& r, std::string_view method, std::uint64_t seed) {
  std::string s;
  for (const auto& e : r.losses) {
    s += std::string(method) + ',' + std::to_string(seed) + ',' + std::to_string(e.epoch) + ',' + fixed(e.loss1, 8) +
         ',' + fixed(e.loss2, 8) + ',' + fixed(e.total, 8) + '\n';
  }
  return s;
}

COOPSEG_NAMESPACE_END
