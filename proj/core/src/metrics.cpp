#include "coopseg/metrics.hpp"

#include <cstdio>
#include <numeric>

#include "coopseg/error.hpp"

COOPSEG_NAMESPACE_BEGIN

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes) : k_(num_classes), counts_(num_classes * num_classes, 0) {
  if (num_classes == 0 || num_classes > 256) throw ConfigError("confusion matrix needs 1..256 classes");
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

void ConfusionMatrix::accumulate(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth) {
  if (pred.size() != truth.size()) {
    throw ShapeError("accumulate: prediction has " + std::to_string(pred.size()) + " pixels, truth has " +
                     std::to_string(truth.size()));
  }
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] >= k_ || truth[i] >= k_) {
      throw DataError("accumulate: class id " + std::to_string(std::max(pred[i], truth[i])) +
                      " out of range for " + std::to_string(k_) + " classes");
    }
  }
  for (std::size_t i = 0; i < pred.size(); ++i) ++counts_[truth[i] * k_ + pred[i]];
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.k_ != k_) throw ShapeError("merge: class counts differ");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::vector<std::optional<double>> iou_per_class(const ConfusionMatrix& cm) {
  const std::size_t k = cm.num_classes();
  std::vector<std::optional<double>> out(k);
  for (std::size_t c = 0; c < k; ++c) {
    std::uint64_t row = 0, col = 0;
    for (std::size_t j = 0; j < k; ++j) {
      row += cm.at(c, j);
      col += cm.at(j, c);
    }
    const std::uint64_t tp = cm.at(c, c);
    const std::uint64_t denom = row + col - tp;  // TP + FP + FN
    if (denom > 0) out[c] = static_cast<double>(tp) / static_cast<double>(denom);
  }
  return out;
}

double mean_iou(std::span<const std::optional<double>> ious) {
  double sum = 0;
  std::size_t present = 0;
  for (const auto& v : ious) {
    if (!v) continue;
    sum += *v;
    ++present;
  }
  if (present == 0) throw DataError("mean_iou: no class is present");
  return sum / static_cast<double>(present);
}

std::vector<std::uint8_t> argmax_channels(const Tensor& scores) {
  if (scores.rank() != 4) throw ShapeError("argmax_channels expects [N,K,H,W]");
  const std::size_t n = scores.dim(0), k = scores.dim(1), plane = scores.dim(2) * scores.dim(3);
  if (k > 256) throw ShapeError("argmax_channels: more than 256 classes");
  auto x = scores.data();
  std::vector<std::uint8_t> out(n * plane);
  for (std::size_t b = 0; b < n; ++b) {
    const real* base = x.data() + b * k * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < k; ++c) {
        if (base[c * plane + p] > base[best * plane + p]) best = c;
      }
      out[b * plane + p] = static_cast<std::uint8_t>(best);
    }
  }
  return out;
}

EvalReport make_report(const ConfusionMatrix& cm, std::string method, std::uint64_t seed, std::string head,
                       std::uint32_t epoch, std::string split) {
  EvalReport r;
  r.method = std::move(method);
  r.seed = seed;
  r.head = std::move(head);
  r.epoch = epoch;
  r.split = std::move(split);
  r.iou = iou_per_class(cm);
  r.miou = mean_iou(r.iou);
  return r;
}

std::string format_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string eval_csv_header(std::size_t num_classes) {
  std::string s = "method,seed,head,epoch,split";
  for (std::size_t c = 0; c < num_classes; ++c) s += ",iou_" + std::to_string(c);
  s += ",miou";
  return s;
}

std::string eval_csv_row(const EvalReport& r) {
  std::string s = r.method + ',' + std::to_string(r.seed) + ',' + r.head + ',' + std::to_string(r.epoch) + ',' +
                  r.split;
  for (const auto& v : r.iou) {
    s += ',';
    if (v) s += format_metric(*v);
  }
  s += ',' + format_metric(r.miou);
  return s;
}

COOPSEG_NAMESPACE_END
