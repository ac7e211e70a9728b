#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coopseg/config.hpp"
#include "coopseg/tensor.hpp"

COOPSEG_NAMESPACE_BEGIN

/// counts(i, j) = pixels whose true class is i and predicted class is j.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes);

  std::size_t num_classes() const { return k_; }
  std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts_[truth * k_ + pred]; }
  std::uint64_t total() const;

  /// Adds one count per pixel. Throws DataError on out-of-range ids and
  /// ShapeError on length mismatch.
  void accumulate(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth);
  void merge(const ConfusionMatrix& other);

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t k_;
  std::vector<std::uint64_t> counts_;
};

/// TP / (TP + FP + FN) per class; nullopt when the class never occurs in
/// either truth or prediction.
std::vector<std::optional<double>> iou_per_class(const ConfusionMatrix& cm);

/// Mean over present classes. Throws DataError if none is present.
double mean_iou(std::span<const std::optional<double>> ious);

/// Per-pixel argmax over channels of [N,K,H,W]; lowest class id wins ties.
std::vector<std::uint8_t> argmax_channels(const Tensor& scores);

struct EvalReport {
  std::string method;
  std::uint64_t seed = 0;
  std::string head;  // top | bottom | ensemble
  std::uint32_t epoch = 0;
  std::string split;
  std::vector<std::optional<double>> iou;
  double miou = 0.0;

  bool operator==(const EvalReport&) const = default;
};

EvalReport make_report(const ConfusionMatrix& cm, std::string method, std::uint64_t seed, std::string head,
                       std::uint32_t epoch, std::string split);

/// `method,seed,head,epoch,split,iou_0,...,iou_{K-1},miou`
std::string eval_csv_header(std::size_t num_classes);
/// Absent classes are written as empty fields.
std::string eval_csv_row(const EvalReport& r);

/// Fixed-point text used in every CSV so outputs are byte-stable.
std::string format_metric(double v);

COOPSEG_NAMESPACE_END
