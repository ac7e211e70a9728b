#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "coopseg/config.hpp"
#include "coopseg/coop.hpp"
#include "coopseg/dataset.hpp"
#include "coopseg/metrics.hpp"

COOPSEG_NAMESPACE_BEGIN

enum class HeadKind { Top, Bottom, Ensemble };

std::string_view head_name(HeadKind h);
HeadKind parse_head(std::string_view name);
/// The head a method is scored on: top for single, ensemble for ensemble,
/// bottom for the cooperative schemes.
HeadKind primary_head(Method m);
/// top, plus bottom and ensemble for two-network schemes.
std::vector<HeadKind> available_heads(Method m);

struct TrainConfig {
  std::uint32_t epochs = 30;
  std::uint32_t batch = 8;
  double lr = 0.05;
  double momentum = 0.9;
  /// Gradients of each step are rescaled to at most this joint L2 norm
  /// before the update. 0 disables clipping.
  double clip_norm = 5.0;
  /// Square training crop; must divide by 4 and fit inside the images.
  std::uint32_t crop = 32;
  /// Square centre crop for evaluation; 0 scores the full image.
  std::uint32_t eval_crop = 0;
  /// Evaluate every n epochs; the last epoch is always evaluated. 0 = last only.
  std::uint32_t eval_every = 0;
  std::uint64_t seed = 1;
  ConnectionScheme scheme = ConnectionScheme::single();

  void validate(const Dataset& train) const;
};

/// Top seed = seed, bottom seed = seed + 1000.
CoopModel build_for_seed(const NetworkSpec& spec, const ConnectionScheme& scheme, std::uint64_t seed);

struct EpochLoss {
  std::uint32_t epoch = 0;
  double loss1 = 0;
  double loss2 = 0;
  double total = 0;

  bool operator==(const EpochLoss&) const = default;
};

struct RunRecord {
  std::vector<EpochLoss> losses;
  std::vector<EvalReport> evals;
  /// Fingerprint of the batch/crop stream the run consumed.
  std::uint64_t stream_hash = 0;

  bool operator==(const RunRecord&) const = default;
};

/// Joint SGD on loss1 + loss2: one backward pass and one optimizer step over
/// the union of top and bottom parameters per batch. Batches and crop offsets
/// come from a stream seeded by cfg.seed alone, so every method sees the same
/// data for a given seed.
RunRecord train(CoopModel& model, const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg);

struct EvalOptions {
  std::uint32_t crop = 0;  // 0 = full image
  std::uint32_t batch = 8;
  std::uint64_t seed = 0;
  std::uint32_t epoch = 0;
  std::string split = "val";
};

EvalReport evaluate(const CoopModel& model, const Dataset& data, HeadKind head, const EvalOptions& opts);
/// One pass scoring several heads at once.
std::vector<EvalReport> evaluate_heads(const CoopModel& model, const Dataset& data,
                                       const std::vector<HeadKind>& heads, const EvalOptions& opts);

struct CompareConfig {
  TrainConfig base;
  std::vector<std::uint64_t> seeds{1};
  /// Schemes used for the same/multi rows; defaults come from default_scheme().
  std::optional<ConnectionScheme> same;
  std::optional<ConnectionScheme> multi;
  bool detach = false;
  unsigned jobs = 1;
};

struct CompareCell {
  Method method = Method::Single;
  std::uint64_t seed = 0;
  HeadKind head = HeadKind::Top;
  double miou = 0;
  RunRecord record;
};

struct CompareResult {
  /// Method-major (single, ensemble, same, multi), then seed order.
  std::vector<CompareCell> cells;

  double seed_mean(Method m) const;
};

/// Trains and scores all four methods on every seed. Test-set scores use the
/// method's primary head.
CompareResult compare(const NetworkSpec& spec, const Dataset& train_set, const Dataset& test_set,
                      const CompareConfig& cfg);

inline constexpr Method kAllMethods[] = {Method::Single, Method::Ensemble, Method::SameLayer, Method::MultiLayer};

/// `method,seed,head,miou` rows per seed followed by a `mean` row per method.
std::string comparison_csv(const CompareResult& r);
/// Every head of every cell, in eval CSV format.
std::string comparison_evals_csv(const CompareResult& r, std::size_t num_classes);
/// `method,seed,epoch,loss1,loss2,total`
std::string losses_csv_header();
std::string losses_csv_rows(const RunRecord& r, std::string_view method, std::uint64_t seed);

COOPSEG_NAMESPACE_END
