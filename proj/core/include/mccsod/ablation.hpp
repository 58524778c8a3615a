#pragma once

// Ablation harness: trains each MCCM / loss variant under one shared budget
// and scores it on a held-out source.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mccsod/metrics.hpp"
#include "mccsod/trainer.hpp"

namespace mccsod {

enum class AblationStudy {
  kContent,          // the ten content combinations, Baseline first, full MCCM last
  kOriginalContent,  // full MCCM without and with the short connection
  kLoss,             // BCE, BCE+IoU, BCE+F-m, all three
};

struct AblationVariant {
  int number = 0;  // 1-based row number
  std::string label;
  NetworkConfig network;
  LossOptions loss;
};

/// Variants of `study` derived from `base` (only the MCCM switches and the
/// saliency-loss switches are changed).
std::vector<AblationVariant> ablation_variants(AblationStudy study, const NetworkConfig& base = {},
                                               const LossOptions& base_loss = {});

struct AblationRow {
  AblationVariant variant;
  std::int64_t parameters = 0;
  double first_loss = 0.0;
  double last_loss = 0.0;
  MetricReport report;
};

/// Scores S^1 of `net` against every sample of `data` at the network resolution.
MetricReport evaluate_samples(MccNet& net, const SampleSource& data);

/// Trains every variant from the same seed with `train` (its loss switches are
/// replaced per variant) and evaluates on `test`.
std::vector<AblationRow> run_ablation(const std::vector<AblationVariant>& variants, const TrainConfig& train,
                                      const SampleSource& train_data, const SampleSource& test_data,
                                      const std::function<void(const AblationRow&)>& on_row = {});

std::string format_ablation_table(const std::vector<AblationRow>& rows, AblationStudy study);

}  // namespace mccsod
