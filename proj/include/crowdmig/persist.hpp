#pragma once

#include "crowdmig/baselines.hpp"
#include "crowdmig/divergence.hpp"
#include "crowdmig/models.hpp"

#include <optional>
#include <string>

namespace crowdmig {

enum class MethodKind { kMaxMig, kMle, kMajorityVote };

MethodKind method_from_string(const std::string& name);
std::string to_string(MethodKind method);

/// Everything a training run persists: the classifier, plus the
/// method-specific aggregation parameters. One JSON document on disk;
/// parameters round-trip bit for bit.
struct TrainedModel {
  MethodKind method = MethodKind::kMaxMig;
  int class_count = 0;
  int expert_count = 0;
  FKind f_kind = FKind::kKL;
  Vec prior;  // p used by the forecaster / gain computations

  Classifier classifier;
  std::optional<AggregatorParams> aggregator;     // max-mig
  std::optional<TransitionMatrices> transitions;  // mle
  Vec mle_prior;                                  // mle: plug-in class prior

  explicit TrainedModel(Classifier c) : classifier(std::move(c)) {}

  void save(const std::string& path) const;
  static TrainedModel load(const std::string& path);
};

struct EvalReport {
  double accuracy_classifier = 0.0;
  double accuracy_aggregator = 0.0;
  double accuracy_forecaster = 0.0;
  double mean_mig = 0.0;
};

// Argmax accuracies of the classifier, the method's aggregation rule and
// its data-crowds forecaster against ground truth, plus the mean gain
// over consecutive batches of 256 rows. Requires ground truth.
EvalReport evaluate(const CrowdDataset& dataset, const TrainedModel& model);

std::string format_report(const EvalReport& report);
void write_report_csv(const std::string& path, const EvalReport& report);

}  // namespace crowdmig
