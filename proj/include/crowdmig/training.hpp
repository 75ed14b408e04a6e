#pragma once

#include "crowdmig/config.hpp"
#include "crowdmig/dataset.hpp"
#include "crowdmig/divergence.hpp"
#include "crowdmig/models.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace crowdmig {

enum class PriorMode { kFixedUniform, kFixedGiven, kTunedWithBiasTied };

struct MigConfig {
  FKind f_kind = FKind::kKL;
  PriorMode prior_mode = PriorMode::kFixedUniform;
  Vec given_prior;  // consulted only for kFixedGiven
  double learning_rate_h = 1e-4;
  double learning_rate_g = 1e-4;
  int batch_size = 16;
  int epochs = 1;
  std::uint64_t seed = 0;

  void validate(int class_count) const;
  static MigConfig from_config(const KeyValueConfig& kv);
};

// Empirical f-mutual-information gain of a batch: the mean same-row
// agreement partial_f(K_ii) minus the mean cross-row agreement
// fstar_of_partial_f(K_ij) over all i != j pairs, where
// K_ij = sum_c h_i[c] g_j[c] / p_c, clamped at kAgreementFloor.
double mig_batch(const std::vector<SimplexVector>& h_outs,
                 const std::vector<SimplexVector>& g_outs, const SimplexVector& p, FKind kind);

struct MigBatchGrads {
  std::vector<Vec> dh;  // gradient w.r.t. each h_outs entry
  std::vector<Vec> dg;  // gradient w.r.t. each g_outs entry
  Vec dp;               // gradient w.r.t. p; zero-size unless requested
};

MigBatchGrads mig_batch_backward(const std::vector<SimplexVector>& h_outs,
                                 const std::vector<SimplexVector>& g_outs, const SimplexVector& p,
                                 FKind kind, bool want_prior_grad = false);

// Confusion-count initialization of the aggregator: soft class scores
// Q from the rows' mean one-hot labels, W^m = log of the Q-weighted
// empirical confusion of expert m, bias = log(bias_prior). Classes with
// zero soft count fall back to a log-uniform row and emit a warning.
AggregatorParams init_aggregator(const CrowdDataset& dataset, const SimplexVector& bias_prior,
                                 std::vector<std::string>* warnings = nullptr);

// Row-stochastic Q-weighted confusion estimates (the count form used by
// both the aggregator initialization and the EM baseline's start point).
// zero_rows, when given, records (expert, class) pairs that had no mass.
std::vector<Mat> confusion_counts(const CrowdDataset& dataset,
                                  std::vector<std::pair<int, int>>* zero_rows = nullptr);

struct AdamState {
  std::vector<Mat> m, v;
  long t = 0;
  static AdamState like(const std::vector<Mat>& shapes);
};

// One ascent step: params += lr * mhat / (sqrt(vhat) + 1e-8), with
// beta1 = 0.9, beta2 = 0.999 and bias correction. Throws on non-finite
// gradients.
void adam_step(AdamState& state, const std::vector<Mat*>& params, const std::vector<Mat>& grads,
               double lr);

struct EpochStats {
  int epoch = 0;
  double mean_mig = 0.0;
  // NaN when the corresponding dataset carries no ground truth.
  double train_acc = std::numeric_limits<double>::quiet_NaN();
  double test_acc = std::numeric_limits<double>::quiet_NaN();
};

struct MaxMigResult {
  AggregatorParams aggregator;
  Vec prior;  // final p (hyperparameter or tuned)
  std::vector<EpochStats> history;
};

// Joint ascent of the gain objective over classifier parameters, the
// aggregator weight matrices and (in tuned mode) the prior's free
// logits, with the bias tied to log p throughout. Shuffles per epoch
// with the seeded RNG; epoch-end remnants of size 1 are dropped.
MaxMigResult train_max_mig(const CrowdDataset& dataset, Classifier& classifier,
                           const MigConfig& cfg, const CrowdDataset* test_set = nullptr);

// epoch, mean_mig, train_acc, test_acc per line; accuracy cells are
// empty when unknown.
void write_history_csv(const std::string& path, const std::vector<EpochStats>& history);

// Classifier accuracy against ground truth (argmax, lowest index wins ties).
double classifier_accuracy(const Classifier& classifier, const CrowdDataset& dataset);

}  // namespace crowdmig
