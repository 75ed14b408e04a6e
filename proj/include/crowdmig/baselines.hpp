#pragma once

#include "crowdmig/config.hpp"
#include "crowdmig/dataset.hpp"
#include "crowdmig/models.hpp"

#include <cstdint>
#include <vector>

namespace crowdmig {

// Modal class among non-missing labels; ties go to the lowest class index.
int majority_vote(const std::vector<int>& labels, int class_count);

/// Per-expert transition matrices: each row is a distribution over the
/// reported class given the true class (the parameter space of the
/// likelihood-based aggregation baseline).
struct TransitionMatrices {
  std::vector<Mat> mats;  // M matrices, each C x C, rows summing to 1

  Eigen::Index expert_count() const { return static_cast<Eigen::Index>(mats.size()); }
  void validate() const;
};

// sum_i ln sum_c h_i[c] * prod over non-missing m of W^m[c, y_i^m],
// with each row's inner sum clamped at 1e-300 before the log. Missing
// labels skip their factor.
double mle_log_likelihood(const std::vector<SimplexVector>& h_outs, const CrowdDataset& dataset,
                          const TransitionMatrices& transitions);

struct EmConfig {
  int rounds = 30;
  // Adam epochs on the classifier per EM round; 0 freezes the classifier.
  int classifier_epochs_per_round = 1;
  double learning_rate = 1e-2;
  int batch_size = 64;
  std::uint64_t seed = 0;
  double smoothing = 1e-6;  // Laplace smoothing on M-step counts

  static EmConfig from_config(const KeyValueConfig& kv);
};

struct MleEmResult {
  TransitionMatrices transitions;
  std::vector<Vec> posteriors;  // q_i over classes, one per row
  Vec class_prior;              // mean posterior, a convenient plug-in prior
  std::vector<double> likelihood_per_round;
};

// Alternates (E) q_i(c) proportional to h(x_i)_c * prod_m W^m[c, y_i^m],
// (M) W^m rows from smoothed posterior-weighted counts, and Adam steps
// on the classifier against the soft targets q. Transitions start from
// the label-average confusion counts.
MleEmResult train_mle_em(const CrowdDataset& dataset, Classifier& classifier,
                         const EmConfig& cfg);

// Fits the classifier to per-row soft targets by ascending
// sum_i sum_c target_i[c] * ln h(x_i)_c with Adam over shuffled
// minibatches. Used by the majority-vote baseline (one-hot targets) and
// the EM classifier step (posterior targets).
void fit_classifier_soft(Classifier& classifier, const CrowdDataset& dataset,
                         const std::vector<Vec>& targets, int epochs, double learning_rate,
                         int batch_size, std::uint64_t seed);

// Majority-vote baseline: trains the classifier against the modal labels.
void train_majority_vote(const CrowdDataset& dataset, Classifier& classifier, int epochs,
                         double learning_rate, int batch_size, std::uint64_t seed);

}  // namespace crowdmig
