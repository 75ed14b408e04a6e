#include "crowdmig/baselines.hpp"

#include "crowdmig/parallel.hpp"
#include "crowdmig/rng.hpp"
#include "crowdmig/training.hpp"

#include <cmath>
#include <numeric>

namespace crowdmig {

int majority_vote(const std::vector<int>& labels, int class_count) {
  std::vector<int> votes(class_count, 0);
  bool any = false;
  for (int label : labels) {
    if (label == kMissingLabel) continue;
    if (label < 0 || label >= class_count)
      throw std::invalid_argument("majority_vote: label out of range");
    ++votes[label];
    any = true;
  }
  if (!any) throw std::invalid_argument("majority_vote: all labels missing");
  int best = 0;
  for (int c = 1; c < class_count; ++c)
    if (votes[c] > votes[best]) best = c;
  return best;
}

void TransitionMatrices::validate() const {
  if (mats.empty()) throw std::invalid_argument("transitions: need at least one expert");
  const Eigen::Index c = mats.front().rows();
  for (const Mat& w : mats) {
    if (w.rows() != c || w.cols() != c)
      throw std::invalid_argument("transitions: matrices must share shape |C| x |C|");
    for (Eigen::Index r = 0; r < c; ++r) {
      if (w.row(r).minCoeff() < -1e-12)
        throw std::invalid_argument("transitions: negative entry");
      if (std::abs(w.row(r).sum() - 1.0) > 1e-6)
        throw std::invalid_argument("transitions: rows must sum to 1");
    }
  }
}

double mle_log_likelihood(const std::vector<SimplexVector>& h_outs, const CrowdDataset& dataset,
                          const TransitionMatrices& transitions) {
  if (h_outs.size() != dataset.size())
    throw std::invalid_argument("mle_log_likelihood: h_outs and rows differ in length");
  if (transitions.expert_count() != dataset.expert_count)
    throw std::invalid_argument("mle_log_likelihood: expert count mismatch");
  const int c = dataset.class_count;

  double total = 0.0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& row = dataset.rows[i];
    double inner = 0.0;
    for (int cls = 0; cls < c; ++cls) {
      double term = h_outs[i][cls];
      for (int m = 0; m < dataset.expert_count; ++m) {
        const int label = row.labels[m];
        if (label == kMissingLabel) continue;  // probability-1 factor
        term *= transitions.mats[m](cls, label);
      }
      inner += term;
    }
    total += std::log(std::max(inner, 1e-300));
  }
  return total;
}

// ---------------------------------------------------------------------------
// Supervised fitting against soft targets

void fit_classifier_soft(Classifier& classifier, const CrowdDataset& dataset,
                         const std::vector<Vec>& targets, int epochs, double learning_rate,
                         int batch_size, std::uint64_t seed) {
  if (targets.size() != dataset.size())
    throw std::invalid_argument("fit_classifier_soft: one target per row required");
  if (batch_size < 1) throw std::invalid_argument("fit_classifier_soft: batch_size must be >= 1");

  std::vector<Mat*> blocks = classifier.param_blocks();
  AdamState state = AdamState::like(classifier.zero_grads());
  Rng rng(seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t b = std::min<std::size_t>(batch_size, order.size() - start);
      std::vector<Mat> grads = classifier.zero_grads();
      for (std::size_t k = 0; k < b; ++k) {
        const auto& row = dataset.rows[order[start + k]];
        const Vec s = classifier.forward(row).probs();
        // d/ds of sum_c q_c ln s_c, with s floored to keep the ratio finite
        const Vec upstream =
            targets[order[start + k]].cwiseQuotient(s.cwiseMax(kProbFloor)) /
            static_cast<double>(b);
        classifier.accumulate_gradient(row, upstream, grads);
      }
      adam_step(state, blocks, grads, learning_rate);
    }
  }
}

void train_majority_vote(const CrowdDataset& dataset, Classifier& classifier, int epochs,
                         double learning_rate, int batch_size, std::uint64_t seed) {
  dataset.validate();
  std::vector<Vec> targets;
  targets.reserve(dataset.size());
  for (const auto& row : dataset.rows) {
    Vec one_hot = Vec::Zero(dataset.class_count);
    one_hot(majority_vote(row.labels, dataset.class_count)) = 1.0;
    targets.push_back(std::move(one_hot));
  }
  fit_classifier_soft(classifier, dataset, targets, epochs, learning_rate, batch_size, seed);
}

// ---------------------------------------------------------------------------
// EM for the likelihood baseline

EmConfig EmConfig::from_config(const KeyValueConfig& kv) {
  EmConfig cfg;
  cfg.rounds = kv.get_int("em_rounds", cfg.rounds);
  cfg.classifier_epochs_per_round =
      kv.get_int("classifier_epochs_per_round", cfg.classifier_epochs_per_round);
  cfg.learning_rate = kv.get_double("lr", cfg.learning_rate);
  cfg.batch_size = kv.get_int("batch_size", cfg.batch_size);
  cfg.seed = kv.get_u64("seed", cfg.seed);
  cfg.smoothing = kv.get_double("smoothing", cfg.smoothing);
  return cfg;
}

namespace {

// Posterior over the true class for one row, computed in log space so
// long expert products cannot underflow.
Vec row_posterior(const Vec& h, const CrowdDataset::Row& row, const TransitionMatrices& w) {
  const Eigen::Index c = h.size();
  Vec logits(c);
  for (Eigen::Index cls = 0; cls < c; ++cls) {
    double acc = h(cls) > 0.0 ? std::log(h(cls)) : -std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < row.labels.size(); ++m) {
      const int label = row.labels[m];
      if (label == kMissingLabel) continue;
      const double entry = w.mats[m](cls, label);
      acc += entry > 0.0 ? std::log(entry) : -std::numeric_limits<double>::infinity();
    }
    logits(cls) = acc;
  }
  const double top = logits.maxCoeff();
  if (!std::isfinite(top)) return Vec::Constant(c, 1.0 / static_cast<double>(c));
  Vec e = (logits.array() - top).exp();
  return e / e.sum();
}

}  // namespace

MleEmResult train_mle_em(const CrowdDataset& dataset, Classifier& classifier,
                         const EmConfig& cfg) {
  dataset.validate();
  if (dataset.rows.empty()) throw std::invalid_argument("train_mle_em: empty dataset");
  if (classifier.class_count() != dataset.class_count)
    throw std::invalid_argument("train_mle_em: classifier class count mismatch");
  const int c = dataset.class_count;
  const int m = dataset.expert_count;
  const std::size_t n = dataset.size();

  MleEmResult result;
  result.transitions.mats = confusion_counts(dataset);  // count form, no log
  result.transitions.validate();
  result.posteriors.assign(n, Vec::Constant(c, 1.0 / c));

  std::vector<SimplexVector> h_outs;
  h_outs.reserve(n);
  auto refresh_h = [&] {
    h_outs.clear();
    for (const auto& row : dataset.rows) h_outs.push_back(classifier.forward(row));
  };
  refresh_h();

  for (int round = 0; round < cfg.rounds; ++round) {
    // E step: rows are independent, each writes only its own posterior
    parallel_chunks(n, 2048, [&](std::size_t, std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i)
        result.posteriors[i] =
            row_posterior(h_outs[i].probs(), dataset.rows[i], result.transitions);
    });

    // M step: smoothed posterior-weighted counts, restricted per expert
    // to the rows that expert labeled.
    for (int e = 0; e < m; ++e) {
      Mat counts = Mat::Constant(c, c, cfg.smoothing);
      for (std::size_t i = 0; i < n; ++i) {
        const int label = dataset.rows[i].labels[e];
        if (label == kMissingLabel) continue;
        counts.col(label) += result.posteriors[i];
      }
      for (int cls = 0; cls < c; ++cls) {
        const double total = counts.row(cls).sum();
        result.transitions.mats[e].row(cls) = counts.row(cls) / total;
      }
    }

    // Classifier step against the fresh posteriors.
    if (cfg.classifier_epochs_per_round > 0) {
      fit_classifier_soft(classifier, dataset, result.posteriors,
                          cfg.classifier_epochs_per_round, cfg.learning_rate, cfg.batch_size,
                          mix_seed(cfg.seed, static_cast<std::uint64_t>(round)));
      refresh_h();
    }

    result.likelihood_per_round.push_back(
        mle_log_likelihood(h_outs, dataset, result.transitions));
  }

  Vec prior = Vec::Zero(c);
  for (const Vec& q : result.posteriors) prior += q;
  result.class_prior = prior / static_cast<double>(n);
  return result;
}

}  // namespace crowdmig
