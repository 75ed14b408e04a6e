#include "crowdmig/training.hpp"

#include "crowdmig/rng.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace crowdmig {

namespace {

Vec parse_prob_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    out.push_back(std::stod(item));
  }
  Vec v(static_cast<Eigen::Index>(out.size()));
  for (std::size_t i = 0; i < out.size(); ++i) v(static_cast<Eigen::Index>(i)) = out[i];
  return v;
}

void check_strictly_positive(const SimplexVector& p, const char* what) {
  for (Eigen::Index c = 0; c < p.classes(); ++c)
    if (p[c] <= 0.0) throw std::domain_error(std::string(what) + ": prior must be strictly positive");
}

}  // namespace

void MigConfig::validate(int class_count) const {
  if (learning_rate_h <= 0.0 || learning_rate_g <= 0.0)
    throw std::invalid_argument("config: learning rates must be positive");
  if (batch_size < 2)
    throw std::invalid_argument("config: batch_size must be >= 2 (cross term needs i != j pairs)");
  if (epochs < 1) throw std::invalid_argument("config: epochs must be >= 1");
  if (prior_mode == PriorMode::kFixedGiven) {
    if (given_prior.size() != class_count)
      throw std::invalid_argument("config: prior_probs length != class_count");
    SimplexVector p = SimplexVector::from_probs(given_prior);
    check_strictly_positive(p, "config");
  }
}

MigConfig MigConfig::from_config(const KeyValueConfig& kv) {
  MigConfig cfg;
  cfg.f_kind = fkind_from_string(kv.get_string("f", "kl"));
  const std::string prior = kv.get_string("prior", "uniform");
  if (prior == "uniform") {
    cfg.prior_mode = PriorMode::kFixedUniform;
  } else if (prior == "tuned") {
    cfg.prior_mode = PriorMode::kTunedWithBiasTied;
  } else if (prior == "given") {
    cfg.prior_mode = PriorMode::kFixedGiven;
    cfg.given_prior = parse_prob_list(kv.get_string("prior_probs", ""));
  } else {
    throw std::invalid_argument("config: prior must be uniform|tuned|given");
  }
  cfg.learning_rate_h = kv.get_double("lr_h", cfg.learning_rate_h);
  cfg.learning_rate_g = kv.get_double("lr_g", cfg.learning_rate_g);
  cfg.batch_size = kv.get_int("batch_size", cfg.batch_size);
  cfg.epochs = kv.get_int("epochs", cfg.epochs);
  cfg.seed = kv.get_u64("seed", cfg.seed);
  return cfg;
}

// ---------------------------------------------------------------------------
// Gain objective

namespace {

void check_batch(const std::vector<SimplexVector>& h_outs, const std::vector<SimplexVector>& g_outs,
                 const SimplexVector& p) {
  if (h_outs.size() < 2) throw std::invalid_argument("mig_batch: need at least 2 rows");
  if (g_outs.size() != h_outs.size())
    throw std::invalid_argument("mig_batch: h and g lists differ in length");
  check_strictly_positive(p, "mig_batch");
  for (const auto& h : h_outs)
    if (h.classes() != p.classes()) throw std::invalid_argument("mig_batch: class count mismatch");
  for (const auto& g : g_outs)
    if (g.classes() != p.classes()) throw std::invalid_argument("mig_batch: class count mismatch");
}

}  // namespace

double mig_batch(const std::vector<SimplexVector>& h_outs,
                 const std::vector<SimplexVector>& g_outs, const SimplexVector& p, FKind kind) {
  check_batch(h_outs, g_outs, p);
  const std::size_t n = h_outs.size();

  std::vector<Vec> g_over_p(n);
  for (std::size_t j = 0; j < n; ++j)
    g_over_p[j] = g_outs[j].probs().cwiseQuotient(p.probs());

  double same = 0.0, cross = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double k = std::max(h_outs[i].probs().dot(g_over_p[j]), kAgreementFloor);
      if (i == j)
        same += partial_f(kind, k);
      else
        cross += fstar_of_partial_f(kind, k);
    }
  }
  const double dn = static_cast<double>(n);
  return same / dn - cross / (dn * (dn - 1.0));
}

MigBatchGrads mig_batch_backward(const std::vector<SimplexVector>& h_outs,
                                 const std::vector<SimplexVector>& g_outs, const SimplexVector& p,
                                 FKind kind, bool want_prior_grad) {
  check_batch(h_outs, g_outs, p);
  const std::size_t n = h_outs.size();
  const Eigen::Index c = p.classes();
  const double dn = static_cast<double>(n);
  const Vec inv_p = p.probs().cwiseInverse();

  MigBatchGrads grads;
  grads.dh.assign(n, Vec::Zero(c));
  grads.dg.assign(n, Vec::Zero(c));
  if (want_prior_grad) grads.dp = Vec::Zero(c);

  std::vector<Vec> g_over_p(n);
  for (std::size_t j = 0; j < n; ++j) g_over_p[j] = g_outs[j].probs().cwiseProduct(inv_p);

  for (std::size_t i = 0; i < n; ++i) {
    const Vec h_over_p = h_outs[i].probs().cwiseProduct(inv_p);
    for (std::size_t j = 0; j < n; ++j) {
      const double k_raw = h_outs[i].probs().dot(g_over_p[j]);
      const bool clamped = k_raw < kAgreementFloor;
      const double k = clamped ? kAgreementFloor : k_raw;
      double weight;  // d(objective)/dK for this pair
      if (i == j)
        weight = partial_f_prime(kind, k) / dn;
      else
        weight = -fstar_of_partial_f_prime(kind, k) / (dn * (dn - 1.0));
      if (clamped) continue;  // the clamp is flat below the floor
      grads.dh[i] += weight * g_over_p[j];
      grads.dg[j] += weight * h_over_p;
      if (want_prior_grad)
        grads.dp -= weight * h_outs[i].probs().cwiseProduct(g_over_p[j]).cwiseProduct(inv_p);
    }
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Aggregator initialization from label counts

std::vector<Mat> confusion_counts(const CrowdDataset& dataset,
                                  std::vector<std::pair<int, int>>* zero_rows) {
  const int c = dataset.class_count;
  const int m = dataset.expert_count;
  std::vector<Mat> numerator(m, Mat::Zero(c, c));
  Mat denominator = Mat::Zero(m, c);

  Vec q(c);
  for (const auto& row : dataset.rows) {
    q.setZero();
    int observed = 0;
    for (int label : row.labels) {
      if (label == kMissingLabel) continue;
      q(label) += 1.0;
      ++observed;
    }
    q /= static_cast<double>(observed);  // >= 1 by dataset invariant
    for (int e = 0; e < m; ++e) {
      const int label = row.labels[e];
      if (label == kMissingLabel) continue;
      numerator[e].col(label) += q;
      denominator.row(e) += q.transpose();
    }
  }

  std::vector<Mat> ratios(m, Mat::Zero(c, c));
  for (int e = 0; e < m; ++e) {
    for (int cls = 0; cls < c; ++cls) {
      if (denominator(e, cls) <= 0.0) {
        ratios[e].row(cls).setConstant(1.0 / static_cast<double>(c));
        if (zero_rows) zero_rows->emplace_back(e, cls);
      } else {
        ratios[e].row(cls) = numerator[e].row(cls) / denominator(e, cls);
      }
    }
  }
  return ratios;
}

AggregatorParams init_aggregator(const CrowdDataset& dataset, const SimplexVector& bias_prior,
                                 std::vector<std::string>* warnings) {
  if (bias_prior.classes() != dataset.class_count)
    throw std::invalid_argument("init_aggregator: prior class count mismatch");
  check_strictly_positive(bias_prior, "init_aggregator");

  std::vector<std::pair<int, int>> zero_rows;
  std::vector<Mat> ratios = confusion_counts(dataset, &zero_rows);
  if (warnings)
    for (const auto& [expert, cls] : zero_rows)
      warnings->push_back("expert " + std::to_string(expert) + ", class " + std::to_string(cls) +
                          ": zero soft count, using log-uniform weight row");

  AggregatorParams params;
  params.weights.reserve(ratios.size());
  for (const Mat& ratio : ratios)
    params.weights.push_back(ratio.cwiseMax(kProbFloor).cwiseMin(1.0).array().log().matrix());
  params.bias = log_vec(bias_prior);
  params.validate();
  return params;
}

// ---------------------------------------------------------------------------
// Adam

AdamState AdamState::like(const std::vector<Mat>& shapes) {
  AdamState state;
  state.m.reserve(shapes.size());
  state.v.reserve(shapes.size());
  for (const Mat& s : shapes) {
    state.m.emplace_back(Mat::Zero(s.rows(), s.cols()));
    state.v.emplace_back(Mat::Zero(s.rows(), s.cols()));
  }
  return state;
}

void adam_step(AdamState& state, const std::vector<Mat*>& params, const std::vector<Mat>& grads,
               double lr) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw std::invalid_argument("adam_step: mismatched block counts");
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  state.t += 1;
  const double correction1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double correction2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (std::size_t b = 0; b < params.size(); ++b) {
    const Mat& g = grads[b];
    if (g.rows() != params[b]->rows() || g.cols() != params[b]->cols())
      throw std::invalid_argument("adam_step: gradient shape mismatch");
    if (!g.allFinite())
      throw std::runtime_error("training aborted: non-finite gradient");
    state.m[b] = beta1 * state.m[b] + (1.0 - beta1) * g;
    state.v[b] = beta2 * state.v[b] + (1.0 - beta2) * g.cwiseProduct(g);
    const Mat m_hat = state.m[b] / correction1;
    const Mat v_hat = state.v[b] / correction2;
    *params[b] += lr * (m_hat.array() / (v_hat.array().sqrt() + eps)).matrix();
  }
}

// ---------------------------------------------------------------------------
// Joint training loop

double classifier_accuracy(const Classifier& classifier, const CrowdDataset& dataset) {
  std::size_t considered = 0, correct = 0;
  for (const auto& row : dataset.rows) {
    if (row.truth < 0) continue;
    ++considered;
    if (classifier.forward(row).argmax() == row.truth) ++correct;
  }
  if (considered == 0) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(correct) / static_cast<double>(considered);
}

MaxMigResult train_max_mig(const CrowdDataset& dataset, Classifier& classifier,
                           const MigConfig& cfg, const CrowdDataset* test_set) {
  dataset.validate();
  cfg.validate(dataset.class_count);
  if (dataset.size() < static_cast<std::size_t>(cfg.batch_size))
    throw std::invalid_argument("train_max_mig: dataset smaller than one batch");
  if (classifier.class_count() != dataset.class_count)
    throw std::invalid_argument("train_max_mig: classifier class count mismatch");

  const Eigen::Index c = dataset.class_count;
  const bool tuned = cfg.prior_mode == PriorMode::kTunedWithBiasTied;

  Mat phi = Mat::Zero(c, 1);  // free prior logits (tuned mode only)
  SimplexVector p = [&] {
    switch (cfg.prior_mode) {
      case PriorMode::kFixedUniform: return SimplexVector::uniform(c);
      case PriorMode::kFixedGiven: return SimplexVector::from_probs(cfg.given_prior);
      case PriorMode::kTunedWithBiasTied: return softmax(phi.col(0));
    }
    throw std::logic_error("unreachable prior mode");
  }();

  AggregatorParams aggregator = init_aggregator(dataset, p);

  std::vector<Mat*> cls_blocks = classifier.param_blocks();
  AdamState cls_state = AdamState::like(classifier.zero_grads());

  std::vector<Mat*> agg_blocks;
  for (Mat& w : aggregator.weights) agg_blocks.push_back(&w);
  AdamState agg_state = AdamState::like(aggregator_zero_grads(aggregator));
  // aggregator_zero_grads carries a trailing bias slot the Adam state
  // must not see: the bias is tied to log p, never free.
  agg_state.m.pop_back();
  agg_state.v.pop_back();

  AdamState phi_state = AdamState::like({phi});

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  MaxMigResult result{aggregator, p.probs(), {}};
  std::vector<SimplexVector> h_outs, g_outs;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double mig_weighted = 0.0;
    std::size_t rows_used = 0;

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t b =
          std::min<std::size_t>(cfg.batch_size, order.size() - start);
      if (b < 2) break;  // size-1 remnant: dropped, never merged across epochs

      h_outs.clear();
      g_outs.clear();
      for (std::size_t k = 0; k < b; ++k) {
        const auto& row = dataset.rows[order[start + k]];
        h_outs.push_back(classifier.forward(row));
        g_outs.push_back(aggregator_forward(aggregator, row.labels));
      }

      const double value = mig_batch(h_outs, g_outs, p, cfg.f_kind);
      MigBatchGrads grads = mig_batch_backward(h_outs, g_outs, p, cfg.f_kind, tuned);

      std::vector<Mat> cls_grads = classifier.zero_grads();
      std::vector<Mat> agg_grads = aggregator_zero_grads(aggregator);
      for (std::size_t k = 0; k < b; ++k) {
        const auto& row = dataset.rows[order[start + k]];
        classifier.accumulate_gradient(row, grads.dh[k], cls_grads);
        aggregator_accumulate_gradient(aggregator, row.labels, grads.dg[k], agg_grads);
      }

      adam_step(cls_state, cls_blocks, cls_grads, cfg.learning_rate_h);

      const Vec bias_grad = agg_grads.back().col(0);
      agg_grads.pop_back();
      adam_step(agg_state, agg_blocks, agg_grads, cfg.learning_rate_g);

      if (tuned) {
        // p = softmax(phi), bias = log p = phi - logsumexp(phi); route both
        // the direct dp path and the bias path into the free logits.
        Vec dphi = softmax_vjp(p.probs(), grads.dp);
        dphi += bias_grad - p.probs() * bias_grad.sum();
        Mat dphi_block = dphi;
        adam_step(phi_state, {&phi}, {dphi_block}, cfg.learning_rate_g);
        p = softmax(phi.col(0));
        aggregator.bias = log_vec(p);
      }

      mig_weighted += value * static_cast<double>(b);
      rows_used += b;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_mig = rows_used ? mig_weighted / static_cast<double>(rows_used) : 0.0;
    stats.train_acc = classifier_accuracy(classifier, dataset);
    if (test_set) stats.test_acc = classifier_accuracy(classifier, *test_set);
    result.history.push_back(stats);
  }

  result.aggregator = aggregator;
  result.prior = p.probs();
  return result;
}

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write history file: " + path);
  out << "epoch,mean_mig,train_acc,test_acc\n";
  out.precision(17);
  for (const auto& row : history) {
    out << row.epoch << ',';
    if (!std::isnan(row.mean_mig)) out << row.mean_mig;
    out << ',';
    if (!std::isnan(row.train_acc)) out << row.train_acc;
    out << ',';
    if (!std::isnan(row.test_acc)) out << row.test_acc;
    out << '\n';
  }
}

}  // namespace crowdmig
