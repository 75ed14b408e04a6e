#pragma once

#include "crowdmig/dataset.hpp"
#include "crowdmig/divergence.hpp"
#include "crowdmig/types.hpp"

#include <cstdint>
#include <variant>
#include <vector>

namespace crowdmig {

// VJP through softmax: given s = softmax(z) and an upstream gradient u
// w.r.t. s, returns the gradient w.r.t. z, i.e. s .* (u - <u, s>).
Vec softmax_vjp(const Vec& s, const Vec& upstream);

/// Data classifier over a finite set of datapoint ids: one logit row per
/// id, forward = softmax(row). Maximally rich on finite inputs, which is
/// what the exact-oracle experiments need.
class TabularClassifier {
 public:
  TabularClassifier(Eigen::Index input_count, Eigen::Index class_count)
      : logits_(Mat::Zero(input_count, class_count)) {}
  explicit TabularClassifier(Mat logits) : logits_(std::move(logits)) {}

  SimplexVector forward(Eigen::Index x_id) const;

  // Gradient of <upstream, forward(x_id)> w.r.t. the logit table,
  // accumulated into grad (same shape as the table).
  void accumulate_gradient(Eigen::Index x_id, const Vec& upstream, Mat& grad) const;
  Mat backward(Eigen::Index x_id, const Vec& upstream) const;

  Eigen::Index input_count() const { return logits_.rows(); }
  Eigen::Index class_count() const { return logits_.cols(); }
  Mat& logits() { return logits_; }
  const Mat& logits() const { return logits_; }

 private:
  Mat logits_;
};

enum class Activation { kReLU, kIdentity };

struct MlpLayer {
  Mat weights;  // out x in
  Mat bias;     // out x 1
  Activation activation = Activation::kReLU;
};

/// Fully-connected classifier: hidden ReLU layers, identity final layer
/// of width |C|, softmax output. Weights start uniform in [-a, a] with
/// a = sqrt(6 / (fan_in + fan_out)), biases at zero.
class MlpClassifier {
 public:
  MlpClassifier(const std::vector<Eigen::Index>& widths, std::uint64_t seed);
  explicit MlpClassifier(std::vector<MlpLayer> layers);

  SimplexVector forward(const Vec& x) const;
  void accumulate_gradient(const Vec& x, const Vec& upstream, std::vector<Mat>& grads) const;
  std::vector<Mat> backward(const Vec& x, const Vec& upstream) const;

  // Parameter blocks laid out [W0, b0, W1, b1, ...]; gradient containers
  // mirror this layout.
  std::vector<Mat*> param_blocks();
  std::vector<Mat> zero_grads() const;

  Eigen::Index input_width() const { return layers_.front().weights.cols(); }
  Eigen::Index class_count() const { return layers_.back().weights.rows(); }
  const std::vector<MlpLayer>& layers() const { return layers_; }

 private:
  std::vector<MlpLayer> layers_;
};

/// Weighted-average crowds aggregator: per-expert weight matrices plus a
/// bias, forward = softmax(sum of label-selected columns + bias).
struct AggregatorParams {
  std::vector<Mat> weights;  // M matrices, each C x C
  Vec bias;                  // C

  Eigen::Index expert_count() const { return static_cast<Eigen::Index>(weights.size()); }
  Eigen::Index class_count() const { return bias.size(); }
  void validate() const;
};

// Missing labels contribute nothing to the logit sum (an absent report
// carries no evidence under the weighted-average form).
SimplexVector aggregator_forward(const AggregatorParams& params, const std::vector<int>& labels);

// Gradients of <upstream, forward(labels)>; layout [W^1 .. W^M, bias(Cx1)].
// Only columns selected by non-missing labels and the bias receive mass.
void aggregator_accumulate_gradient(const AggregatorParams& params, const std::vector<int>& labels,
                                    const Vec& upstream, std::vector<Mat>& grads);
std::vector<Mat> aggregator_backward(const AggregatorParams& params, const std::vector<int>& labels,
                                     const Vec& upstream);
std::vector<Mat*> aggregator_param_blocks(AggregatorParams& params);
std::vector<Mat> aggregator_zero_grads(const AggregatorParams& params);

// Data-crowds forecaster: entry c proportional to h_c * g_c / p_c.
// If every product underflows to zero the vector is floored at 1e-30
// first (yielding a uniform posterior); p must be strictly positive.
SimplexVector forecaster_forward(const SimplexVector& h_out, const SimplexVector& g_out,
                                 const SimplexVector& p);

/// Either classifier family behind one forward/backward surface keyed by
/// the dataset's x kind.
class Classifier {
 public:
  explicit Classifier(TabularClassifier t) : impl_(std::move(t)) {}
  explicit Classifier(MlpClassifier m) : impl_(std::move(m)) {}

  bool is_tabular() const { return std::holds_alternative<TabularClassifier>(impl_); }
  TabularClassifier& tabular() { return std::get<TabularClassifier>(impl_); }
  const TabularClassifier& tabular() const { return std::get<TabularClassifier>(impl_); }
  MlpClassifier& mlp() { return std::get<MlpClassifier>(impl_); }
  const MlpClassifier& mlp() const { return std::get<MlpClassifier>(impl_); }

  Eigen::Index class_count() const;
  SimplexVector forward(const CrowdDataset::Row& row) const;
  void accumulate_gradient(const CrowdDataset::Row& row, const Vec& upstream,
                           std::vector<Mat>& grads) const;
  std::vector<Mat*> param_blocks();
  std::vector<Mat> zero_grads() const;

 private:
  std::variant<TabularClassifier, MlpClassifier> impl_;
};

}  // namespace crowdmig
