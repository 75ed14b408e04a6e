#include "crowdmig/models.hpp"

#include "crowdmig/rng.hpp"

#include <cmath>

namespace crowdmig {

Vec softmax_vjp(const Vec& s, const Vec& upstream) {
  const double dot = upstream.dot(s);
  return s.cwiseProduct((upstream.array() - dot).matrix());
}

// ---------------------------------------------------------------------------
// TabularClassifier

SimplexVector TabularClassifier::forward(Eigen::Index x_id) const {
  if (x_id < 0 || x_id >= logits_.rows())
    throw std::invalid_argument("TabularClassifier: x_id out of range");
  return softmax(logits_.row(x_id).transpose());
}

void TabularClassifier::accumulate_gradient(Eigen::Index x_id, const Vec& upstream,
                                            Mat& grad) const {
  if (upstream.size() != logits_.cols())
    throw std::invalid_argument("TabularClassifier: upstream gradient has wrong width");
  if (grad.rows() != logits_.rows() || grad.cols() != logits_.cols())
    throw std::invalid_argument("TabularClassifier: gradient container has wrong shape");
  const Vec s = forward(x_id).probs();
  grad.row(x_id) += softmax_vjp(s, upstream).transpose();
}

Mat TabularClassifier::backward(Eigen::Index x_id, const Vec& upstream) const {
  Mat grad = Mat::Zero(logits_.rows(), logits_.cols());
  accumulate_gradient(x_id, upstream, grad);
  return grad;
}

// ---------------------------------------------------------------------------
// MlpClassifier

MlpClassifier::MlpClassifier(const std::vector<Eigen::Index>& widths, std::uint64_t seed) {
  if (widths.size() < 2) throw std::invalid_argument("MlpClassifier: need input and output widths");
  if (widths.back() < 2) throw std::invalid_argument("MlpClassifier: output width must be >= 2");
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const Eigen::Index fan_in = widths[l], fan_out = widths[l + 1];
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    MlpLayer layer;
    layer.weights = Mat(fan_out, fan_in);
    for (Eigen::Index r = 0; r < fan_out; ++r)
      for (Eigen::Index c = 0; c < fan_in; ++c) layer.weights(r, c) = rng.uniform(-a, a);
    layer.bias = Mat::Zero(fan_out, 1);
    layer.activation =
        (l + 2 == widths.size()) ? Activation::kIdentity : Activation::kReLU;
    layers_.push_back(std::move(layer));
  }
}

MlpClassifier::MlpClassifier(std::vector<MlpLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw std::invalid_argument("MlpClassifier: no layers");
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l)
    if (layers_[l + 1].weights.cols() != layers_[l].weights.rows())
      throw std::invalid_argument("MlpClassifier: layer dimensions do not chain");
}

namespace {
Vec apply_activation(Activation act, const Vec& z) {
  return act == Activation::kReLU ? z.cwiseMax(0.0).eval() : z;
}
}  // namespace

SimplexVector MlpClassifier::forward(const Vec& x) const {
  if (x.size() != input_width())
    throw std::invalid_argument("MlpClassifier: input width mismatch");
  Vec h = x;
  for (const auto& layer : layers_)
    h = apply_activation(layer.activation, layer.weights * h + layer.bias.col(0));
  return softmax(h);
}

void MlpClassifier::accumulate_gradient(const Vec& x, const Vec& upstream,
                                        std::vector<Mat>& grads) const {
  if (x.size() != input_width())
    throw std::invalid_argument("MlpClassifier: input width mismatch");
  if (upstream.size() != class_count())
    throw std::invalid_argument("MlpClassifier: upstream gradient has wrong width");
  if (grads.size() != 2 * layers_.size())
    throw std::invalid_argument("MlpClassifier: gradient container has wrong layout");

  // Forward, caching pre-activations and inputs per layer.
  std::vector<Vec> inputs;   // input to each layer
  std::vector<Vec> pre;      // pre-activation of each layer
  Vec h = x;
  for (const auto& layer : layers_) {
    inputs.push_back(h);
    Vec z = layer.weights * h + layer.bias.col(0);
    pre.push_back(z);
    h = apply_activation(layer.activation, z);
  }
  const Vec s = softmax(h).probs();

  Vec delta = softmax_vjp(s, upstream);
  for (std::size_t l = layers_.size(); l-- > 0;) {
    if (layers_[l].activation == Activation::kReLU)
      delta = (pre[l].array() > 0.0).select(delta, 0.0);
    grads[2 * l] += delta * inputs[l].transpose();
    grads[2 * l + 1].col(0) += delta;
    if (l > 0) delta = layers_[l].weights.transpose() * delta;
  }
}

std::vector<Mat> MlpClassifier::backward(const Vec& x, const Vec& upstream) const {
  std::vector<Mat> grads = zero_grads();
  accumulate_gradient(x, upstream, grads);
  return grads;
}

std::vector<Mat*> MlpClassifier::param_blocks() {
  std::vector<Mat*> blocks;
  for (auto& layer : layers_) {
    blocks.push_back(&layer.weights);
    blocks.push_back(&layer.bias);
  }
  return blocks;
}

std::vector<Mat> MlpClassifier::zero_grads() const {
  std::vector<Mat> grads;
  for (const auto& layer : layers_) {
    grads.emplace_back(Mat::Zero(layer.weights.rows(), layer.weights.cols()));
    grads.emplace_back(Mat::Zero(layer.bias.rows(), 1));
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Aggregator

void AggregatorParams::validate() const {
  if (weights.empty()) throw std::invalid_argument("aggregator: need at least one expert");
  const Eigen::Index c = bias.size();
  if (c < 2) throw std::invalid_argument("aggregator: need at least two classes");
  for (const Mat& w : weights)
    if (w.rows() != c || w.cols() != c)
      throw std::invalid_argument("aggregator: weight matrices must be |C| x |C|");
}

SimplexVector aggregator_forward(const AggregatorParams& params, const std::vector<int>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != params.expert_count())
    throw std::invalid_argument("aggregator: label row has wrong expert count");
  const Eigen::Index c = params.class_count();
  Vec logit = params.bias;
  bool any = false;
  for (std::size_t m = 0; m < labels.size(); ++m) {
    const int label = labels[m];
    if (label == kMissingLabel) continue;
    if (label < 0 || label >= c) throw std::invalid_argument("aggregator: label out of range");
    logit += params.weights[m].col(label);
    any = true;
  }
  if (!any) throw std::invalid_argument("aggregator: row with all labels missing");
  return softmax(logit);
}

void aggregator_accumulate_gradient(const AggregatorParams& params, const std::vector<int>& labels,
                                    const Vec& upstream, std::vector<Mat>& grads) {
  if (grads.size() != labels.size() + 1)
    throw std::invalid_argument("aggregator: gradient container has wrong layout");
  const Vec s = aggregator_forward(params, labels).probs();
  const Vec delta = softmax_vjp(s, upstream);
  for (std::size_t m = 0; m < labels.size(); ++m) {
    if (labels[m] == kMissingLabel) continue;
    grads[m].col(labels[m]) += delta;
  }
  grads.back().col(0) += delta;
}

std::vector<Mat> aggregator_backward(const AggregatorParams& params, const std::vector<int>& labels,
                                     const Vec& upstream) {
  std::vector<Mat> grads = aggregator_zero_grads(params);
  aggregator_accumulate_gradient(params, labels, upstream, grads);
  return grads;
}

std::vector<Mat*> aggregator_param_blocks(AggregatorParams& params) {
  std::vector<Mat*> blocks;
  for (auto& w : params.weights) blocks.push_back(&w);
  // bias is exposed by the trainer when it is a free parameter; see training.cpp
  return blocks;
}

std::vector<Mat> aggregator_zero_grads(const AggregatorParams& params) {
  std::vector<Mat> grads;
  const Eigen::Index c = params.class_count();
  for (Eigen::Index m = 0; m < params.expert_count(); ++m) grads.emplace_back(Mat::Zero(c, c));
  grads.emplace_back(Mat::Zero(c, 1));  // bias slot
  return grads;
}

// ---------------------------------------------------------------------------
// Forecaster

SimplexVector forecaster_forward(const SimplexVector& h_out, const SimplexVector& g_out,
                                 const SimplexVector& p) {
  const Eigen::Index c = h_out.classes();
  if (g_out.classes() != c || p.classes() != c)
    throw std::invalid_argument("forecaster: class counts differ");
  for (Eigen::Index i = 0; i < c; ++i)
    if (p[i] <= 0.0) throw std::domain_error("forecaster: prior must be strictly positive");

  Vec v = h_out.probs().cwiseProduct(g_out.probs()).cwiseQuotient(p.probs());
  if (v.sum() == 0.0) v = Vec::Constant(c, 1e-30);
  const double total = v.sum();
  if (total <= 0.0) throw std::domain_error("forecaster: degenerate input, zero normalizer");
  return SimplexVector::from_normalized(v / total);
}

// ---------------------------------------------------------------------------
// Classifier dispatch

Eigen::Index Classifier::class_count() const {
  return is_tabular() ? tabular().class_count() : mlp().class_count();
}

SimplexVector Classifier::forward(const CrowdDataset::Row& row) const {
  if (is_tabular()) {
    if (row.x_id < 0)
      throw std::invalid_argument("classifier: tabular classifier needs a discrete x_id");
    return tabular().forward(row.x_id);
  }
  return mlp().forward(row.features);
}

void Classifier::accumulate_gradient(const CrowdDataset::Row& row, const Vec& upstream,
                                     std::vector<Mat>& grads) const {
  if (is_tabular()) {
    tabular().accumulate_gradient(row.x_id, upstream, grads.at(0));
  } else {
    mlp().accumulate_gradient(row.features, upstream, grads);
  }
}

std::vector<Mat*> Classifier::param_blocks() {
  if (is_tabular()) return {&tabular().logits()};
  return mlp().param_blocks();
}

std::vector<Mat> Classifier::zero_grads() const {
  if (is_tabular()) {
    return {Mat::Zero(tabular().input_count(), tabular().class_count())};
  }
  return mlp().zero_grads();
}

}  // namespace crowdmig
