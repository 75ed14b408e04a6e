#include "crowdmig/persist.hpp"

#include "crowdmig/parallel.hpp"
#include "crowdmig/training.hpp"

#include <json.hpp>

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

namespace crowdmig {

using nlohmann::json;

MethodKind method_from_string(const std::string& name) {
  if (name == "max-mig") return MethodKind::kMaxMig;
  if (name == "mle") return MethodKind::kMle;
  if (name == "majority-vote") return MethodKind::kMajorityVote;
  throw std::invalid_argument("unknown method: '" + name +
                              "' (expected max-mig|mle|majority-vote)");
}

std::string to_string(MethodKind method) {
  switch (method) {
    case MethodKind::kMaxMig: return "max-mig";
    case MethodKind::kMle: return "mle";
    case MethodKind::kMajorityVote: return "majority-vote";
  }
  throw std::logic_error("unreachable MethodKind");
}

// ---------------------------------------------------------------------------
// JSON helpers: matrices as {rows, cols, data(row-major)}

namespace {

json mat_to_json(const Mat& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Mat mat_from_json(const json& j) {
  const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
  const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw std::runtime_error("model file: matrix size mismatch");
  Mat m(rows, cols);
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[i++];
  return m;
}

json vec_to_json(const Vec& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Vec vec_from_json(const json& j) {
  const auto data = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(data.data(), static_cast<Eigen::Index>(data.size()));
}

json classifier_to_json(const Classifier& classifier) {
  json j;
  if (classifier.is_tabular()) {
    j["kind"] = "tabular";
    j["logits"] = mat_to_json(classifier.tabular().logits());
  } else {
    j["kind"] = "mlp";
    json layers = json::array();
    for (const auto& layer : classifier.mlp().layers()) {
      layers.push_back({{"weights", mat_to_json(layer.weights)},
                        {"bias", mat_to_json(layer.bias)},
                        {"activation",
                         layer.activation == Activation::kReLU ? "relu" : "identity"}});
    }
    j["layers"] = layers;
  }
  return j;
}

Classifier classifier_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "tabular") return Classifier(TabularClassifier(mat_from_json(j.at("logits"))));
  if (kind != "mlp") throw std::runtime_error("model file: unknown classifier kind " + kind);
  std::vector<MlpLayer> layers;
  for (const auto& l : j.at("layers")) {
    MlpLayer layer;
    layer.weights = mat_from_json(l.at("weights"));
    layer.bias = mat_from_json(l.at("bias"));
    layer.activation =
        l.at("activation").get<std::string>() == "relu" ? Activation::kReLU : Activation::kIdentity;
    layers.push_back(std::move(layer));
  }
  return Classifier(MlpClassifier(std::move(layers)));
}

}  // namespace

void TrainedModel::save(const std::string& path) const {
  json j;
  j["kind"] = to_string(method);
  j["class_count"] = class_count;
  j["expert_count"] = expert_count;
  j["f"] = to_string(f_kind);
  j["prior"] = vec_to_json(prior);
  j["classifier"] = classifier_to_json(classifier);
  if (aggregator) {
    json weights = json::array();
    for (const Mat& w : aggregator->weights) weights.push_back(mat_to_json(w));
    j["aggregator"] = {{"weights", weights}, {"bias", vec_to_json(aggregator->bias)}};
  }
  if (transitions) {
    json mats = json::array();
    for (const Mat& w : transitions->mats) mats.push_back(mat_to_json(w));
    j["transitions"] = {{"mats", mats}, {"prior", vec_to_json(mle_prior)}};
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  out << j.dump(1) << '\n';
  if (!out) throw std::runtime_error("failed while writing model file: " + path);
}

TrainedModel TrainedModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  json j;
  in >> j;

  TrainedModel model(classifier_from_json(j.at("classifier")));
  model.method = method_from_string(j.at("kind").get<std::string>());
  model.class_count = j.at("class_count").get<int>();
  model.expert_count = j.at("expert_count").get<int>();
  model.f_kind = fkind_from_string(j.at("f").get<std::string>());
  model.prior = vec_from_json(j.at("prior"));
  if (j.contains("aggregator")) {
    AggregatorParams params;
    for (const auto& w : j.at("aggregator").at("weights")) params.weights.push_back(mat_from_json(w));
    params.bias = vec_from_json(j.at("aggregator").at("bias"));
    params.validate();
    model.aggregator = std::move(params);
  }
  if (j.contains("transitions")) {
    TransitionMatrices w;
    for (const auto& m : j.at("transitions").at("mats")) w.mats.push_back(mat_from_json(m));
    w.validate();
    model.transitions = std::move(w);
    model.mle_prior = vec_from_json(j.at("transitions").at("prior"));
  }
  return model;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

// Posterior over classes proportional to base_c * prod_m W^m[c, y^m],
// computed in log space (the likelihood model's aggregation rule).
SimplexVector product_posterior(const Vec& base, const std::vector<int>& labels,
                                const TransitionMatrices& w) {
  const Eigen::Index c = base.size();
  Vec logits(c);
  for (Eigen::Index cls = 0; cls < c; ++cls) {
    double acc =
        base(cls) > 0.0 ? std::log(base(cls)) : -std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < labels.size(); ++m) {
      if (labels[m] == kMissingLabel) continue;
      const double entry = w.mats[m](cls, labels[m]);
      acc += entry > 0.0 ? std::log(entry) : -std::numeric_limits<double>::infinity();
    }
    logits(cls) = acc;
  }
  const double top = logits.maxCoeff();
  if (!std::isfinite(top)) return SimplexVector::uniform(c);
  Vec e = (logits.array() - top).exp();
  return SimplexVector::from_normalized(e / e.sum());
}

}  // namespace

EvalReport evaluate(const CrowdDataset& dataset, const TrainedModel& model) {
  dataset.validate();
  if (!dataset.has_truth())
    throw std::invalid_argument("evaluate: dataset must carry ground truth");
  if (dataset.class_count != model.class_count || dataset.expert_count != model.expert_count)
    throw std::invalid_argument("evaluate: dataset does not match the model's shape");

  const SimplexVector p = SimplexVector::from_probs(model.prior);
  const std::size_t rows = dataset.size();
  constexpr std::size_t kChunk = 1024;
  const std::size_t chunk_count = (rows + kChunk - 1) / kChunk;

  // Rows are independent; compute per chunk and merge counts in chunk
  // order, so the result is identical for any CROWD_MIG_THREADS setting.
  std::vector<Vec> h_raw(rows), g_raw(rows);
  std::vector<std::array<std::size_t, 3>> chunk_correct(chunk_count, {0, 0, 0});
  parallel_chunks(rows, kChunk, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& row = dataset.rows[i];
      const SimplexVector h = model.classifier.forward(row);
      SimplexVector g = [&] {
        switch (model.method) {
          case MethodKind::kMaxMig:
            return aggregator_forward(*model.aggregator, row.labels);
          case MethodKind::kMle:
            return product_posterior(model.mle_prior, row.labels, *model.transitions);
          case MethodKind::kMajorityVote: {
            Vec one_hot = Vec::Zero(model.class_count);
            one_hot(majority_vote(row.labels, model.class_count)) = 1.0;
            return SimplexVector::from_normalized(std::move(one_hot));
          }
        }
        throw std::logic_error("unreachable MethodKind");
      }();
      const SimplexVector zeta = [&] {
        switch (model.method) {
          case MethodKind::kMaxMig:
            return forecaster_forward(h, g, p);
          case MethodKind::kMle:
            return product_posterior(h.probs(), row.labels, *model.transitions);
          case MethodKind::kMajorityVote:
            return h;  // no aggregation model to condition on
        }
        throw std::logic_error("unreachable MethodKind");
      }();
      if (h.argmax() == row.truth) ++chunk_correct[chunk][0];
      if (g.argmax() == row.truth) ++chunk_correct[chunk][1];
      if (zeta.argmax() == row.truth) ++chunk_correct[chunk][2];
      h_raw[i] = h.probs();
      g_raw[i] = g.probs();
    }
  });

  std::size_t correct_h = 0, correct_g = 0, correct_z = 0;
  for (const auto& counts : chunk_correct) {
    correct_h += counts[0];
    correct_g += counts[1];
    correct_z += counts[2];
  }
  std::vector<SimplexVector> h_outs, g_outs;
  h_outs.reserve(rows);
  g_outs.reserve(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    h_outs.push_back(SimplexVector::from_normalized(std::move(h_raw[i])));
    g_outs.push_back(SimplexVector::from_normalized(std::move(g_raw[i])));
  }

  EvalReport report;
  const double n = static_cast<double>(dataset.size());
  report.accuracy_classifier = static_cast<double>(correct_h) / n;
  report.accuracy_aggregator = static_cast<double>(correct_g) / n;
  report.accuracy_forecaster = static_cast<double>(correct_z) / n;

  // Mean gain over consecutive batches (size-1 remnants dropped).
  constexpr std::size_t kEvalBatch = 256;
  double weighted = 0.0;
  std::size_t used = 0;
  for (std::size_t start = 0; start + 2 <= h_outs.size(); start += kEvalBatch) {
    const std::size_t b = std::min(kEvalBatch, h_outs.size() - start);
    if (b < 2) break;
    std::vector<SimplexVector> hb(h_outs.begin() + start, h_outs.begin() + start + b);
    std::vector<SimplexVector> gb(g_outs.begin() + start, g_outs.begin() + start + b);
    weighted += mig_batch(hb, gb, p, model.f_kind) * static_cast<double>(b);
    used += b;
  }
  report.mean_mig = used ? weighted / static_cast<double>(used) : 0.0;
  return report;
}

std::string format_report(const EvalReport& report) {
  std::ostringstream out;
  out.precision(6);
  out << "classifier accuracy:  " << report.accuracy_classifier << '\n'
      << "aggregator accuracy:  " << report.accuracy_aggregator << '\n'
      << "forecaster accuracy:  " << report.accuracy_forecaster << '\n'
      << "mean gain:            " << report.mean_mig << '\n';
  return out.str();
}

void write_report_csv(const std::string& path, const EvalReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report file: " + path);
  out.precision(17);
  out << "accuracy_classifier,accuracy_aggregator,accuracy_forecaster,mean_mig\n"
      << report.accuracy_classifier << ',' << report.accuracy_aggregator << ','
      << report.accuracy_forecaster << ',' << report.mean_mig << '\n';
}

}  // namespace crowdmig
