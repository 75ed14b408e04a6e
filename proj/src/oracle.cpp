#include "crowdmig/oracle.hpp"

#include <cmath>
#include <limits>

namespace crowdmig {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kStateGuard = 10'000'000;
}  // namespace

DiscreteWorld DiscreteWorld::from_spec(const WorldSpec& spec) {
  spec.validate();
  DiscreteWorld world;
  world.class_count = spec.class_count;
  world.prior = spec.prior;
  world.experts = spec.experts;
  world.seniors = spec.senior_indices();
  if (std::holds_alternative<XModelIdentity>(spec.x_model)) {
    world.p_x_given_y = Mat::Identity(spec.class_count, spec.class_count);
  } else if (const auto* table = std::get_if<XModelFiniteTable>(&spec.x_model)) {
    world.p_x_given_y = table->p_x_given_y;
  } else {
    throw std::invalid_argument("oracle: continuous x models are not enumerable");
  }

  double states = static_cast<double>(world.x_count()) * world.class_count;
  for (int s = 0; s < world.senior_count(); ++s) states *= world.class_count;
  if (states > static_cast<double>(kStateGuard))
    throw std::runtime_error("oracle: state space exceeds the enumeration guard");
  return world;
}

std::size_t DiscreteWorld::tuple_count() const {
  std::size_t t = 1;
  for (int s = 0; s < senior_count(); ++s) t *= static_cast<std::size_t>(class_count);
  return t;
}

std::vector<int> DiscreteWorld::senior_tuple(std::size_t t) const {
  std::vector<int> digits(senior_count());
  for (int s = 0; s < senior_count(); ++s) {
    digits[s] = static_cast<int>(t % class_count);
    t /= class_count;
  }
  return digits;
}

std::vector<int> DiscreteWorld::full_labels(std::size_t t) const {
  const std::vector<int> digits = senior_tuple(t);
  std::vector<int> labels(experts.size(), kMissingLabel);
  for (int s = 0; s < senior_count(); ++s) labels[seniors[s]] = digits[s];
  for (std::size_t m = 0; m < experts.size(); ++m) {
    if (const auto* naive = std::get_if<NaiveConstantExpert>(&experts[m]))
      labels[m] = naive->label;
    else if (const auto* copycat = std::get_if<CopycatExpert>(&experts[m]))
      labels[m] = labels[copycat->senior_index];
  }
  return labels;
}

JointTable enumerate_joint(const DiscreteWorld& world) {
  const int c = world.class_count;
  const int x_count = world.x_count();
  const std::size_t t_count = world.tuple_count();

  JointTable joint;
  joint.by_class.assign(c, Mat::Zero(x_count, t_count));
  joint.xt = Mat::Zero(x_count, t_count);

  for (std::size_t t = 0; t < t_count; ++t) {
    const std::vector<int> digits = world.senior_tuple(t);
    for (int y = 0; y < c; ++y) {
      double label_prob = 1.0;
      for (int s = 0; s < world.senior_count(); ++s)
        label_prob *= std::get<SeniorExpert>(world.experts[world.seniors[s]])
                          .confusion(y, digits[s]);
      const double base = world.prior(y) * label_prob;
      if (base == 0.0) continue;
      for (int x = 0; x < x_count; ++x)
        joint.by_class[y](x, t) = base * world.p_x_given_y(y, x);
    }
  }
  for (int y = 0; y < c; ++y) joint.xt += joint.by_class[y];
  joint.x_marginal = joint.xt.rowwise().sum();
  joint.t_marginal = joint.xt.colwise().sum().transpose();
  return joint;
}

IntersectionTriple bayes_posteriors(const DiscreteWorld& world, const JointTable& joint) {
  const int c = world.class_count;
  const int x_count = world.x_count();
  const Eigen::Index t_count = joint.xt.cols();
  const double uniform = 1.0 / static_cast<double>(c);

  IntersectionTriple triple;
  triple.prior = world.prior;
  triple.h_star = Mat::Constant(x_count, c, uniform);
  triple.g_star = Mat::Constant(t_count, c, uniform);
  triple.zeta_star = Mat::Constant(static_cast<Eigen::Index>(x_count) * t_count, c, uniform);
  triple.x_reachable.assign(x_count, false);
  triple.t_reachable.assign(t_count, false);
  triple.xt_reachable.assign(static_cast<std::size_t>(x_count) * t_count, false);

  for (int x = 0; x < x_count; ++x) {
    const double px = joint.x_marginal(x);
    if (px <= 0.0) continue;
    triple.x_reachable[x] = true;
    for (int y = 0; y < c; ++y) triple.h_star(x, y) = joint.by_class[y].row(x).sum() / px;
  }
  for (Eigen::Index t = 0; t < t_count; ++t) {
    const double pt = joint.t_marginal(t);
    if (pt <= 0.0) continue;
    triple.t_reachable[t] = true;
    for (int y = 0; y < c; ++y) triple.g_star(t, y) = joint.by_class[y].col(t).sum() / pt;
  }
  for (int x = 0; x < x_count; ++x) {
    for (Eigen::Index t = 0; t < t_count; ++t) {
      const double pxt = joint.xt(x, t);
      if (pxt <= 0.0) continue;
      const Eigen::Index row = static_cast<Eigen::Index>(x) * t_count + t;
      triple.xt_reachable[row] = true;
      for (int y = 0; y < c; ++y) triple.zeta_star(row, y) = joint.by_class[y](x, t) / pxt;
    }
  }
  return triple;
}

double f_mutual_information(const JointTable& joint, FKind kind) {
  double mi = 0.0;
  for (Eigen::Index x = 0; x < joint.xt.rows(); ++x) {
    for (Eigen::Index t = 0; t < joint.xt.cols(); ++t) {
      const double v = joint.x_marginal(x) * joint.t_marginal(t);
      if (v <= 0.0) continue;
      const double u = joint.xt(x, t);
      mi += v * (u > 0.0 ? f_value(kind, u / v) : f_value_at_zero(kind));
    }
  }
  return mi;
}

double f_mutual_information_swapped(const JointTable& joint, FKind kind) {
  double mi = 0.0;
  for (Eigen::Index x = 0; x < joint.xt.rows(); ++x) {
    for (Eigen::Index t = 0; t < joint.xt.cols(); ++t) {
      const double u = joint.xt(x, t);
      if (u <= 0.0) continue;
      const double v = joint.x_marginal(x) * joint.t_marginal(t);
      mi += u * f_value(kind, v / u);
    }
  }
  return mi;
}

double expected_mig(const JointTable& joint, const Mat& h_table, const Mat& g_table, const Vec& p,
                    FKind kind) {
  if (h_table.rows() != joint.xt.rows() || g_table.rows() != joint.xt.cols())
    throw std::invalid_argument("expected_mig: table shapes do not cover the state space");
  if (h_table.cols() != p.size() || g_table.cols() != p.size())
    throw std::invalid_argument("expected_mig: class count mismatch");
  for (Eigen::Index cls = 0; cls < p.size(); ++cls)
    if (p(cls) <= 0.0) throw std::domain_error("expected_mig: p must be strictly positive");

  const Mat g_over_p = g_table * p.cwiseInverse().asDiagonal();
  double same = 0.0, cross = 0.0;
  for (Eigen::Index x = 0; x < joint.xt.rows(); ++x) {
    for (Eigen::Index t = 0; t < joint.xt.cols(); ++t) {
      const double u = joint.xt(x, t);
      const double v = joint.x_marginal(x) * joint.t_marginal(t);
      if (u <= 0.0 && v <= 0.0) continue;
      const double k = std::max(h_table.row(x).dot(g_over_p.row(t)), kAgreementFloor);
      if (u > 0.0) same += u * partial_f(kind, k);
      if (v > 0.0) cross += v * fstar_of_partial_f(kind, k);
    }
  }
  return same - cross;
}

AggregatorParams theorem1_weights(const DiscreteWorld& world) {
  AggregatorParams params;
  const int c = world.class_count;
  for (const auto& expert : world.experts) {
    if (const auto* senior = std::get_if<SeniorExpert>(&expert))
      params.weights.push_back(
          senior->confusion.cwiseMax(kProbFloor).cwiseMin(1.0).array().log().matrix());
    else
      params.weights.push_back(Mat::Zero(c, c));
  }
  params.bias = world.prior.array().log().matrix();
  params.validate();
  return params;
}

Mat aggregator_table(const DiscreteWorld& world, const AggregatorParams& params) {
  const std::size_t t_count = world.tuple_count();
  Mat table(static_cast<Eigen::Index>(t_count), world.class_count);
  for (std::size_t t = 0; t < t_count; ++t)
    table.row(static_cast<Eigen::Index>(t)) =
        aggregator_forward(params, world.full_labels(t)).probs().transpose();
  return table;
}

Mat classifier_table(const DiscreteWorld& world, const Classifier& classifier) {
  Mat table(world.x_count(), world.class_count);
  CrowdDataset::Row row;
  for (int x = 0; x < world.x_count(); ++x) {
    row.x_id = x;
    table.row(x) = classifier.forward(row).probs().transpose();
  }
  return table;
}

// ---------------------------------------------------------------------------
// Expected likelihood of the product-form aggregation model

namespace {

// log sum_c h(x)_c prod_m W^m[c, y_m(t)] per (x, t), as a |X| x |T|
// matrix of log-inner values (-inf where the mixture is zero).
Mat log_inner_table(const DiscreteWorld& world, const Mat& h_table,
                    const TransitionMatrices& transitions) {
  const int c = world.class_count;
  const std::size_t t_count = world.tuple_count();

  // Per-tuple expert log products, shared across x.
  Mat log_w(static_cast<Eigen::Index>(t_count), c);
  for (std::size_t t = 0; t < t_count; ++t) {
    const std::vector<int> labels = world.full_labels(t);
    for (int cls = 0; cls < c; ++cls) {
      double acc = 0.0;
      for (std::size_t m = 0; m < labels.size(); ++m) {
        const double entry = transitions.mats[m](cls, labels[m]);
        if (entry <= 0.0) {
          acc = -kInf;
          break;
        }
        acc += std::log(entry);
      }
      log_w(static_cast<Eigen::Index>(t), cls) = acc;
    }
  }

  Mat out(h_table.rows(), static_cast<Eigen::Index>(t_count));
  for (Eigen::Index x = 0; x < h_table.rows(); ++x) {
    for (std::size_t t = 0; t < t_count; ++t) {
      double top = -kInf;
      for (int cls = 0; cls < c; ++cls) {
        const double lh = h_table(x, cls) > 0.0 ? std::log(h_table(x, cls)) : -kInf;
        top = std::max(top, lh + log_w(static_cast<Eigen::Index>(t), cls));
      }
      double value;
      if (top == -kInf) {
        value = -kInf;
      } else {
        double sum = 0.0;
        for (int cls = 0; cls < c; ++cls) {
          const double lh = h_table(x, cls) > 0.0 ? std::log(h_table(x, cls)) : -kInf;
          const double a = lh + log_w(static_cast<Eigen::Index>(t), cls);
          if (a != -kInf) sum += std::exp(a - top);
        }
        value = top + std::log(sum);
      }
      out(x, static_cast<Eigen::Index>(t)) = value;
    }
  }
  return out;
}

}  // namespace

double mle_expected_likelihood(const DiscreteWorld& world, const JointTable& joint,
                               const Mat& h_table, const TransitionMatrices& transitions) {
  if (transitions.expert_count() != world.expert_count())
    throw std::invalid_argument("mle_expected_likelihood: expert count mismatch");
  const Mat log_inner = log_inner_table(world, h_table, transitions);
  double total = 0.0;
  for (Eigen::Index x = 0; x < joint.xt.rows(); ++x) {
    for (Eigen::Index t = 0; t < joint.xt.cols(); ++t) {
      const double u = joint.xt(x, t);
      if (u <= 0.0) continue;
      if (log_inner(x, t) == -kInf) return -kInf;
      total += u * log_inner(x, t);
    }
  }
  return total;
}

MlePopulationOptimum maximize_mle_over_w(const DiscreteWorld& world, const JointTable& joint,
                                         const Mat& h_table) {
  const int c = world.class_count;
  const int m = world.expert_count();
  const std::size_t t_count = world.tuple_count();
  const double uniform = 1.0 / static_cast<double>(c);

  // Deterministic multi-start set: the landscape has saddles (a uniform
  // start can stall), so sweep from several structured and random points.
  std::vector<TransitionMatrices> starts;
  starts.push_back({std::vector<Mat>(m, Mat::Constant(c, c, uniform))});
  starts.push_back({std::vector<Mat>(
      m, (0.9 * Mat::Identity(c, c) + Mat::Constant(c, c, 0.1 * uniform)))});
  Rng rng(0x5eedULL);
  for (int s = 0; s < 6; ++s) {
    TransitionMatrices w;
    for (int e = 0; e < m; ++e) {
      Mat mat(c, c);
      for (int r = 0; r < c; ++r) mat.row(r) = rng.simplex_point(c).transpose();
      w.mats.push_back(std::move(mat));
    }
    starts.push_back(std::move(w));
  }

  // Cache per-tuple label vectors once.
  std::vector<std::vector<int>> labels(t_count);
  for (std::size_t t = 0; t < t_count; ++t) labels[t] = world.full_labels(t);

  MlePopulationOptimum best;
  best.value = -kInf;

  for (auto& w : starts) {
    double prev = mle_expected_likelihood(world, joint, h_table, w);
    for (int sweep = 0; sweep < 10000; ++sweep) {
      // E step: posterior over the latent class per reachable state.
      std::vector<Mat> counts(m, Mat::Zero(c, c));
      for (Eigen::Index x = 0; x < joint.xt.rows(); ++x) {
        for (std::size_t t = 0; t < t_count; ++t) {
          const double u = joint.xt(x, static_cast<Eigen::Index>(t));
          if (u <= 0.0) continue;
          Vec logits(c);
          for (int cls = 0; cls < c; ++cls) {
            double acc = h_table(x, cls) > 0.0 ? std::log(h_table(x, cls)) : -kInf;
            for (int e = 0; e < m && acc != -kInf; ++e) {
              const double entry = w.mats[e](cls, labels[t][e]);
              acc = entry > 0.0 ? acc + std::log(entry) : -kInf;
            }
            logits(cls) = acc;
          }
          const double top = logits.maxCoeff();
          Vec q;
          if (!std::isfinite(top)) {
            q = Vec::Constant(c, uniform);
          } else {
            q = (logits.array() - top).exp();
            q /= q.sum();
          }
          // M-step numerators: expected conditional counts.
          for (int e = 0; e < m; ++e) counts[e].col(labels[t][e]) += u * q;
        }
      }
      for (int e = 0; e < m; ++e) {
        for (int r = 0; r < c; ++r) {
          const double total = counts[e].row(r).sum();
          if (total <= 0.0)
            w.mats[e].row(r).setConstant(uniform);
          else
            w.mats[e].row(r) = counts[e].row(r) / total;
        }
      }
      const double value = mle_expected_likelihood(world, joint, h_table, w);
      if (std::isfinite(value) && std::isfinite(prev) && std::abs(value - prev) < 1e-10) {
        prev = value;
        break;
      }
      if (value == -kInf && prev == -kInf) break;
      prev = value;
    }
    if (prev > best.value) {
      best.value = prev;
      best.transitions = w;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Bayes-optimal accuracies

double bayes_accuracy_classifier(const JointTable& joint) {
  double acc = 0.0;
  for (Eigen::Index x = 0; x < joint.xt.rows(); ++x) {
    double top = 0.0;
    for (const Mat& slice : joint.by_class) top = std::max(top, slice.row(x).sum());
    acc += top;
  }
  return acc;
}

double bayes_accuracy_aggregator(const JointTable& joint) {
  double acc = 0.0;
  for (Eigen::Index t = 0; t < joint.xt.cols(); ++t) {
    double top = 0.0;
    for (const Mat& slice : joint.by_class) top = std::max(top, slice.col(t).sum());
    acc += top;
  }
  return acc;
}

double bayes_accuracy_forecaster(const JointTable& joint) {
  double acc = 0.0;
  for (Eigen::Index x = 0; x < joint.xt.rows(); ++x) {
    for (Eigen::Index t = 0; t < joint.xt.cols(); ++t) {
      double top = 0.0;
      for (const Mat& slice : joint.by_class) top = std::max(top, slice(x, t));
      acc += top;
    }
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Generators

WorldSpec random_discrete_world(Rng& rng, const RandomWorldOptions& opts) {
  WorldSpec spec;
  spec.class_count =
      opts.min_classes + static_cast<int>(rng.next_u64() %
                                          static_cast<std::uint64_t>(opts.max_classes -
                                                                     opts.min_classes + 1));
  const int c = spec.class_count;
  spec.prior = rng.simplex_point(c, 0.1);

  const int seniors =
      opts.min_seniors + static_cast<int>(rng.next_u64() %
                                          static_cast<std::uint64_t>(opts.max_seniors -
                                                                     opts.min_seniors + 1));
  for (int s = 0; s < seniors; ++s) {
    Mat confusion(c, c);
    for (int r = 0; r < c; ++r) {
      Vec row = rng.simplex_point(c, opts.min_confusion_entry).transpose();
      row(r) += 0.5;  // informative: lean toward the correct class
      confusion.row(r) = row.transpose() / row.sum();
    }
    spec.experts.push_back(SeniorExpert{confusion});
  }

  const int juniors =
      opts.min_juniors + static_cast<int>(rng.next_u64() %
                                          static_cast<std::uint64_t>(opts.max_juniors -
                                                                     opts.min_juniors + 1));
  for (int j = 0; j < juniors; ++j) {
    if (rng.uniform() < 0.5)
      spec.experts.push_back(NaiveConstantExpert{static_cast<int>(rng.next_u64() % c)});
    else
      spec.experts.push_back(
          CopycatExpert{static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(seniors))});
  }

  if (rng.uniform() < 0.5) {
    spec.x_model = XModelIdentity{};
  } else {
    const int x_count = c * (1 + static_cast<int>(rng.next_u64() % 2));
    Mat table(c, x_count);
    for (int r = 0; r < c; ++r) table.row(r) = rng.simplex_point(x_count, 0.05).transpose();
    spec.x_model = XModelFiniteTable{table};
  }
  spec.validate();
  return spec;
}

Mat perturb_table(Rng& rng, const Mat& table, double scale) {
  Mat out(table.rows(), table.cols());
  for (Eigen::Index r = 0; r < table.rows(); ++r) {
    Vec logits = table.row(r).transpose().cwiseMax(kProbFloor).array().log().matrix();
    for (Eigen::Index c = 0; c < logits.size(); ++c) logits(c) += scale * rng.normal();
    out.row(r) = softmax(logits).probs().transpose();
  }
  return out;
}

}  // namespace crowdmig
