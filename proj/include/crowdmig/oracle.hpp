#pragma once

#include "crowdmig/baselines.hpp"
#include "crowdmig/crowdsim.hpp"
#include "crowdmig/divergence.hpp"
#include "crowdmig/models.hpp"
#include "crowdmig/rng.hpp"

#include <cstdint>
#include <vector>

namespace crowdmig {

/// A finite generating model with discrete x, amenable to exact
/// enumeration: the senior label tuple is the state, junior labels being
/// deterministic functions of it. Guarded at <= 1e7 enumerated states.
struct DiscreteWorld {
  int class_count = 0;
  Vec prior;
  std::vector<ExpertSpec> experts;
  Mat p_x_given_y;           // C rows, |X| columns
  std::vector<int> seniors;  // indices into experts

  // Requires an IdentityOfY or FiniteTable x model.
  static DiscreteWorld from_spec(const WorldSpec& spec);

  int x_count() const { return static_cast<int>(p_x_given_y.cols()); }
  int senior_count() const { return static_cast<int>(seniors.size()); }
  int expert_count() const { return static_cast<int>(experts.size()); }
  std::size_t tuple_count() const;

  // Senior labels encoded in mixed radix: senior s holds digit
  // (t / C^s) % C.
  std::vector<int> senior_tuple(std::size_t t) const;
  // All M expert labels in state t (juniors expanded).
  std::vector<int> full_labels(std::size_t t) const;
};

/// Exact joint distribution over (Y, X, senior tuple), with the
/// marginals every oracle needs.
struct JointTable {
  std::vector<Mat> by_class;  // per y: |X| x |T| entries P(Y=y, X=x, T=t)
  Mat xt;                     // P(X=x, T=t)
  Vec x_marginal;             // P(X=x)
  Vec t_marginal;             // P(T=t)
};

JointTable enumerate_joint(const DiscreteWorld& world);

/// Bayesian posteriors: h*(x) = P(Y|X=x), g*(t) = P(Y|T=t) (juniors are
/// functions of the seniors, so conditioning on the senior tuple equals
/// conditioning on all labels), zeta*(x,t) = P(Y|X=x,T=t). Rows for
/// probability-zero conditioning events are marked unreachable and
/// filled uniform; they are never sampled.
struct IntersectionTriple {
  Mat h_star;     // |X| x C
  Mat g_star;     // |T| x C
  Mat zeta_star;  // (|X|*|T|) x C, row index x * |T| + t
  Vec prior;
  std::vector<bool> x_reachable, t_reachable, xt_reachable;
};

IntersectionTriple bayes_posteriors(const DiscreteWorld& world, const JointTable& joint);

// f-mutual information between X and the label tuple, computed as
// sum over cells of V * f(U / V) with U the joint and V the product of
// marginals (zero-probability cells contribute their f-limits).
double f_mutual_information(const JointTable& joint, FKind kind);

// The same sum with the arguments transposed, sum of U * f(V / U);
// surfaced by the verify report alongside the value above.
double f_mutual_information_swapped(const JointTable& joint, FKind kind);

// Expectation of the gain objective under the exact model:
// E_U[partial_f(K)] - E_V[fstar_of_partial_f(K)] with
// K(x,t) = sum_c h(x)_c g(t)_c / p_c (clamped at kAgreementFloor).
double expected_mig(const JointTable& joint, const Mat& h_table, const Mat& g_table, const Vec& p,
                    FKind kind);

// The constructive aggregator weights: log confusion for seniors
// (entries clamped at kProbFloor before the log), zero matrices for
// juniors, bias = log prior.
AggregatorParams theorem1_weights(const DiscreteWorld& world);

// Tabulates a weighted-average aggregator over every senior tuple.
Mat aggregator_table(const DiscreteWorld& world, const AggregatorParams& params);
// Tabulates a classifier over every x id.
Mat classifier_table(const DiscreteWorld& world, const Classifier& classifier);

// E log sum_c h(X)_c prod_m W^m[c, Y^m], exactly over the joint.
// Returns -inf when a positive-probability state has zero likelihood.
double mle_expected_likelihood(const DiscreteWorld& world, const JointTable& joint,
                               const Mat& h_table, const TransitionMatrices& transitions);

struct MlePopulationOptimum {
  TransitionMatrices transitions;
  double value = 0.0;
};

// max over transition matrices of the expected likelihood for a fixed
// classifier table: population-level EM sweeps (each row's optimum given
// the posteriors is its expected conditional counts) run from a
// deterministic multi-start set, best result returned. Convergence at
// absolute improvement < 1e-10 or 10000 sweeps.
MlePopulationOptimum maximize_mle_over_w(const DiscreteWorld& world, const JointTable& joint,
                                         const Mat& h_table);

// Exact accuracies of the Bayes-optimal predictors (argmax of the
// respective posterior against the true class).
double bayes_accuracy_classifier(const JointTable& joint);
double bayes_accuracy_aggregator(const JointTable& joint);
double bayes_accuracy_forecaster(const JointTable& joint);

// --------------------------------------------------------------------------
// Generators used by the verification suites.

struct RandomWorldOptions {
  int min_classes = 2, max_classes = 3;
  int min_seniors = 2, max_seniors = 4;
  int min_juniors = 0, max_juniors = 3;
  double min_confusion_entry = 0.05;
};

// Random enumerable world: strictly positive confusion rows, identity or
// finite-table x model, naive/copycat juniors.
WorldSpec random_discrete_world(Rng& rng, const RandomWorldOptions& opts = {});

// Row-wise softmax(log clamped(table) + noise) perturbation; scale 0
// returns the table itself (up to clamping).
Mat perturb_table(Rng& rng, const Mat& table, double scale);

}  // namespace crowdmig
