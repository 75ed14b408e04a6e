// Acceptance suite: numbered end-to-end criteria, one pass/fail line
// each. Run with no arguments for the full suite or with a criterion
// number (1..9) for a single one. Exits nonzero if any selected
// criterion fails.

#include "crowdmig/baselines.hpp"
#include "crowdmig/crowdsim.hpp"
#include "crowdmig/oracle.hpp"
#include "crowdmig/persist.hpp"
#include "crowdmig/training.hpp"
#include "test_util.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

using namespace crowdmig;
namespace ct = crowdmig::testing;

namespace {

const FKind kKinds[] = {FKind::kKL, FKind::kPearsonChiSq, FKind::kJensenShannon};

double seconds_since(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct PreparedWorld {
  DiscreteWorld world;
  JointTable joint;
  IntersectionTriple triple;
};

PreparedWorld prepare(const WorldSpec& spec) {
  DiscreteWorld world = DiscreteWorld::from_spec(spec);
  JointTable joint = enumerate_joint(world);
  IntersectionTriple triple = bayes_posteriors(world, joint);
  return {std::move(world), std::move(joint), std::move(triple)};
}

std::vector<PreparedWorld> random_worlds() {
  Rng rng(20240601);
  std::vector<PreparedWorld> out;
  for (int w = 0; w < 20; ++w) out.push_back(prepare(random_discrete_world(rng)));
  return out;
}

// Binary high-expertise seniors over a six-cell tabular datapoint space;
// the Bayes-optimal classifier is computed exactly from the tables.
WorldSpec recovery_world(bool skewed_prior, int extra_case = 1) {
  WorldSpec spec = preset(std::string(skewed_prior ? "luna" : "binary") + "-H-case" +
                          std::to_string(extra_case));
  Mat x_table(2, 6);
  if (skewed_prior)
    x_table << 0.35, 0.30, 0.15, 0.10, 0.06, 0.04, 0.04, 0.06, 0.10, 0.15, 0.30, 0.35;
  else
    x_table << 0.32, 0.28, 0.16, 0.10, 0.08, 0.06, 0.06, 0.08, 0.10, 0.16, 0.28, 0.32;
  spec.x_model = XModelFiniteTable{x_table};
  return spec;
}

MigConfig recovery_config(std::uint64_t seed) {
  MigConfig cfg;
  cfg.f_kind = FKind::kKL;
  cfg.learning_rate_h = 0.005;
  cfg.learning_rate_g = 0.005;
  cfg.batch_size = 64;
  cfg.epochs = 24;
  cfg.seed = seed;
  return cfg;
}

double tabular_test_accuracy(Classifier& classifier, const CrowdDataset& test) {
  return classifier_accuracy(classifier, test);
}

// ---------------------------------------------------------------------------

bool criterion1(std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const PreparedWorld pw = prepare(preset("mle-counterexample"));
  const Mat h_uniform = Mat::Constant(pw.world.x_count(), 2, 0.5);

  const MlePopulationOptimum posterior = maximize_mle_over_w(pw.world, pw.joint, pw.triple.h_star);
  const MlePopulationOptimum uniform = maximize_mle_over_w(pw.world, pw.joint, h_uniform);
  const double elapsed = seconds_since(start);

  const double ln_half = std::log(0.5);
  const bool posterior_ok = posterior.value <= 100.0 * ln_half + 1e-9;
  const bool uniform_ok = uniform.value >= ln_half - 1e-9;
  const bool time_ok = elapsed < 1.0;

  out << std::setprecision(12);
  out << "    posterior classifier best likelihood: " << posterior.value
      << " (required <= " << 100.0 * ln_half + 1e-9 << "): " << (posterior_ok ? "ok" : "FAIL")
      << '\n';
  out << "    uniform classifier best likelihood:   " << uniform.value
      << " (required >= " << ln_half - 1e-9 << "): " << (uniform_ok ? "ok" : "FAIL") << '\n';
  if (!uniform_ok)
    out << "      note: the requirement exceeds the attainable optimum; the exact global\n"
           "      maximum over transition matrices for the uniform classifier is 2 ln 0.5 =\n"
           "      "
        << 2.0 * ln_half << " (verified by exhaustive probing; see `crowdmig verify\n"
           "      --scope mle-counterexample`), so this bound cannot be met.\n";
  out << "    runtime: " << elapsed << " s (required < 1 s): " << (time_ok ? "ok" : "FAIL")
      << '\n';
  return posterior_ok && uniform_ok && time_ok;
}

bool criterion2(std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (const PreparedWorld& pw : random_worlds())
    for (FKind kind : kKinds)
      worst = std::max(worst,
                       std::abs(expected_mig(pw.joint, pw.triple.h_star, pw.triple.g_star,
                                             pw.world.prior, kind) -
                                f_mutual_information(pw.joint, kind)));
  const double elapsed = seconds_since(start);
  out << std::setprecision(12) << "    worst |expected gain - MI^f| over 20 worlds x 3 kinds: "
      << worst << " (tol 1e-9)\n    runtime: " << elapsed << " s (required < 10 s)\n";
  return worst <= 1e-9 && elapsed < 10.0;
}

bool criterion3(std::ostream& out) {
  double worst_g = 0.0, worst_zeta = 0.0;
  for (const PreparedWorld& pw : random_worlds()) {
    const Mat g_table = aggregator_table(pw.world, theorem1_weights(pw.world));
    const Eigen::Index t_count = g_table.rows();
    for (Eigen::Index t = 0; t < t_count; ++t)
      if (pw.triple.t_reachable[static_cast<std::size_t>(t)])
        worst_g = std::max(worst_g,
                           (g_table.row(t) - pw.triple.g_star.row(t)).cwiseAbs().maxCoeff());
    const SimplexVector p_star = SimplexVector::from_probs(pw.world.prior);
    for (Eigen::Index x = 0; x < pw.triple.h_star.rows(); ++x) {
      for (Eigen::Index t = 0; t < t_count; ++t) {
        if (!pw.triple.xt_reachable[static_cast<std::size_t>(x * t_count + t)]) continue;
        const SimplexVector zeta = forecaster_forward(
            SimplexVector::from_normalized(pw.triple.h_star.row(x).transpose()),
            SimplexVector::from_normalized(pw.triple.g_star.row(t).transpose()), p_star);
        worst_zeta = std::max(
            worst_zeta,
            (zeta.probs().transpose() - pw.triple.zeta_star.row(x * t_count + t)).cwiseAbs().maxCoeff());
      }
    }
  }
  out << std::setprecision(12) << "    worst aggregator deviation from the posterior: " << worst_g
      << "\n    worst forecaster deviation from the joint posterior: " << worst_zeta
      << " (tol 1e-9)\n";
  return worst_g <= 1e-9 && worst_zeta <= 1e-9;
}

bool criterion4(std::ostream& out) {
  Rng rng(4040);
  double worst_excess = -std::numeric_limits<double>::infinity();
  for (const PreparedWorld& pw : random_worlds()) {
    for (FKind kind : kKinds) {
      const double mi = f_mutual_information(pw.joint, kind);
      for (int probe = 0; probe < 200; ++probe) {
        const double scale = rng.uniform(0.01, 2.0);
        const double value = expected_mig(
            pw.joint, perturb_table(rng, pw.triple.h_star, scale),
            perturb_table(rng, pw.triple.g_star, scale),
            perturb_table(rng, pw.world.prior.transpose(), scale).row(0).transpose(), kind);
        worst_excess = std::max(worst_excess, value - mi);
      }
    }
  }
  out << std::setprecision(12)
      << "    worst (perturbed gain - MI^f) over 20 worlds x 3 kinds x 200 probes: "
      << worst_excess << " (required <= 1e-9)\n";
  return worst_excess <= 1e-9;
}

bool criterion5(std::ostream& out) {
  Rng rng(5050);
  double worst_tab = 0.0, worst_mlp = 0.0, worst_agg = 0.0;

  for (int trial = 0; trial < 100; ++trial) {
    const int c = 2 + static_cast<int>(rng.next_u64() % 2);
    TabularClassifier tab(3, c);
    for (Eigen::Index r = 0; r < 3; ++r)
      for (Eigen::Index col = 0; col < c; ++col) tab.logits()(r, col) = rng.uniform(-2.0, 2.0);
    Vec upstream(c);
    for (int i = 0; i < c; ++i) upstream(i) = rng.uniform(-1.0, 1.0);
    const int x_id = static_cast<int>(rng.next_u64() % 3);
    const Mat analytic = tab.backward(x_id, upstream);
    std::vector<Mat*> params{&tab.logits()};
    worst_tab = std::max(worst_tab,
                         ct::worst_fd_error(params, {analytic}, [&] {
                           return upstream.dot(tab.forward(x_id).probs());
                         }));
  }

  for (int trial = 0; trial < 100; ++trial) {
    MlpClassifier mlp({3, 5, 2 + static_cast<Eigen::Index>(trial % 2)}, 9000 + trial);
    Vec x(3), upstream(mlp.class_count());
    for (int i = 0; i < 3; ++i) x(i) = rng.uniform(-2.0, 2.0);
    for (Eigen::Index i = 0; i < upstream.size(); ++i) upstream(i) = rng.uniform(-1.0, 1.0);
    const std::vector<Mat> analytic = mlp.backward(x, upstream);
    worst_mlp = std::max(worst_mlp,
                         ct::worst_fd_error(mlp.param_blocks(), analytic, [&] {
                           return upstream.dot(mlp.forward(x).probs());
                         }));
  }

  for (int trial = 0; trial < 100; ++trial) {
    const int c = 2 + static_cast<int>(rng.next_u64() % 2);
    const int m = 1 + static_cast<int>(rng.next_u64() % 4);
    AggregatorParams g;
    g.bias = Vec(c);
    for (int i = 0; i < c; ++i) g.bias(i) = rng.uniform(-1.0, 1.0);
    std::vector<int> labels(m);
    for (int e = 0; e < m; ++e) {
      Mat w(c, c);
      for (int r = 0; r < c; ++r)
        for (int col = 0; col < c; ++col) w(r, col) = rng.uniform(-2.0, 2.0);
      g.weights.push_back(w);
      labels[e] = (e > 0 && rng.uniform() < 0.2) ? kMissingLabel
                                                 : static_cast<int>(rng.next_u64() % c);
    }
    Vec upstream(c);
    for (int i = 0; i < c; ++i) upstream(i) = rng.uniform(-1.0, 1.0);
    const std::vector<Mat> analytic = aggregator_backward(g, labels, upstream);
    std::vector<Mat> weight_grads(analytic.begin(), analytic.end() - 1);
    worst_agg = std::max(worst_agg,
                         ct::worst_fd_error(aggregator_param_blocks(g), weight_grads, [&] {
                           return upstream.dot(aggregator_forward(g, labels).probs());
                         }));
  }

  double worst_mig = 0.0;
  for (FKind kind : kKinds) {
    for (int trial = 0; trial < 100; ++trial) {
      const Eigen::Index c = 2 + (trial % 2);
      const std::size_t n = 2 + (trial % 5);
      std::vector<SimplexVector> h, g;
      for (std::size_t i = 0; i < n; ++i) {
        h.push_back(ct::random_simplex(rng, c));
        g.push_back(ct::random_simplex(rng, c));
      }
      const SimplexVector p = ct::random_simplex(rng, c);
      const MigBatchGrads grads = mig_batch_backward(h, g, p, kind, true);
      for (std::size_t i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < c; ++k) {
          auto poke_h = [&](double delta) {
            Vec probs = h[i].probs();
            probs(k) += delta;
            const SimplexVector saved = h[i];
            h[i] = SimplexVector::from_normalized(probs);
            const double v = mig_batch(h, g, p, kind);
            h[i] = saved;
            return v;
          };
          worst_mig = std::max(
              worst_mig, ct::rel_err((poke_h(1e-6) - poke_h(-1e-6)) / 2e-6, grads.dh[i](k)));
          auto poke_g = [&](double delta) {
            Vec probs = g[i].probs();
            probs(k) += delta;
            const SimplexVector saved = g[i];
            g[i] = SimplexVector::from_normalized(probs);
            const double v = mig_batch(h, g, p, kind);
            g[i] = saved;
            return v;
          };
          worst_mig = std::max(
              worst_mig, ct::rel_err((poke_g(1e-6) - poke_g(-1e-6)) / 2e-6, grads.dg[i](k)));
        }
      }
      for (Eigen::Index k = 0; k < c; ++k) {
        auto poke_p = [&](double delta) {
          Vec probs = p.probs();
          probs(k) += delta;
          return mig_batch(h, g, SimplexVector::from_normalized(probs), kind);
        };
        worst_mig = std::max(worst_mig,
                             ct::rel_err((poke_p(1e-6) - poke_p(-1e-6)) / 2e-6, grads.dp(k)));
      }
    }
  }

  out << std::setprecision(6) << "    worst relative fd error: tabular " << worst_tab
      << ", mlp " << worst_mlp << ", aggregator " << worst_agg << ", gain " << worst_mig
      << " (required < 1e-4, >= 100 instances each)\n";
  return worst_tab < 1e-4 && worst_mlp < 1e-4 && worst_agg < 1e-4 && worst_mig < 1e-4;
}

bool criterion6(std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const WorldSpec spec = recovery_world(false);
  const PreparedWorld pw = prepare(spec);
  const double bayes = bayes_accuracy_classifier(pw.joint);

  bool ok = true;
  for (std::uint64_t seed : {1, 2, 3}) {
    const CrowdDataset train_ds = sample_dataset(spec, 20000, seed);
    const CrowdDataset test_ds = sample_dataset(spec, 10000, seed + 1000);
    Classifier classifier(TabularClassifier(6, 2));
    const MaxMigResult result = train_max_mig(train_ds, classifier, recovery_config(seed));

    const double acc = tabular_test_accuracy(classifier, test_ds);
    const Mat g_table = aggregator_table(pw.world, result.aggregator);
    double tv_sum = 0.0;
    int reachable = 0;
    for (Eigen::Index t = 0; t < g_table.rows(); ++t) {
      if (!pw.triple.t_reachable[static_cast<std::size_t>(t)]) continue;
      tv_sum += 0.5 * (g_table.row(t) - pw.triple.g_star.row(t)).cwiseAbs().sum();
      ++reachable;
    }
    const double mean_tv = tv_sum / reachable;

    const bool acc_ok = std::abs(acc - bayes) <= 0.02;
    const bool tv_ok = mean_tv <= 0.05;
    ok = ok && acc_ok && tv_ok;
    out << std::setprecision(4) << "    seed " << seed << ": accuracy " << acc << " vs bayes "
        << bayes << " (" << (acc_ok ? "ok" : "FAIL") << "), mean aggregator TV " << mean_tv
        << " (" << (tv_ok ? "ok" : "FAIL") << ")\n";
  }
  const double elapsed = seconds_since(start);
  out << "    runtime: " << std::setprecision(3) << elapsed << " s (required < 120 s)\n";
  return ok && elapsed < 120.0;
}

bool criterion7(std::ostream& out) {
  bool ok = true;

  // Naive majority: the vote collapses while the gain objective holds.
  const WorldSpec case1 = recovery_world(false, 1);
  const WorldSpec case2 = recovery_world(false, 2);
  const double naive_rate = 0.5;  // uniform prior, juniors all report class 0
  for (std::uint64_t seed : {1, 2, 3}) {
    const CrowdDataset train1 = sample_dataset(case1, 20000, seed);
    const CrowdDataset test1 = sample_dataset(case1, 10000, seed + 1000);
    const CrowdDataset train2 = sample_dataset(case2, 20000, seed + 2000);
    const CrowdDataset test2 = sample_dataset(case2, 10000, seed + 3000);

    Classifier mig1(TabularClassifier(6, 2));
    train_max_mig(train1, mig1, recovery_config(seed));
    const double acc_mig1 = tabular_test_accuracy(mig1, test1);

    Classifier mig2(TabularClassifier(6, 2));
    train_max_mig(train2, mig2, recovery_config(seed));
    const double acc_mig2 = tabular_test_accuracy(mig2, test2);

    Classifier mv(TabularClassifier(6, 2));
    train_majority_vote(train2, mv, 8, 0.02, 64, seed);
    const double acc_mv = tabular_test_accuracy(mv, test2);

    const bool collapse_ok = std::abs(acc_mv - naive_rate) <= 0.02;
    const bool stable_ok = acc_mig2 >= acc_mig1 - 0.03;
    ok = ok && collapse_ok && stable_ok;
    out << std::setprecision(4) << "    seed " << seed << " naive majority: vote-trained "
        << acc_mv << " vs naive rate " << naive_rate << " (" << (collapse_ok ? "ok" : "FAIL")
        << "), gain-trained " << acc_mig2 << " vs its independent-mistakes run " << acc_mig1
        << " (" << (stable_ok ? "ok" : "FAIL") << ")\n";
  }

  // Correlated mistakes: the gain objective must beat the EM baseline.
  const WorldSpec case3 = recovery_world(true, 3);
  for (std::uint64_t seed : {1, 2, 3}) {
    const CrowdDataset train3 = sample_dataset(case3, 20000, seed + 4000);
    const CrowdDataset test3 = sample_dataset(case3, 10000, seed + 5000);

    Classifier mig3(TabularClassifier(6, 2));
    MigConfig mig_cfg = recovery_config(seed);
    mig_cfg.prior_mode = PriorMode::kTunedWithBiasTied;  // the prior is skewed and unknown
    train_max_mig(train3, mig3, mig_cfg);
    const double acc_mig = tabular_test_accuracy(mig3, test3);

    Classifier em3(TabularClassifier(6, 2));
    EmConfig em_cfg;
    em_cfg.rounds = 25;
    em_cfg.learning_rate = 0.05;
    em_cfg.batch_size = 64;
    em_cfg.seed = seed;
    train_mle_em(train3, em3, em_cfg);
    const double acc_em = tabular_test_accuracy(em3, test3);

    const bool gap_ok = acc_mig - acc_em >= 0.05;
    ok = ok && gap_ok;
    out << std::setprecision(4) << "    seed " << seed << " correlated mistakes: gain-trained "
        << acc_mig << " vs likelihood-EM " << acc_em << " (gap " << acc_mig - acc_em << ", "
        << (gap_ok ? "ok" : "FAIL") << ")\n";
  }
  return ok;
}

bool criterion8(std::ostream& out) {
  Rng rng(8080);
  double worst = 0.0;
  for (FKind kind : kKinds) {
    for (int trial = 0; trial < 40; ++trial) {
      const std::size_t n = 2 + rng.next_u64() % 63;
      const Eigen::Index c = 2 + static_cast<Eigen::Index>(rng.next_u64() % 4);
      const SimplexVector p = ct::random_simplex(rng, c);
      const std::vector<SimplexVector> outs(n, p);
      worst = std::max(worst, std::abs(mig_batch(outs, outs, p, kind)));
    }
  }
  out << std::setprecision(6) << "    worst |gain| with both models emitting p: " << worst
      << " (required <= 1e-12, batch sizes 2..64, 3 kinds)\n";
  return worst <= 1e-12;
}

bool criterion9(std::ostream& out) {
  const WorldSpec spec = recovery_world(false);
  const PreparedWorld pw = prepare(spec);
  const CrowdDataset ds = sample_dataset(spec, 50000, 777);
  const Mat counts = ct::cell_counts(pw.world, ds);

  Rng rng(909);
  const Mat h_perturbed = perturb_table(rng, pw.triple.h_star, 0.4);
  const Mat g_perturbed = perturb_table(rng, pw.triple.g_star, 0.4);
  const Vec p_perturbed = perturb_table(rng, pw.world.prior.transpose(), 0.4).row(0).transpose();

  struct Fixture {
    const char* name;
    const Mat& h;
    const Mat& g;
    const Vec& p;
    FKind kind;
  };
  const Fixture fixtures[] = {
      {"posterior triple, kl", pw.triple.h_star, pw.triple.g_star, pw.world.prior, FKind::kKL},
      {"posterior triple, js", pw.triple.h_star, pw.triple.g_star, pw.world.prior,
       FKind::kJensenShannon},
      {"perturbed triple, kl", h_perturbed, g_perturbed, p_perturbed, FKind::kKL},
      {"perturbed triple, pearson", h_perturbed, g_perturbed, p_perturbed,
       FKind::kPearsonChiSq},
  };

  bool ok = true;
  for (const Fixture& fx : fixtures) {
    const double expected = expected_mig(pw.joint, fx.h, fx.g, fx.p, fx.kind);
    const auto tables = ct::gain_cell_tables(fx.h, fx.g, fx.p, fx.kind);
    const double sampled = ct::gain_from_counts(tables, counts);
    const double se = ct::bootstrap_gain_se(tables, counts, 200, 3131);
    const double sigmas = std::abs(sampled - expected) / se;
    const bool this_ok = sigmas <= 3.0;
    ok = ok && this_ok;
    out << std::setprecision(8) << "    " << fx.name << ": sampled " << sampled << ", expected "
        << expected << ", |z| = " << std::setprecision(3) << sigmas << " ("
        << (this_ok ? "ok" : "FAIL") << ")\n";
  }
  return ok;
}

struct Criterion {
  int id;
  const char* label;
  std::function<bool(std::ostream&)> run;
};

const Criterion kCriteria[] = {
    {1, "correlated-mistakes likelihood optima (exact)", criterion1},
    {2, "expected gain equals MI^f at the posterior triple (exact)", criterion2},
    {3, "constructive weights and forecaster match the posteriors (exact)", criterion3},
    {4, "no perturbed triple beats MI^f (maximality probe)", criterion4},
    {5, "all backward passes match central finite differences", criterion5},
    {6, "trained recovery on independent mistakes (statistical)", criterion6},
    {7, "robustness ordering across crowd structures (statistical)", criterion7},
    {8, "gain zero point at the shared constant forecast", criterion8},
    {9, "sampled gain matches the exact expectation (bootstrap)", criterion9},
};

}  // namespace

int main(int argc, char** argv) {
  int selected = 0;
  if (argc > 1) {
    selected = std::atoi(argv[1]);
    if (selected < 1 || selected > 9) {
      std::cerr << "usage: acceptance [1..9]\n";
      return 2;
    }
  }

  int failures = 0;
  for (const Criterion& criterion : kCriteria) {
    if (selected != 0 && criterion.id != selected) continue;
    std::ostringstream detail;
    bool ok = false;
    try {
      ok = criterion.run(detail);
    } catch (const std::exception& e) {
      detail << "    exception: " << e.what() << '\n';
    }
    std::cout << "criterion " << criterion.id << " (" << criterion.label
              << "): " << (ok ? "PASS" : "FAIL") << '\n'
              << detail.str();
    if (!ok) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
