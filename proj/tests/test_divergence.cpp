#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "crowdmig/divergence.hpp"
#include "crowdmig/rng.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace crowdmig;

namespace {
const FKind kKinds[] = {FKind::kKL, FKind::kPearsonChiSq, FKind::kJensenShannon};
}

TEST_CASE("building-block values at the reference points") {
  CHECK(partial_f(FKind::kKL, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(partial_f(FKind::kPearsonChiSq, 1.0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(partial_f(FKind::kJensenShannon, 1.0) == doctest::Approx(0.0).epsilon(1e-12));

  CHECK(fstar_of_partial_f(FKind::kKL, 1.0) == doctest::Approx(1.0));
  CHECK(fstar_of_partial_f(FKind::kPearsonChiSq, 2.0) == doctest::Approx(3.0));
  CHECK(fstar_of_partial_f(FKind::kJensenShannon, 1.0) == doctest::Approx(0.0));

  CHECK(f_value(FKind::kKL, 1.0) == doctest::Approx(0.0));
  CHECK(f_value(FKind::kPearsonChiSq, 3.0) == doctest::Approx(4.0));
  CHECK(f_value(FKind::kJensenShannon, 1.0) == doctest::Approx(0.0));

  // spot values away from 1
  CHECK(partial_f(FKind::kKL, 2.0) == doctest::Approx(1.0 + std::log(2.0)));
  CHECK(partial_f(FKind::kJensenShannon, 3.0) == doctest::Approx(std::log(1.5)));
  CHECK(fstar_of_partial_f(FKind::kJensenShannon, 3.0) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("non-positive arguments are rejected") {
  for (FKind kind : kKinds) {
    CHECK_THROWS_AS(partial_f(kind, 0.0), std::domain_error);
    CHECK_THROWS_AS(partial_f(kind, -1.0), std::domain_error);
    CHECK_THROWS_AS(fstar_of_partial_f(kind, 0.0), std::domain_error);
    CHECK_THROWS_AS(f_value(kind, 0.0), std::domain_error);
    CHECK_THROWS_AS(f_value(kind, std::numeric_limits<double>::quiet_NaN()), std::domain_error);
  }
}

TEST_CASE("f(1) = 0 and midpoint convexity on a grid") {
  for (FKind kind : kKinds) {
    CHECK(std::abs(f_value(kind, 1.0)) < 1e-12);
    for (double t = 0.1; t <= 10.0; t += 0.1) {
      const double mid = f_value(kind, t + 0.05);
      const double chord = 0.5 * (f_value(kind, t) + f_value(kind, t + 0.1));
      CHECK(mid <= chord + 1e-12);
    }
  }
}

TEST_CASE("fenchel consistency: fstar(partial_f(k)) == k partial_f(k) - f(k)") {
  for (FKind kind : kKinds)
    for (double k = 0.05; k <= 10.0; k += 0.05)
      CHECK(std::abs(fstar_of_partial_f(kind, k) -
                     (k * partial_f(kind, k) - f_value(kind, k))) < 1e-9);
}

TEST_CASE("derivative helpers match finite differences") {
  for (FKind kind : kKinds) {
    for (double k : {0.2, 0.7, 1.0, 1.9, 5.0}) {
      const double d1 = testing::fd_central([&](double x) { return partial_f(kind, x); }, k);
      CHECK(testing::rel_err(partial_f_prime(kind, k), d1) < 1e-7);
      const double d2 =
          testing::fd_central([&](double x) { return fstar_of_partial_f(kind, x); }, k);
      CHECK(testing::rel_err(fstar_of_partial_f_prime(kind, k), d2) < 1e-7);
    }
  }
}

TEST_CASE("f limits at zero") {
  CHECK(f_value_at_zero(FKind::kKL) == 0.0);
  CHECK(f_value_at_zero(FKind::kPearsonChiSq) == doctest::Approx(1.0));
  CHECK(f_value_at_zero(FKind::kJensenShannon) == doctest::Approx(std::log(2.0)));
  // continuity: f(t) approaches the stored limit
  for (FKind kind : kKinds)
    CHECK(std::abs(f_value(kind, 1e-9) - f_value_at_zero(kind)) < 1e-6);
}

TEST_CASE("softmax reference values") {
  Vec two(2);
  two << 0.0, 0.0;
  CHECK(softmax(two).probs().isApprox(Vec::Constant(2, 0.5), 1e-12));

  Vec logs(2);
  logs << std::log(1.0), std::log(3.0);
  const Vec out = softmax(logs).probs();
  CHECK(out(0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(out(1) == doctest::Approx(0.75).epsilon(1e-12));

  Vec constant = Vec::Constant(3, -7.25);
  CHECK(softmax(constant).probs().isApprox(Vec::Constant(3, 1.0 / 3.0), 1e-12));
}

TEST_CASE("softmax rejects malformed input") {
  CHECK_THROWS_AS(softmax(Vec()), std::domain_error);
  Vec bad(2);
  bad << 1.0, std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(softmax(bad), std::domain_error);
  bad(1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(softmax(bad), std::domain_error);
}

TEST_CASE("softmax shift invariance and simplex validity") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int c = 2 + static_cast<int>(rng.next_u64() % 4);
    Vec logits(c);
    for (int i = 0; i < c; ++i) logits(i) = rng.uniform(-20.0, 20.0);
    const SimplexVector s = softmax(logits);
    CHECK(std::abs(s.probs().sum() - 1.0) < 1e-12);
    CHECK(s.probs().minCoeff() >= 0.0);
    const double shift = rng.uniform(-50.0, 50.0);
    const Vec shifted = softmax((logits.array() + shift).matrix()).probs();
    CHECK((shifted - s.probs()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("log_vec values and zero rejection") {
  Vec half(2);
  half << 0.5, 0.5;
  const Vec lh = log_vec(SimplexVector::from_probs(half));
  CHECK(lh(0) == doctest::Approx(-0.69314718055994531).epsilon(1e-12));

  Vec uneven(2);
  uneven << 0.25, 0.75;
  const Vec lu = log_vec(SimplexVector::from_probs(uneven));
  CHECK(lu(0) == doctest::Approx(-1.3862943611198906).epsilon(1e-12));
  CHECK(lu(1) == doctest::Approx(-0.28768207245178085).epsilon(1e-12));

  Vec with_zero(3);
  with_zero << 0.5, 0.0, 0.5;
  CHECK_THROWS_AS(log_vec(SimplexVector::from_probs(with_zero)), std::domain_error);
}

TEST_CASE("softmax(log_vec(p)) recovers p") {
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const SimplexVector p = testing::random_simplex(rng, 2 + (trial % 3), 0.01);
    CHECK((softmax(log_vec(p)).probs() - p.probs()).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("clamp_renormalize floors tiny entries and renormalizes") {
  Vec nearly(3);
  nearly << 1.0, 0.0, 0.0;
  // from_normalized accepts the raw vector; clamping makes it loggable
  const SimplexVector c = clamp_renormalize(SimplexVector::from_normalized(nearly));
  CHECK(c.probs().minCoeff() >= kProbFloor / 2.0);
  CHECK(std::abs(c.probs().sum() - 1.0) < 1e-12);
  CHECK_NOTHROW(log_vec(c));
}

TEST_CASE("SimplexVector invariants are enforced") {
  Vec negative(2);
  negative << -0.1, 1.1;
  CHECK_THROWS_AS(SimplexVector::from_probs(negative), std::invalid_argument);
  Vec off_sum(2);
  off_sum << 0.5, 0.6;
  CHECK_THROWS_AS(SimplexVector::from_probs(off_sum), std::invalid_argument);
  CHECK_THROWS_AS(SimplexVector::from_probs(Vec::Constant(1, 1.0)), std::invalid_argument);
  CHECK(SimplexVector::uniform(4).probs().isApprox(Vec::Constant(4, 0.25)));
}

TEST_CASE("f kind names round trip") {
  for (FKind kind : kKinds) CHECK(fkind_from_string(to_string(kind)) == kind);
  CHECK(fkind_from_string("kl") == FKind::kKL);
  CHECK(fkind_from_string("pearson") == FKind::kPearsonChiSq);
  CHECK(fkind_from_string("js") == FKind::kJensenShannon);
  CHECK_THROWS_AS(fkind_from_string("hellinger"), std::invalid_argument);
}
