#pragma once

#include "crowdmig/types.hpp"

#include <string>

namespace crowdmig {

/// The three supported f-divergences. No other f is constructible.
enum class FKind { kKL, kPearsonChiSq, kJensenShannon };

FKind fkind_from_string(const std::string& name);  // "kl" | "pearson" | "js"
std::string to_string(FKind kind);

// f(t): KL -> t ln t, Pearson -> (t-1)^2, JS -> -(t+1) ln((t+1)/2) + t ln t.
// Requires t > 0.
double f_value(FKind kind, double t);

// The subgradient of f evaluated at k > 0:
//   KL -> 1 + ln k, Pearson -> 2(k-1), JS -> ln(2k/(1+k)).
double partial_f(FKind kind, double k);

// Fenchel conjugate of f evaluated at partial_f(k):
//   KL -> k, Pearson -> k^2 - 1, JS -> -ln(2/(1+k)).
double fstar_of_partial_f(FKind kind, double k);

// d/dk partial_f(k); used by the chain rule through the gain objective.
double partial_f_prime(FKind kind, double k);

// d/dk fstar_of_partial_f(k) == k * partial_f_prime(k).
double fstar_of_partial_f_prime(FKind kind, double k);

// Limit of f(t) as t -> 0+ (finite for all three kinds; 0 for KL).
double f_value_at_zero(FKind kind);

// Numerically stable softmax; entries of the result are a SimplexVector.
// Throws std::domain_error on empty or non-finite input.
SimplexVector softmax(const Vec& logits);

// Elementwise natural log of a strictly positive distribution.
// Throws std::domain_error on any zero entry; callers clamp first.
Vec log_vec(const SimplexVector& p);

// Clamp entries to [floor, 1] and renormalize. Model code applies this
// before taking logs of probabilities that may have underflowed.
SimplexVector clamp_renormalize(const SimplexVector& p, double floor = kProbFloor);

}  // namespace crowdmig
