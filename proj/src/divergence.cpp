#include "crowdmig/divergence.hpp"

#include <cmath>

namespace crowdmig {

FKind fkind_from_string(const std::string& name) {
  if (name == "kl") return FKind::kKL;
  if (name == "pearson") return FKind::kPearsonChiSq;
  if (name == "js") return FKind::kJensenShannon;
  throw std::invalid_argument("unknown f kind: '" + name + "' (expected kl|pearson|js)");
}

std::string to_string(FKind kind) {
  switch (kind) {
    case FKind::kKL: return "kl";
    case FKind::kPearsonChiSq: return "pearson";
    case FKind::kJensenShannon: return "js";
  }
  throw std::logic_error("unreachable FKind");
}

namespace {
void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw std::domain_error(std::string(what) + " requires a positive finite argument");
}
}  // namespace

double f_value(FKind kind, double t) {
  require_positive(t, "f_value");
  switch (kind) {
    case FKind::kKL: return t * std::log(t);
    case FKind::kPearsonChiSq: return (t - 1.0) * (t - 1.0);
    case FKind::kJensenShannon:
      return -(t + 1.0) * std::log(0.5 * (t + 1.0)) + t * std::log(t);
  }
  throw std::logic_error("unreachable FKind");
}

double partial_f(FKind kind, double k) {
  require_positive(k, "partial_f");
  switch (kind) {
    case FKind::kKL: return 1.0 + std::log(k);
    case FKind::kPearsonChiSq: return 2.0 * (k - 1.0);
    case FKind::kJensenShannon: return std::log(2.0 * k / (1.0 + k));
  }
  throw std::logic_error("unreachable FKind");
}

double fstar_of_partial_f(FKind kind, double k) {
  require_positive(k, "fstar_of_partial_f");
  switch (kind) {
    case FKind::kKL: return k;
    case FKind::kPearsonChiSq: return k * k - 1.0;
    case FKind::kJensenShannon: return -std::log(2.0 / (1.0 + k));
  }
  throw std::logic_error("unreachable FKind");
}

double partial_f_prime(FKind kind, double k) {
  require_positive(k, "partial_f_prime");
  switch (kind) {
    case FKind::kKL: return 1.0 / k;
    case FKind::kPearsonChiSq: return 2.0;
    case FKind::kJensenShannon: return 1.0 / (k * (1.0 + k));
  }
  throw std::logic_error("unreachable FKind");
}

double fstar_of_partial_f_prime(FKind kind, double k) {
  require_positive(k, "fstar_of_partial_f_prime");
  switch (kind) {
    case FKind::kKL: return 1.0;
    case FKind::kPearsonChiSq: return 2.0 * k;
    case FKind::kJensenShannon: return 1.0 / (1.0 + k);
  }
  throw std::logic_error("unreachable FKind");
}

double f_value_at_zero(FKind kind) {
  switch (kind) {
    case FKind::kKL: return 0.0;  // lim t ln t = 0
    case FKind::kPearsonChiSq: return 1.0;
    case FKind::kJensenShannon: return std::log(2.0);
  }
  throw std::logic_error("unreachable FKind");
}

SimplexVector softmax(const Vec& logits) {
  if (logits.size() == 0) throw std::domain_error("softmax: empty input");
  for (Eigen::Index i = 0; i < logits.size(); ++i)
    if (!std::isfinite(logits(i))) throw std::domain_error("softmax: non-finite input");
  const double shift = logits.maxCoeff();
  Vec e = (logits.array() - shift).exp();
  return SimplexVector::from_normalized(e / e.sum());
}

Vec log_vec(const SimplexVector& p) {
  Vec out(p.classes());
  for (Eigen::Index i = 0; i < p.classes(); ++i) {
    if (p[i] <= 0.0) throw std::domain_error("log_vec: zero entry; clamp before taking logs");
    out(i) = std::log(p[i]);
  }
  return out;
}

SimplexVector clamp_renormalize(const SimplexVector& p, double floor) {
  Vec c = p.probs().cwiseMax(floor).cwiseMin(1.0);
  return SimplexVector::from_normalized(c / c.sum());
}

}  // namespace crowdmig
