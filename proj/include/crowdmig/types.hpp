#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace crowdmig {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Probability entries are clamped to this floor before any logarithm.
inline constexpr double kProbFloor = 1e-12;
// Agreement scores K are clamped to this floor before partial_f.
inline constexpr double kAgreementFloor = 1e-12;
// Sentinel for an expert that did not label a row.
inline constexpr int kMissingLabel = -1;

/// A probability distribution over classes: entries >= 0, summing to 1
/// within 1e-9, length >= 2. Constructed only through validating
/// factories so every instance in the system is a genuine distribution.
class SimplexVector {
 public:
  static SimplexVector from_probs(Vec probs) {
    validate(probs);
    return SimplexVector(std::move(probs));
  }

  static SimplexVector uniform(Eigen::Index classes) {
    if (classes < 2) throw std::invalid_argument("SimplexVector: need >= 2 classes");
    return SimplexVector(Vec::Constant(classes, 1.0 / static_cast<double>(classes)));
  }

  // For values already produced by a normalizing computation (softmax,
  // Bayes rule); skips the tolerance re-check but still guards shape.
  static SimplexVector from_normalized(Vec probs) {
    if (probs.size() < 2) throw std::invalid_argument("SimplexVector: need >= 2 classes");
    return SimplexVector(std::move(probs));
  }

  const Vec& probs() const { return p_; }
  double operator[](Eigen::Index c) const { return p_(c); }
  Eigen::Index classes() const { return p_.size(); }
  Eigen::Index argmax() const {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < p_.size(); ++c)
      if (p_(c) > p_(best)) best = c;  // ties keep the lowest index
    return best;
  }

 private:
  explicit SimplexVector(Vec p) : p_(std::move(p)) {}

  static void validate(const Vec& p) {
    if (p.size() < 2) throw std::invalid_argument("SimplexVector: need >= 2 classes");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      if (!std::isfinite(p(i)) || p(i) < 0.0)
        throw std::invalid_argument("SimplexVector: entries must be finite and >= 0");
      sum += p(i);
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::invalid_argument("SimplexVector: entries sum to " + std::to_string(sum) +
                                  ", expected 1");
  }

  Vec p_;
};

// Total variation distance between two distributions over the same classes.
inline double total_variation(const SimplexVector& a, const SimplexVector& b) {
  if (a.classes() != b.classes())
    throw std::invalid_argument("total_variation: class counts differ");
  return 0.5 * (a.probs() - b.probs()).cwiseAbs().sum();
}

}  // namespace crowdmig
