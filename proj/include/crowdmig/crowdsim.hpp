#pragma once

#include "crowdmig/dataset.hpp"
#include "crowdmig/types.hpp"

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace crowdmig {

// A conditionally independent informative expert with a row-stochastic
// confusion matrix: confusion(c, c') = P(reports c' | truth is c).
struct SeniorExpert {
  Mat confusion;
};

// Labels every datapoint with the same class, effortlessly.
struct NaiveConstantExpert {
  int label = 0;
};

// Repeats another expert's realized label on every row; the target must
// be a SeniorExpert.
struct CopycatExpert {
  int senior_index = 0;
};

using ExpertSpec = std::variant<SeniorExpert, NaiveConstantExpert, CopycatExpert>;

struct XModelIdentity {};  // x is the ground-truth class id

struct XModelFiniteTable {
  Mat p_x_given_y;  // C rows, |X| columns, row-stochastic
};

struct XModelGaussianMixture {
  Mat means;  // C rows, one mean vector per class
  double stddev = 1.0;
};

using XModel = std::variant<XModelIdentity, XModelFiniteTable, XModelGaussianMixture>;

/// Generating model for synthetic crowdsourced data: ground truth from
/// the prior, a datapoint from the x model, senior labels from their
/// confusion rows (conditionally independent), then deterministic
/// junior labels.
struct WorldSpec {
  int class_count = 0;
  Vec prior;
  std::vector<ExpertSpec> experts;
  XModel x_model;

  int expert_count() const { return static_cast<int>(experts.size()); }
  std::vector<int> senior_indices() const;
  void validate() const;
};

CrowdDataset sample_dataset(const WorldSpec& spec, std::size_t n, std::uint64_t seed);

// Named worlds: {binary,luna,cifar10} x {H,L} x {case1,case2,case3}
// plus "mle-counterexample". Throws std::invalid_argument for unknown
// names.
WorldSpec preset(const std::string& name);
std::vector<std::string> preset_names();

// JSON round trip for world specifications (the simulate command
// accepts a spec file as an alternative to a preset name).
std::string world_spec_to_json(const WorldSpec& spec);
WorldSpec world_spec_from_json(const std::string& text);
WorldSpec read_world_spec(const std::string& path);

}  // namespace crowdmig
