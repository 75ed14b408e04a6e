#pragma once

#include "crowdmig/types.hpp"

#include <string>
#include <vector>

namespace crowdmig {

/// N crowdsourced datapoints. Every row carries either a discrete id
/// (tabular worlds) or a feature vector, homogeneously across the
/// dataset, plus M expert labels (kMissingLabel allowed) and an
/// optional ground truth.
struct CrowdDataset {
  struct Row {
    int x_id = -1;   // valid when !has_features
    Vec features;    // valid when has_features
    std::vector<int> labels;
    int truth = -1;  // -1 = unknown
  };

  int class_count = 0;
  int expert_count = 0;
  bool has_features = false;
  std::vector<Row> rows;

  std::size_t size() const { return rows.size(); }
  bool has_truth() const;

  // Enforces the invariants: class/expert counts, homogeneous x kind,
  // label ranges, and at least one non-missing label per row.
  void validate() const;
};

// JSON-lines format. Line 0 is the header
//   {"class_count": C, "expert_count": M}
// and each following line is one row:
//   {"x_id": 3, "labels": [0, -1, 1], "y": 0}        (tabular)
//   {"x": [0.1, -2.0], "labels": [1, 1], "y": 1}     (featurized)
// where -1 marks a missing label and "y" is optional ground truth.
CrowdDataset read_dataset_jsonl(const std::string& path);
void write_dataset_jsonl(const CrowdDataset& dataset, const std::string& path);

}  // namespace crowdmig
