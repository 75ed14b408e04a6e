#include "crowdmig/dataset.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>

namespace crowdmig {

using nlohmann::json;

bool CrowdDataset::has_truth() const {
  return !rows.empty() &&
         std::all_of(rows.begin(), rows.end(), [](const Row& r) { return r.truth >= 0; });
}

void CrowdDataset::validate() const {
  if (class_count < 2) throw std::invalid_argument("dataset: class_count must be >= 2");
  if (expert_count < 1) throw std::invalid_argument("dataset: expert_count must be >= 1");
  for (const Row& row : rows) {
    if (has_features) {
      if (row.features.size() == 0)
        throw std::invalid_argument("dataset: featurized dataset has a row without features");
    } else if (row.x_id < 0) {
      throw std::invalid_argument("dataset: tabular dataset has a row without x_id");
    }
    if (static_cast<int>(row.labels.size()) != expert_count)
      throw std::invalid_argument("dataset: row label count != expert_count");
    bool any = false;
    for (int label : row.labels) {
      if (label == kMissingLabel) continue;
      if (label < 0 || label >= class_count)
        throw std::invalid_argument("dataset: label index out of range");
      any = true;
    }
    if (!any) throw std::invalid_argument("dataset: row with all labels missing");
    if (row.truth >= class_count)
      throw std::invalid_argument("dataset: ground truth out of range");
  }
}

CrowdDataset read_dataset_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("dataset file is empty: " + path);
  json header = json::parse(line);

  CrowdDataset ds;
  ds.class_count = header.at("class_count").get<int>();
  ds.expert_count = header.at("expert_count").get<int>();

  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    CrowdDataset::Row row;
    if (j.contains("x_id")) {
      row.x_id = j.at("x_id").get<int>();
      if (first) ds.has_features = false;
    } else {
      const auto& xs = j.at("x");
      row.features = Vec(xs.size());
      for (std::size_t i = 0; i < xs.size(); ++i) row.features(i) = xs[i].get<double>();
      if (first) ds.has_features = true;
    }
    row.labels = j.at("labels").get<std::vector<int>>();
    if (j.contains("y")) row.truth = j.at("y").get<int>();
    ds.rows.push_back(std::move(row));
    first = false;
  }
  ds.validate();
  return ds;
}

void write_dataset_jsonl(const CrowdDataset& dataset, const std::string& path) {
  dataset.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path);

  out << json{{"class_count", dataset.class_count}, {"expert_count", dataset.expert_count}}
      << '\n';
  for (const auto& row : dataset.rows) {
    json j;
    if (dataset.has_features) {
      j["x"] = std::vector<double>(row.features.data(), row.features.data() + row.features.size());
    } else {
      j["x_id"] = row.x_id;
    }
    j["labels"] = row.labels;
    if (row.truth >= 0) j["y"] = row.truth;
    out << j << '\n';
  }
  if (!out) throw std::runtime_error("failed while writing dataset file: " + path);
}

}  // namespace crowdmig
