#include "crowdmig/crowdsim.hpp"

#include "crowdmig/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace crowdmig {

using nlohmann::json;

std::vector<int> WorldSpec::senior_indices() const {
  std::vector<int> out;
  for (int i = 0; i < expert_count(); ++i)
    if (std::holds_alternative<SeniorExpert>(experts[i])) out.push_back(i);
  return out;
}

void WorldSpec::validate() const {
  if (class_count < 2) throw std::invalid_argument("world: class_count must be >= 2");
  if (prior.size() != class_count) throw std::invalid_argument("world: prior size mismatch");
  for (Eigen::Index c = 0; c < prior.size(); ++c)
    if (prior(c) <= 0.0) throw std::invalid_argument("world: prior must be strictly positive");
  if (std::abs(prior.sum() - 1.0) > 1e-9)
    throw std::invalid_argument("world: prior must sum to 1");
  if (senior_indices().empty()) throw std::invalid_argument("world: need at least one senior");

  for (const auto& expert : experts) {
    if (const auto* senior = std::get_if<SeniorExpert>(&expert)) {
      const Mat& cm = senior->confusion;
      if (cm.rows() != class_count || cm.cols() != class_count)
        throw std::invalid_argument("world: confusion matrix must be |C| x |C|");
      for (Eigen::Index r = 0; r < cm.rows(); ++r) {
        if (cm.row(r).minCoeff() < 0.0)
          throw std::invalid_argument("world: confusion entries must be >= 0");
        if (std::abs(cm.row(r).sum() - 1.0) > 1e-9)
          throw std::invalid_argument("world: confusion rows must sum to 1");
      }
    } else if (const auto* naive = std::get_if<NaiveConstantExpert>(&expert)) {
      if (naive->label < 0 || naive->label >= class_count)
        throw std::invalid_argument("world: naive expert label out of range");
    } else {
      const auto& copycat = std::get<CopycatExpert>(expert);
      if (copycat.senior_index < 0 || copycat.senior_index >= expert_count() ||
          !std::holds_alternative<SeniorExpert>(experts[copycat.senior_index]))
        throw std::invalid_argument("world: copycat must reference a senior expert");
    }
  }

  if (const auto* table = std::get_if<XModelFiniteTable>(&x_model)) {
    const Mat& t = table->p_x_given_y;
    if (t.rows() != class_count || t.cols() < 1)
      throw std::invalid_argument("world: x table must have one row per class");
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      if (t.row(r).minCoeff() < 0.0) throw std::invalid_argument("world: x table entries >= 0");
      if (std::abs(t.row(r).sum() - 1.0) > 1e-9)
        throw std::invalid_argument("world: x table rows must sum to 1");
    }
  } else if (const auto* gauss = std::get_if<XModelGaussianMixture>(&x_model)) {
    if (gauss->means.rows() != class_count)
      throw std::invalid_argument("world: need one mean vector per class");
    if (gauss->stddev <= 0.0) throw std::invalid_argument("world: stddev must be positive");
  }
}

CrowdDataset sample_dataset(const WorldSpec& spec, std::size_t n, std::uint64_t seed) {
  spec.validate();
  if (n < 1) throw std::invalid_argument("sample_dataset: n must be >= 1");

  CrowdDataset ds;
  ds.class_count = spec.class_count;
  ds.expert_count = spec.expert_count();
  ds.has_features = std::holds_alternative<XModelGaussianMixture>(spec.x_model);
  ds.rows.reserve(n);

  for (std::size_t i = 0; i < n; ++i) {
    // Per-row generator derived from (seed, row): rows are independent of
    // generation order, so the dataset bytes depend only on the seed.
    Rng rng(mix_seed(seed, i));
    CrowdDataset::Row row;
    const int y = rng.categorical(spec.prior);
    row.truth = y;

    if (std::holds_alternative<XModelIdentity>(spec.x_model)) {
      row.x_id = y;
    } else if (const auto* table = std::get_if<XModelFiniteTable>(&spec.x_model)) {
      row.x_id = rng.categorical(table->p_x_given_y.row(y).transpose());
    } else {
      const auto& gauss = std::get<XModelGaussianMixture>(spec.x_model);
      Vec x = gauss.means.row(y).transpose();
      for (Eigen::Index d = 0; d < x.size(); ++d) x(d) += gauss.stddev * rng.normal();
      row.features = std::move(x);
    }

    row.labels.assign(spec.expert_count(), kMissingLabel);
    for (int m = 0; m < spec.expert_count(); ++m)
      if (const auto* senior = std::get_if<SeniorExpert>(&spec.experts[m]))
        row.labels[m] = rng.categorical(senior->confusion.row(y).transpose());
    for (int m = 0; m < spec.expert_count(); ++m) {
      if (const auto* naive = std::get_if<NaiveConstantExpert>(&spec.experts[m]))
        row.labels[m] = naive->label;
      else if (const auto* copycat = std::get_if<CopycatExpert>(&spec.experts[m]))
        row.labels[m] = row.labels[copycat->senior_index];
    }
    ds.rows.push_back(std::move(row));
  }
  ds.validate();
  return ds;
}

// ---------------------------------------------------------------------------
// Presets

namespace {

// Binary expertise a/b: correct-label probability per true class.
Mat binary_confusion(double a, double b) {
  Mat cm(2, 2);
  cm << a, 1.0 - a, 1.0 - b, b;
  return cm;
}

Mat uniform_error_confusion(int classes, double correct) {
  Mat cm = Mat::Constant(classes, classes, (1.0 - correct) / static_cast<double>(classes - 1));
  cm.diagonal().setConstant(correct);
  return cm;
}

XModel default_gaussian_x(int classes) {
  return XModelGaussianMixture{2.0 * Mat::Identity(classes, classes), 1.0};
}

// CIFAR-10 hard pairs and the lexicographically-first member of each
// pair by class name (airplane, automobile, bird, cat, deer, dog, frog,
// horse, ship, truck).
constexpr int kCifarPartner[10] = {2, 9, 0, 5, 7, 3, 8, 4, 6, 1};
constexpr int kCifarPairTarget[10] = {0, 1, 0, 3, 4, 3, 6, 4, 6, 1};
constexpr bool kCifarMammalPair[10] = {false, false, false, true,  true,
                                       true,  false, true,  false, false};

std::vector<Mat> cifar10_h_seniors() {
  const int c = 10;
  Mat a = Mat::Zero(c, c), b = Mat::Zero(c, c), cm = Mat::Zero(c, c), d = Mat::Zero(c, c),
      e = Mat::Zero(c, c);
  for (int cls = 0; cls < c; ++cls) {
    const int partner = kCifarPartner[cls];
    const int target = kCifarPairTarget[cls];
    a(cls, target) = 1.0;  // collapses every hard pair to one class
    b(cls, cls) = 0.5;     // uniform within the pair
    b(cls, partner) += 0.5;
    if (kCifarMammalPair[cls]) {
      cm(cls, cls) = 1.0;  // mammal expert: perfect on cat/dog, deer/horse
      d(cls, target) = 1.0;
    } else {
      cm(cls, cls) = 0.5;
      cm(cls, partner) += 0.5;
      d(cls, cls) = 1.0;  // vehicle expert: perfect on the other pairs
    }
    e(cls, cls) = 0.6;
    e(cls, partner) += 0.4;
  }
  return {a, b, cm, d, e};
}

struct PresetFamily {
  int class_count = 2;
  Vec prior;
  std::vector<Mat> seniors;
  int case2_juniors = 0;
  // copycat targets (senior ordinals) per case-3 junior
  std::vector<int> case3_targets;
};

PresetFamily family_for(const std::string& base) {
  PresetFamily fam;
  const auto dash = base.find_last_of('-');
  if (dash == std::string::npos) throw std::invalid_argument("unknown preset: " + base);
  const std::string level = base.substr(dash + 1);
  if (level != "H" && level != "L") throw std::invalid_argument("unknown preset: " + base);
  const bool high = level == "H";
  const std::string name = base.substr(0, dash);

  if (name == "binary") {
    fam.class_count = 2;
    fam.prior = Vec::Constant(2, 0.5);
    if (high)
      for (auto [a, b] : {std::pair{0.6, 0.8}, {0.6, 0.6}, {0.9, 0.6}, {0.7, 0.7}, {0.6, 0.7}})
        fam.seniors.push_back(binary_confusion(a, b));
    else
      for (int i = 0; i < 10; ++i) fam.seniors.push_back(binary_confusion(0.55, 0.55));
  } else if (name == "luna") {
    fam.class_count = 2;
    fam.prior = Vec(2);
    fam.prior << 0.85, 0.15;  // class 0 = benign, the majority class
    if (high)
      for (auto [a, b] : {std::pair{0.6, 0.9}, {0.7, 0.7}, {0.9, 0.6}, {0.6, 0.7}, {0.7, 0.6}})
        fam.seniors.push_back(binary_confusion(a, b));
    else
      for (int i = 0; i < 10; ++i) fam.seniors.push_back(binary_confusion(0.6, 0.6));
  } else if (name == "cifar10") {
    fam.class_count = 10;
    fam.prior = Vec::Constant(10, 0.1);
    if (high)
      fam.seniors = cifar10_h_seniors();
    else
      for (int i = 0; i < 10; ++i) fam.seniors.push_back(uniform_error_confusion(10, 0.2));
  } else {
    throw std::invalid_argument("unknown preset: " + base);
  }

  if (high) {
    fam.case2_juniors = 5;
    fam.case3_targets = {0, 0, 2, 2, 2};  // two copies of A, three of C
  } else {
    fam.case2_juniors = 15;
    fam.case3_targets = {0, 2};  // one copy of A, one of C
  }
  return fam;
}

WorldSpec mle_counterexample() {
  WorldSpec spec;
  spec.class_count = 2;
  spec.prior = Vec::Constant(2, 0.5);
  spec.x_model = XModelIdentity{};
  spec.experts.push_back(SeniorExpert{Mat::Identity(2, 2)});
  spec.experts.push_back(SeniorExpert{Mat::Constant(2, 2, 0.5)});
  for (int m = 0; m < 99; ++m) spec.experts.push_back(CopycatExpert{1});
  return spec;
}

}  // namespace

WorldSpec preset(const std::string& name) {
  if (name == "mle-counterexample") return mle_counterexample();

  const auto cut = name.find("-case");
  if (cut == std::string::npos)
    throw std::invalid_argument("unknown preset: " + name);
  const std::string base = name.substr(0, cut);
  const std::string which_case = name.substr(cut + 1);

  const PresetFamily fam = family_for(base);
  WorldSpec spec;
  spec.class_count = fam.class_count;
  spec.prior = fam.prior;
  spec.x_model = default_gaussian_x(fam.class_count);
  for (const Mat& cm : fam.seniors) spec.experts.push_back(SeniorExpert{cm});

  if (which_case == "case1") {
    // seniors only
  } else if (which_case == "case2") {
    for (int j = 0; j < fam.case2_juniors; ++j)
      spec.experts.push_back(NaiveConstantExpert{0});  // everyone reports the first class
  } else if (which_case == "case3") {
    for (int target : fam.case3_targets) spec.experts.push_back(CopycatExpert{target});
  } else {
    throw std::invalid_argument("unknown preset: " + name);
  }
  spec.validate();
  return spec;
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const std::string base : {"binary-H", "binary-L", "luna-H", "luna-L", "cifar10-H",
                                 "cifar10-L"})
    for (const std::string which_case : {"case1", "case2", "case3"})
      names.push_back(base + "-" + which_case);
  names.push_back("mle-counterexample");
  return names;
}

// ---------------------------------------------------------------------------
// World spec JSON

namespace {

json matrix_to_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Mat matrix_from_json(const json& j) {
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) throw std::invalid_argument("world spec: empty matrix");
  const Eigen::Index cols = static_cast<Eigen::Index>(j.at(0).size());
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  return m;
}

}  // namespace

std::string world_spec_to_json(const WorldSpec& spec) {
  json j;
  j["class_count"] = spec.class_count;
  j["prior"] = std::vector<double>(spec.prior.data(), spec.prior.data() + spec.prior.size());
  json experts = json::array();
  for (const auto& expert : spec.experts) {
    if (const auto* senior = std::get_if<SeniorExpert>(&expert))
      experts.push_back({{"kind", "senior"}, {"confusion", matrix_to_json(senior->confusion)}});
    else if (const auto* naive = std::get_if<NaiveConstantExpert>(&expert))
      experts.push_back({{"kind", "naive"}, {"label", naive->label}});
    else
      experts.push_back(
          {{"kind", "copycat"}, {"senior", std::get<CopycatExpert>(expert).senior_index}});
  }
  j["experts"] = experts;
  if (std::holds_alternative<XModelIdentity>(spec.x_model)) {
    j["x_model"] = {{"kind", "identity"}};
  } else if (const auto* table = std::get_if<XModelFiniteTable>(&spec.x_model)) {
    j["x_model"] = {{"kind", "table"}, {"p_x_given_y", matrix_to_json(table->p_x_given_y)}};
  } else {
    const auto& gauss = std::get<XModelGaussianMixture>(spec.x_model);
    j["x_model"] = {{"kind", "gaussian"},
                    {"means", matrix_to_json(gauss.means)},
                    {"stddev", gauss.stddev}};
  }
  return j.dump(2);
}

WorldSpec world_spec_from_json(const std::string& text) {
  const json j = json::parse(text);
  WorldSpec spec;
  spec.class_count = j.at("class_count").get<int>();
  const auto prior = j.at("prior").get<std::vector<double>>();
  spec.prior = Eigen::Map<const Vec>(prior.data(), static_cast<Eigen::Index>(prior.size()));
  for (const auto& e : j.at("experts")) {
    const std::string kind = e.at("kind").get<std::string>();
    if (kind == "senior")
      spec.experts.push_back(SeniorExpert{matrix_from_json(e.at("confusion"))});
    else if (kind == "naive")
      spec.experts.push_back(NaiveConstantExpert{e.at("label").get<int>()});
    else if (kind == "copycat")
      spec.experts.push_back(CopycatExpert{e.at("senior").get<int>()});
    else
      throw std::invalid_argument("world spec: unknown expert kind " + kind);
  }
  const json& x = j.at("x_model");
  const std::string kind = x.at("kind").get<std::string>();
  if (kind == "identity")
    spec.x_model = XModelIdentity{};
  else if (kind == "table")
    spec.x_model = XModelFiniteTable{matrix_from_json(x.at("p_x_given_y"))};
  else if (kind == "gaussian")
    spec.x_model =
        XModelGaussianMixture{matrix_from_json(x.at("means")), x.at("stddev").get<double>()};
  else
    throw std::invalid_argument("world spec: unknown x model " + kind);
  spec.validate();
  return spec;
}

WorldSpec read_world_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open world spec: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return world_spec_from_json(buffer.str());
}

}  // namespace crowdmig
