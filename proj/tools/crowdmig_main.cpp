// Command-line front end: simulate crowdsourced datasets, train the
// joint gain objective or the baselines, evaluate trained models, and
// run the exact verification suites.

#include "crowdmig/baselines.hpp"
#include "crowdmig/crowdsim.hpp"
#include "crowdmig/dataset.hpp"
#include "crowdmig/parallel.hpp"
#include "crowdmig/persist.hpp"
#include "crowdmig/training.hpp"
#include "crowdmig/verify.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace crowdmig;

std::vector<Eigen::Index> parse_hidden(const std::string& text) {
  std::vector<Eigen::Index> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (item.find_first_not_of(" \t") != std::string::npos) out.push_back(std::stoll(item));
  return out;
}

Classifier make_classifier(const CrowdDataset& ds, const KeyValueConfig& kv,
                           std::uint64_t seed) {
  if (!ds.has_features) {
    Eigen::Index max_id = 0;
    for (const auto& row : ds.rows) max_id = std::max<Eigen::Index>(max_id, row.x_id);
    return Classifier(TabularClassifier(max_id + 1, ds.class_count));
  }
  std::vector<Eigen::Index> widths{ds.rows.front().features.size()};
  for (Eigen::Index h : parse_hidden(kv.get_string("hidden", "32"))) widths.push_back(h);
  widths.push_back(ds.class_count);
  return Classifier(MlpClassifier(widths, seed));
}

int cmd_simulate(const std::string& preset_name, const std::string& spec_path, int n,
                 std::uint64_t seed, const std::string& out_path) {
  WorldSpec spec = spec_path.empty() ? preset(preset_name) : read_world_spec(spec_path);
  CrowdDataset ds = sample_dataset(spec, static_cast<std::size_t>(n), seed);
  write_dataset_jsonl(ds, out_path);
  std::cout << "wrote " << ds.size() << " rows, " << ds.expert_count << " experts, "
            << ds.class_count << " classes to " << out_path << '\n';
  return 0;
}

int cmd_train(const std::string& data_path, const std::string& method_name,
              const std::string& config_path, const std::string& model_path,
              const std::string& history_path, const std::string& test_path,
              const std::string& f_override, const std::string& seed_override) {
  const CrowdDataset ds = read_dataset_jsonl(data_path);
  CrowdDataset test;
  const bool have_test = !test_path.empty();
  if (have_test) test = read_dataset_jsonl(test_path);

  std::string config_text =
      config_path.empty() ? "" : [&] {
        std::ifstream in(config_path);
        if (!in) throw std::invalid_argument("cannot open config file: " + config_path);
        std::stringstream buffer;
        buffer << in.rdbuf();
        return buffer.str();
      }();
  // command-line flags take precedence over the config file
  if (!f_override.empty()) config_text += "\nf = " + f_override + "\n";
  if (!seed_override.empty()) config_text += "\nseed = " + seed_override + "\n";
  const KeyValueConfig kv = KeyValueConfig::from_string(config_text);
  const MethodKind method = method_from_string(method_name);
  const std::uint64_t seed = kv.get_u64("seed", 0);

  TrainedModel model(make_classifier(ds, kv, seed));
  model.method = method;
  model.class_count = ds.class_count;
  model.expert_count = ds.expert_count;
  model.prior = Vec::Constant(ds.class_count, 1.0 / ds.class_count);

  std::vector<EpochStats> history;

  switch (method) {
    case MethodKind::kMaxMig: {
      const MigConfig cfg = MigConfig::from_config(kv);
      model.f_kind = cfg.f_kind;
      MaxMigResult result =
          train_max_mig(ds, model.classifier, cfg, have_test ? &test : nullptr);
      model.aggregator = std::move(result.aggregator);
      model.prior = result.prior;
      history = std::move(result.history);
      break;
    }
    case MethodKind::kMle: {
      const EmConfig cfg = EmConfig::from_config(kv);
      MleEmResult result = train_mle_em(ds, model.classifier, cfg);
      model.transitions = std::move(result.transitions);
      model.mle_prior = result.class_prior;
      for (std::size_t r = 0; r < result.likelihood_per_round.size(); ++r) {
        EpochStats stats;
        stats.epoch = static_cast<int>(r + 1);
        stats.mean_mig = result.likelihood_per_round[r] / static_cast<double>(ds.size());
        stats.train_acc = classifier_accuracy(model.classifier, ds);
        history.push_back(stats);
      }
      break;
    }
    case MethodKind::kMajorityVote: {
      train_majority_vote(ds, model.classifier, kv.get_int("epochs", 20),
                          kv.get_double("lr", 1e-2), kv.get_int("batch_size", 64), seed);
      EpochStats stats;
      stats.epoch = kv.get_int("epochs", 20);
      stats.mean_mig = std::numeric_limits<double>::quiet_NaN();  // no gain objective here
      stats.train_acc = classifier_accuracy(model.classifier, ds);
      history.push_back(stats);
      break;
    }
  }

  model.save(model_path);
  if (!history_path.empty()) write_history_csv(history_path, history);
  std::cout << "trained " << method_name << " model on " << ds.size() << " rows; saved to "
            << model_path << '\n';
  return 0;
}

int cmd_evaluate(const std::string& data_path, const std::string& model_path,
                 const std::string& csv_path) {
  const CrowdDataset ds = read_dataset_jsonl(data_path);
  const TrainedModel model = TrainedModel::load(model_path);
  const EvalReport report = evaluate(ds, model);
  std::cout << format_report(report);
  if (!csv_path.empty()) write_report_csv(csv_path, report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"learning-from-crowds toolkit: joint classifier/aggregator training by "
               "f-mutual-information gain, likelihood and majority-vote baselines, and "
               "exact finite-world verification"};
  app.require_subcommand(1);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "sample a synthetic crowdsourced dataset");
  std::string preset_name, spec_path, out_path;
  int n = 1000;
  std::uint64_t seed = 0;
  auto* preset_opt =
      simulate->add_option("--preset", preset_name, "named world (see README for the list)");
  simulate->add_option("--world", spec_path, "world spec JSON file")->excludes(preset_opt);
  simulate->add_option("--n", n, "rows to sample")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", seed, "RNG seed");
  simulate->add_option("--out", out_path, "output dataset path")->required();

  // train
  auto* train = app.add_subcommand("train", "fit a model to a dataset");
  std::string data_path, method_name = "max-mig", config_path, model_path, history_path,
              test_path, f_override, seed_override;
  train->add_option("--data", data_path, "training dataset (JSON lines)")->required();
  train->add_option("--method", method_name, "max-mig | mle | majority-vote");
  train->add_option("--config", config_path, "key = value training configuration");
  train->add_option("--out", model_path, "model output path")->required();
  train->add_option("--history", history_path, "per-epoch metrics CSV");
  train->add_option("--test", test_path, "held-out dataset for the test_acc column");
  train->add_option("--f", f_override, "kl | pearson | js (overrides the config)");
  train->add_option("--seed", seed_override, "RNG seed (overrides the config)");

  // evaluate
  auto* evaluate_cmd = app.add_subcommand("evaluate", "score a trained model on labeled data");
  std::string eval_data, eval_model, eval_csv;
  evaluate_cmd->add_option("--data", eval_data, "dataset with ground truth")->required();
  evaluate_cmd->add_option("--model", eval_model, "trained model file")->required();
  evaluate_cmd->add_option("--csv", eval_csv, "also write the report as CSV");

  // verify
  auto* verify_cmd = app.add_subcommand("verify", "run the exact-computation check suites");
  std::string scope = "all";
  verify_cmd->add_option("--scope", scope, "all | theorem1 | mle-counterexample | divergence");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (simulate->parsed()) {
      if (preset_name.empty() && spec_path.empty())
        throw std::invalid_argument("simulate: pass --preset or --world");
      return cmd_simulate(preset_name, spec_path, n, seed, out_path);
    }
    if (train->parsed())
      return cmd_train(data_path, method_name, config_path, model_path, history_path, test_path,
                       f_override, seed_override);
    if (evaluate_cmd->parsed()) return cmd_evaluate(eval_data, eval_model, eval_csv);
    if (verify_cmd->parsed()) return crowdmig::run_verify(scope, std::cout);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
