#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "fractal/config.hpp"
#include "fractal/dataset.hpp"
#include "fractal/metrics.hpp"
#include "fractal/model.hpp"
#include "fractal/pseudolabel.hpp"
#include "fractal/training.hpp"

#include "CLI11.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitNotApplicable = 3;

struct SynthArgs {
  std::uint64_t seed = 0;
  int bags = 0;
  int test_bags = 0;
  int pairs = 0;
  int test_pairs = 0;
  int d = 32;
  std::string agg = "min";
  std::string label_kind = "binary";
  int max_label = 1;
  std::string bag_size = "2:8";
  double noise = 0.0;
  double prior_quality = 1.0;
  std::string out;
};

std::pair<int, int> parse_bag_size(const std::string& s) {
  const auto colon = s.find(':');
  try {
    if (colon == std::string::npos) {
      const int v = std::stoi(s);
      return {v, v};
    }
    return {std::stoi(s.substr(0, colon)), std::stoi(s.substr(colon + 1))};
  } catch (const std::exception&) {
    throw std::runtime_error("--bag-size expects MIN:MAX, got \"" + s + "\"");
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

void write_manifest(const fs::path& dir, const std::string& command,
                    ordered_json flags) {
  ordered_json m;
  m["tool"] = "fractal";
  m["command"] = command;
  m["flags"] = std::move(flags);
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

ordered_json synth_flags(const SynthArgs& a) {
  ordered_json f;
  f["seed"] = a.seed;
  f["bags"] = a.bags;
  f["test_bags"] = a.test_bags;
  f["pairs"] = a.pairs;
  f["test_pairs"] = a.test_pairs;
  f["d"] = a.d;
  f["agg"] = a.agg;
  f["label_kind"] = a.label_kind;
  f["L"] = a.max_label;
  f["bag_size"] = a.bag_size;
  f["noise"] = a.noise;
  f["prior_quality"] = a.prior_quality;
  f["out"] = a.out;
  return f;
}

// Writes train/test datasets plus optional preference files into `dir`.
void run_synth_into(const SynthArgs& a, const fs::path& dir) {
  fs::create_directories(dir);
  const auto [size_min, size_max] = parse_bag_size(a.bag_size);
  fractal::SyntheticConfig cfg;
  cfg.seed = a.seed;
  cfg.n_bags = a.bags + a.test_bags;
  cfg.bag_size_min = size_min;
  cfg.bag_size_max = size_max;
  cfg.d = a.d;
  cfg.agg = fractal::agg_kind_from_string(a.agg);
  cfg.label_kind = fractal::label_kind_from_string(a.label_kind);
  cfg.max_label = a.max_label;
  cfg.noise = a.noise;
  cfg.prior_quality = a.prior_quality;

  const fractal::Dataset all = fractal::generate_synthetic(cfg);
  auto [train, test] = fractal::split_dataset(all, std::size_t(a.bags));
  fractal::save_dataset(train, (dir / "train.jsonl").string());
  if (a.test_bags > 0)
    fractal::save_dataset(test, (dir / "test.jsonl").string());
  const fractal::Rng root(a.seed);
  if (a.pairs > 0) {
    const auto p =
        fractal::sample_preferences(train, a.pairs, root.fork(100).seed());
    fractal::save_preferences(p, (dir / "train_pairs.jsonl").string());
  }
  if (a.test_pairs > 0) {
    const auto p =
        fractal::sample_preferences(test, a.test_pairs, root.fork(101).seed());
    fractal::save_preferences(p, (dir / "test_pairs.jsonl").string());
  }
}

int run_synth(const SynthArgs& a) {
  run_synth_into(a, a.out);
  write_manifest(a.out, "synth", synth_flags(a));
  return kExitOk;
}

int run_validate(const std::string& data, const std::string& pairs) {
  const fractal::Dataset ds = fractal::load_dataset(data);
  std::cout << "bags: " << ds.bags.size()
            << "\ninstances: " << ds.instance_count() << "\nd: " << ds.d
            << "\nlabel_kind: " << fractal::to_string(ds.label_kind) << "\n";
  if (!pairs.empty()) {
    const auto p = fractal::load_preferences(pairs, ds);
    std::cout << "preference pairs: " << p.size() << "\n";
  }
  bool checkable = !ds.bags.empty();
  for (const fractal::Bag& b : ds.bags) {
    if (!b.bag_label) checkable = false;
    for (const fractal::Instance& x : b.instances)
      if (!x.gold_label) checkable = false;
  }
  if (!checkable) {
    std::cout << "consistency: not checkable (labels absent)\n";
    return kExitOk;
  }
  const auto issues = fractal::validate_consistency(ds);
  if (issues.empty()) {
    std::cout << "consistency: ok\n";
    return kExitOk;
  }
  std::cout << "consistency: " << issues.size() << " bag(s) inconsistent\n";
  for (std::size_t i = 0; i < issues.size() && i < 10; ++i)
    std::cout << "  " << issues[i].bag_id << ": stored " << issues[i].actual
              << ", aggregate of gold labels " << issues[i].expected << "\n";
  return kExitNumerical;
}

fractal::Dataset load_with_pairs(const std::string& data,
                                 const std::string& pairs) {
  fractal::Dataset ds = fractal::load_dataset(data);
  if (!pairs.empty()) ds.preferences = fractal::load_preferences(pairs, ds);
  return ds;
}

// Trains into dir and returns the checkpoint path.
fs::path run_train_into(const fractal::Dataset& ds,
                        const fractal::TrainConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  const fractal::TrainResult result = fractal::train(ds, cfg);
  const fs::path ckpt = dir / "model.ckpt";
  result.model.save(ckpt.string());
  fractal::save_train_log((dir / "train_log.jsonl").string(), result.log);
  fractal::save_train_config((dir / "config.json").string(), cfg);
  return ckpt;
}

int run_train(const std::string& data, const std::string& pairs,
              const std::string& config, const std::string& out) {
  const fractal::Dataset ds = load_with_pairs(data, pairs);
  const fractal::TrainConfig cfg = fractal::load_train_config(config);
  run_train_into(ds, cfg, out);
  ordered_json flags;
  flags["data"] = data;
  flags["pairs"] = pairs;
  flags["config"] = config;
  flags["out"] = out;
  write_manifest(out, "train", std::move(flags));
  return kExitOk;
}

void run_pslab_into(const fractal::Dataset& ds, const fractal::ScorerModel& m,
                    const fs::path& dir) {
  fs::create_directories(dir);
  fractal::PslabAudit audit;
  const fractal::Dataset pseudo = fractal::pslab_dataset(ds, m, &audit);
  fractal::save_dataset(pseudo, (dir / "pseudo.jsonl").string());
  ordered_json a;
  a["bags"] = audit.bags;
  a["forced_bags"] = audit.forced_bags;
  a["flipped_bags"] = audit.flipped_bags;
  a["instances"] = audit.instances;
  a["positive_labels"] = audit.positive_labels;
  write_text(dir / "audit.json", a.dump(2) + "\n");
}

int run_pslab(const std::string& data, const std::string& model,
              const std::string& out) {
  const fractal::Dataset ds = fractal::load_dataset(data);
  const auto applicability = fractal::pslab_applicability(ds);
  if (!applicability.ok) {
    std::cerr << "pseudo-labeling not applicable: " << applicability.reason
              << "\n";
    return kExitNotApplicable;
  }
  const fractal::ScorerModel m = fractal::ScorerModel::load(model);
  run_pslab_into(ds, m, out);
  ordered_json flags;
  flags["data"] = data;
  flags["model"] = model;
  flags["out"] = out;
  write_manifest(out, "pslab", std::move(flags));
  return kExitOk;
}

void run_eval_into(const fractal::Dataset& ds, const fractal::ScoreFn& score,
                   const fs::path& dir) {
  fs::create_directories(dir);
  const fractal::EvalReport report = fractal::evaluate_dataset(ds, score);
  const std::string json_text = fractal::report_to_json(report).dump(2);
  write_text(dir / "report.json", json_text + "\n");
  write_text(dir / "report.tsv", fractal::report_row_header() + "\n" +
                                     fractal::report_to_row(report) + "\n");
  std::cout << json_text << "\n";
}

int run_eval(const std::string& data, const std::string& model,
             const std::string& pairs, const std::string& scorer,
             const std::string& out) {
  const fractal::Dataset ds = load_with_pairs(data, pairs);
  fractal::ScoreFn score;
  if (scorer == "cosine") {
    score = fractal::cosine_scorer(ds);
  } else if (scorer == "model") {
    if (model.empty())
      throw std::runtime_error("--scorer model needs --model");
    score = fractal::model_scorer(fractal::ScorerModel::load(model));
  } else {
    throw std::runtime_error("unknown scorer: " + scorer);
  }
  run_eval_into(ds, score, out);
  ordered_json flags;
  flags["data"] = data;
  flags["model"] = model;
  flags["pairs"] = pairs;
  flags["scorer"] = scorer;
  flags["out"] = out;
  write_manifest(out, "eval", std::move(flags));
  return kExitOk;
}

int run_pipeline(const SynthArgs& synth, const std::string& config,
                 const std::string& out) {
  const fs::path root = out;
  const fs::path data_dir = root / "data";
  run_synth_into(synth, data_dir);

  fractal::TrainConfig cfg = fractal::load_train_config(config);
  fractal::Dataset train_ds =
      fractal::load_dataset((data_dir / "train.jsonl").string());
  const fs::path train_pairs = data_dir / "train_pairs.jsonl";
  if (fs::exists(train_pairs))
    train_ds.preferences =
        fractal::load_preferences(train_pairs.string(), train_ds);
  const fs::path ckpt = run_train_into(train_ds, cfg, root / "train");

  // Pseudo-label and retrain when label probabilities support it; a
  // preference-trained model never sees bag labels, so it skips too.
  std::string pslab_note;
  fs::path final_ckpt = ckpt;
  const auto applicability = fractal::pslab_applicability(train_ds);
  if (cfg.mode == fractal::TrainMode::Preference) {
    pslab_note = "skipped: preference supervision carries no bag labels";
  } else if (!applicability.ok) {
    pslab_note = "skipped: " + applicability.reason;
  } else {
    const fractal::ScorerModel m = fractal::ScorerModel::load(ckpt.string());
    run_pslab_into(train_ds, m, root / "pslab");
    fractal::Dataset pseudo = fractal::load_dataset(
        ((root / "pslab") / "pseudo.jsonl").string());
    fractal::TrainConfig retrain_cfg = cfg;
    retrain_cfg.mode = fractal::TrainMode::Supervised;
    retrain_cfg.weights = {};
    retrain_cfg.weights.bag = 1.0;
    final_ckpt = run_train_into(pseudo, retrain_cfg, root / "retrain");
    pslab_note = "ran";
  }

  if (synth.test_bags > 0) {
    fractal::Dataset test_ds =
        fractal::load_dataset((data_dir / "test.jsonl").string());
    const fs::path test_pairs = data_dir / "test_pairs.jsonl";
    if (fs::exists(test_pairs))
      test_ds.preferences =
          fractal::load_preferences(test_pairs.string(), test_ds);
    const fractal::ScorerModel final_model =
        fractal::ScorerModel::load(final_ckpt.string());
    run_eval_into(test_ds, fractal::model_scorer(final_model), root / "eval");
  }

  ordered_json flags;
  flags["synth"] = synth_flags(synth);
  flags["config"] = config;
  flags["out"] = out;
  flags["pslab"] = pslab_note;
  write_manifest(root, "pipeline", std::move(flags));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weak-supervision toolkit: disaggregates response-level "
               "labels into sentence-level scores"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* cmd_synth = app.add_subcommand(
      "synth", "Generate a synthetic bag-labeled dataset");
  cmd_synth->add_option("--seed", synth.seed, "Generator seed");
  cmd_synth->add_option("--bags", synth.bags, "Training bags")->required();
  cmd_synth->add_option("--test-bags", synth.test_bags, "Held-out bags");
  cmd_synth->add_option("--pairs", synth.pairs, "Training preference pairs");
  cmd_synth->add_option("--test-pairs", synth.test_pairs,
                        "Held-out preference pairs");
  cmd_synth->add_option("--d", synth.d, "Embedding dimension");
  cmd_synth->add_option("--agg", synth.agg, "Aggregation: min, max or avg");
  cmd_synth->add_option("--label-kind", synth.label_kind,
                        "binary or integer");
  cmd_synth->add_option("--L", synth.max_label, "Top integer label");
  cmd_synth->add_option("--bag-size", synth.bag_size, "Bag size as MIN:MAX");
  cmd_synth->add_option("--noise", synth.noise, "Label flip probability");
  cmd_synth->add_option("--prior-quality", synth.prior_quality,
                        "External prior informativeness in [0, 1]");
  cmd_synth->add_option("--out", synth.out, "Output directory")->required();

  std::string data, pairs, config, model, out, scorer = "model";
  auto* cmd_validate =
      app.add_subcommand("validate", "Check a dataset file");
  cmd_validate->add_option("--data", data, "Dataset file")->required();
  cmd_validate->add_option("--pairs", pairs, "Preference file");

  auto* cmd_train = app.add_subcommand("train", "Train an instance scorer");
  cmd_train->add_option("--data", data, "Dataset file")->required();
  cmd_train->add_option("--pairs", pairs, "Preference file");
  cmd_train->add_option("--config", config, "Training config")->required();
  cmd_train->add_option("--out", out, "Output directory")->required();

  auto* cmd_pslab = app.add_subcommand(
      "pslab", "Pseudo-label instances from a trained scorer");
  cmd_pslab->add_option("--data", data, "Dataset file")->required();
  cmd_pslab->add_option("--model", model, "Checkpoint")->required();
  cmd_pslab->add_option("--out", out, "Output directory")->required();

  auto* cmd_eval = app.add_subcommand("eval", "Evaluate a scorer");
  cmd_eval->add_option("--data", data, "Dataset file")->required();
  cmd_eval->add_option("--model", model, "Checkpoint");
  cmd_eval->add_option("--pairs", pairs, "Preference file");
  cmd_eval->add_option("--scorer", scorer, "model or cosine");
  cmd_eval->add_option("--out", out, "Output directory")->required();

  auto* cmd_pipeline = app.add_subcommand(
      "pipeline", "synth, train, pseudo-label, retrain and evaluate");
  cmd_pipeline->add_option("--seed", synth.seed, "Generator seed");
  cmd_pipeline->add_option("--bags", synth.bags, "Training bags")->required();
  cmd_pipeline->add_option("--test-bags", synth.test_bags, "Held-out bags");
  cmd_pipeline->add_option("--pairs", synth.pairs,
                           "Training preference pairs");
  cmd_pipeline->add_option("--test-pairs", synth.test_pairs,
                           "Held-out preference pairs");
  cmd_pipeline->add_option("--d", synth.d, "Embedding dimension");
  cmd_pipeline->add_option("--agg", synth.agg,
                           "Aggregation: min, max or avg");
  cmd_pipeline->add_option("--label-kind", synth.label_kind,
                           "binary or integer");
  cmd_pipeline->add_option("--L", synth.max_label, "Top integer label");
  cmd_pipeline->add_option("--bag-size", synth.bag_size,
                           "Bag size as MIN:MAX");
  cmd_pipeline->add_option("--noise", synth.noise, "Label flip probability");
  cmd_pipeline->add_option("--prior-quality", synth.prior_quality,
                           "External prior informativeness in [0, 1]");
  cmd_pipeline->add_option("--config", config, "Training config")->required();
  cmd_pipeline->add_option("--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (app.got_subcommand(cmd_synth)) return run_synth(synth);
    if (app.got_subcommand(cmd_validate)) return run_validate(data, pairs);
    if (app.got_subcommand(cmd_train))
      return run_train(data, pairs, config, out);
    if (app.got_subcommand(cmd_pslab)) return run_pslab(data, model, out);
    if (app.got_subcommand(cmd_eval))
      return run_eval(data, model, pairs, scorer, out);
    if (app.got_subcommand(cmd_pipeline))
      return run_pipeline(synth, config, out);
  } catch (const fractal::NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
