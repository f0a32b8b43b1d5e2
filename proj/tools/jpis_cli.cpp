// Command-line front end: training, evaluation, decoding, grid search,
// gradient checking and corpus preparation.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "jpis/config.hpp"
#include "jpis/diagnostics.hpp"
#include "jpis/errors.hpp"
#include "jpis/proslu.hpp"
#include "jpis/synth.hpp"
#include "jpis/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace jpis;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitNumerical = 2;

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void print_epoch(const EpochLog& e) {
  std::fprintf(stderr,
               "epoch %3zu  loss %.4f (id %.4f, sf %.4f)  valid intent %.4f  slot_f1 %.4f  "
               "overall %.4f\n",
               e.epoch, e.loss, e.intent_loss, e.slot_loss, e.valid.intent_accuracy,
               e.valid.slot_f1, e.valid.overall_accuracy);
}

void print_metrics(const char* label, const Metrics& m) {
  std::printf("%s intent_acc %.4f  slot_f1 %.4f  overall_acc %.4f  (n=%zu)\n", label,
              m.intent_accuracy, m.slot_f1, m.overall_accuracy, m.n_utterances);
}

struct TrainOverrides {
  std::optional<std::string> ablation;
  std::optional<double> lr;
  std::optional<double> lambda;
  std::optional<std::size_t> epochs;
  std::optional<double> clip_norm;
  bool no_teacher_forcing = false;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--ablation", ablation,
                    "none | no_slot2intent | no_up | no_ca | no_profile");
    cmd->add_option("--lr", lr, "Learning rate");
    cmd->add_option("--lambda", lambda, "Intent weight in the joint loss");
    cmd->add_option("--epochs", epochs, "Training epochs");
    cmd->add_option("--clip-norm", clip_norm, "Global gradient-norm clip (0 = off)");
    cmd->add_flag("--no-teacher-forcing", no_teacher_forcing,
                  "Feed the predicted intent to the slot decoder while training");
  }

  void apply(TrainConfig& c) const {
    if (ablation) c.model.ablation = parse_ablation(*ablation);
    if (lr) c.learning_rate = *lr;
    if (lambda) c.lambda = *lambda;
    if (epochs) c.epochs = *epochs;
    if (clip_norm) c.clip_norm = *clip_norm;
    if (no_teacher_forcing) c.intent_teacher_forcing = false;
    c.validate();
  }
};

const encoder::ProfileManifest& require_manifest(const TrainConfig& c) {
  if (c.model.encoder.manifest.fields.empty()) {
    throw ValidationError("config has no profile_manifest");
  }
  return c.model.encoder.manifest;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint profile-aware intent detection and slot filling"};
  app.require_subcommand(1);

  // train
  std::string config_path, train_path, valid_path, test_path, out_path, log_path;
  std::optional<std::uint64_t> seed;
  TrainOverrides overrides;
  auto* train_cmd = app.add_subcommand("train", "Train one model");
  train_cmd->add_option("--config", config_path, "Config file (JSON)")->required();
  train_cmd->add_option("--train", train_path, "Training corpus (JSONL)")->required();
  train_cmd->add_option("--valid", valid_path, "Validation corpus (JSONL)")->required();
  train_cmd->add_option("--out", out_path, "Checkpoint to write")->required();
  train_cmd->add_option("--seed", seed, "Run seed (default: first seed in config)");
  train_cmd->add_option("--log", log_path, "Write the epoch log as JSON");
  overrides.add_to(train_cmd);

  // eval
  std::string ckpt_path, data_path, report_path;
  auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint on a corpus");
  eval_cmd->add_option("--ckpt", ckpt_path, "Checkpoint")->required();
  eval_cmd->add_option("--data", data_path, "Corpus (JSONL)")->required();
  eval_cmd->add_option("--report", report_path, "Write the metrics report as JSON");

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "Print intent and tags per utterance");
  predict_cmd->add_option("--ckpt", ckpt_path, "Checkpoint")->required();
  predict_cmd->add_option("--data", data_path, "Corpus (JSONL)")->required();

  // gridsearch
  std::string out_dir;
  auto* grid_cmd = app.add_subcommand("gridsearch", "Grid search over lr and lambda");
  grid_cmd->add_option("--config", config_path, "Config file (JSON)")->required();
  grid_cmd->add_option("--train", train_path, "Training corpus (JSONL)")->required();
  grid_cmd->add_option("--valid", valid_path, "Validation corpus (JSONL)")->required();
  grid_cmd->add_option("--out-dir", out_dir, "Output directory")->required();
  TrainOverrides grid_overrides;
  grid_overrides.add_to(grid_cmd);

  // multiseed
  auto* multi_cmd = app.add_subcommand("multiseed", "Train and test once per config seed");
  multi_cmd->add_option("--config", config_path, "Config file (JSON)")->required();
  multi_cmd->add_option("--train", train_path, "Training corpus (JSONL)")->required();
  multi_cmd->add_option("--valid", valid_path, "Validation corpus (JSONL)")->required();
  multi_cmd->add_option("--test", test_path, "Test corpus (JSONL)")->required();
  multi_cmd->add_option("--report", report_path, "Write the averaged report as JSON");
  TrainOverrides multi_overrides;
  multi_overrides.add_to(multi_cmd);

  // gradcheck
  std::string dims = "small";
  std::string gc_ablation = "both";
  std::uint64_t gc_seed = 1;
  double gc_eps = 1e-4, gc_threshold = 1e-4, gc_fit_loss = 0.02;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  gc_cmd->add_option("--dims", dims, "Model size (only 'small')")
      ->check(CLI::IsMember({"small"}));
  gc_cmd->add_option("--ablation", gc_ablation, "none | no_slot2intent | both");
  gc_cmd->add_option("--seed", gc_seed, "Initialization seed");
  gc_cmd->add_option("--eps", gc_eps, "Central-difference step in [1e-6, 1e-4]");
  gc_cmd->add_option("--threshold", gc_threshold, "Maximum accepted relative error");
  gc_cmd->add_option("--fit-loss", gc_fit_loss,
                     "Fit the instance down to this loss first (0 = check at init)");

  // synth
  std::uint64_t synth_seed = 7;
  std::size_t synth_size = 2000;
  double ambiguity = 0.5;
  auto* synth_cmd = app.add_subcommand("synth", "Generate the synthetic profile corpus");
  synth_cmd->add_option("--seed", synth_seed, "Generator seed");
  synth_cmd->add_option("--size", synth_size, "Training records (valid/test get size/8)");
  synth_cmd->add_option("--ambiguity", ambiguity, "Fraction of profile-dependent utterances");
  synth_cmd->add_option("--out-dir", out_dir, "Output directory")->required();

  // convert-proslu
  std::string in_dir;
  auto* convert_cmd = app.add_subcommand("convert-proslu", "Convert a ProSLU release");
  convert_cmd->add_option("--in", in_dir, "ProSLU directory")->required();
  convert_cmd->add_option("--out-dir", out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*train_cmd) {
      TrainConfig config = load_train_config(config_path);
      overrides.apply(config);
      const auto& manifest = require_manifest(config);
      auto train_set = data::load_corpus(train_path, manifest);
      auto valid_set = data::load_corpus(valid_path, manifest);
      const std::uint64_t run_seed = seed.value_or(config.seeds.front());
      TrainResult run = train(config, run_seed, train_set, valid_set, print_epoch);
      json extra = {{"seed", run_seed},
                    {"learning_rate", config.learning_rate},
                    {"lambda", config.lambda},
                    {"best_epoch", run.best_epoch},
                    {"best_valid", metrics_to_json(run.best_valid)},
                    {"log", epoch_log_to_json(run.log)}};
      run.model.save(out_path, extra);
      if (!log_path.empty()) write_json(log_path, extra);
      std::printf("best epoch %zu\n", run.best_epoch);
      print_metrics("valid", run.best_valid);
    } else if (*eval_cmd) {
      JpisModel model = JpisModel::load(ckpt_path);
      auto records = data::load_corpus(data_path, model.config().encoder.manifest);
      MetricsReport report;
      report.mean = evaluate(model, records);
      report.per_seed = {report.mean};
      print_metrics("eval", report.mean);
      if (!report_path.empty()) write_json(report_path, report_to_json(report));
    } else if (*predict_cmd) {
      JpisModel model = JpisModel::load(ckpt_path);
      auto records = data::load_corpus(data_path, model.config().encoder.manifest);
      auto outputs = predict_all(model, records);
      for (std::size_t i = 0; i < records.size(); ++i) {
        json line = {{"tokens", records[i].tokens},
                     {"intent", outputs[i].intent},
                     {"tags", outputs[i].tags}};
        std::cout << line.dump() << '\n';
      }
    } else if (*grid_cmd) {
      TrainConfig config = load_train_config(config_path);
      grid_overrides.apply(config);
      const auto& manifest = require_manifest(config);
      auto train_set = data::load_corpus(train_path, manifest);
      auto valid_set = data::load_corpus(valid_path, manifest);
      std::printf("%-10s %-8s %-6s %-10s %-10s %-10s\n", "lr", "lambda", "epoch", "intent",
                  "slot_f1", "overall");
      GridResult grid = grid_search(config, train_set, valid_set, [](const GridPoint& p) {
        std::printf("%-10g %-8g %-6zu %-10.4f %-10.4f %-10.4f\n", p.learning_rate, p.lambda,
                    p.best_epoch, p.valid.intent_accuracy, p.valid.slot_f1,
                    p.valid.overall_accuracy);
        std::fflush(stdout);
      });
      json table = json::array();
      for (const auto& p : grid.table) {
        table.push_back({{"learning_rate", p.learning_rate},
                         {"lambda", p.lambda},
                         {"best_epoch", p.best_epoch},
                         {"valid", metrics_to_json(p.valid)}});
      }
      const GridPoint& best = grid.table[grid.best];
      fs::create_directories(out_dir);
      write_json(fs::path(out_dir) / "grid.json",
                 {{"table", table},
                  {"best", {{"learning_rate", best.learning_rate}, {"lambda", best.lambda}}}});
      grid.best_run->model.save(fs::path(out_dir) / "best.ckpt",
                                {{"seed", config.seeds.front()},
                                 {"learning_rate", best.learning_rate},
                                 {"lambda", best.lambda},
                                 {"log", epoch_log_to_json(grid.best_run->log)}});
      std::printf("best lr %g lambda %g\n", best.learning_rate, best.lambda);
    } else if (*multi_cmd) {
      TrainConfig config = load_train_config(config_path);
      multi_overrides.apply(config);
      const auto& manifest = require_manifest(config);
      auto train_set = data::load_corpus(train_path, manifest);
      auto valid_set = data::load_corpus(valid_path, manifest);
      auto test_set = data::load_corpus(test_path, manifest);
      MultiSeedResult result = multi_seed(config, train_set, valid_set, test_set, print_epoch);
      for (std::size_t i = 0; i < result.test.per_seed.size(); ++i) {
        std::printf("seed %llu ", static_cast<unsigned long long>(result.test.seeds[i]));
        print_metrics("test", result.test.per_seed[i]);
      }
      print_metrics("mean test", result.test.mean);
      if (!report_path.empty()) write_json(report_path, report_to_json(result.test));
    } else if (*gc_cmd) {
      std::vector<Ablation> variants;
      if (gc_ablation == "both") {
        variants = {Ablation::None, Ablation::NoSlotToIntent};
      } else {
        variants = {parse_ablation(gc_ablation)};
      }
      bool ok = true;
      for (Ablation a : variants) {
        GradCheckReport r = tiny_grad_check(a, gc_seed, gc_eps, gc_fit_loss);
        std::printf("%-15s max relative error %.3e over %zu elements (worst %s[%zu]: %.6e vs %.6e)\n",
                    to_string(a).c_str(), r.max_relative_error, r.elements_checked,
                    r.worst_parameter.c_str(), r.worst_index, r.worst_analytic, r.worst_numeric);
        ok = ok && r.max_relative_error < gc_threshold;
      }
      return ok ? kExitOk : kExitNumerical;
    } else if (*synth_cmd) {
      data::SynthCorpus corpus = data::synth_generate(synth_seed, synth_size, ambiguity);
      const fs::path dir(out_dir);
      fs::create_directories(dir);
      data::save_corpus(dir / "train.jsonl", corpus.train);
      data::save_corpus(dir / "valid.jsonl", corpus.valid);
      data::save_corpus(dir / "test.jsonl", corpus.test);
      TrainConfig config;
      config.model.encoder.manifest = corpus.manifest;
      save_train_config(dir / "config.json", config);
      write_json(dir / "meta.json", corpus.metadata);
      std::printf("wrote %zu/%zu/%zu records to %s\n", corpus.train.size(),
                  corpus.valid.size(), corpus.test.size(), dir.string().c_str());
    } else if (*convert_cmd) {
      data::ConvertedCorpus corpus = data::convert_proslu(in_dir);
      const fs::path dir(out_dir);
      fs::create_directories(dir);
      data::save_corpus(dir / "train.jsonl", corpus.train);
      data::save_corpus(dir / "valid.jsonl", corpus.valid);
      data::save_corpus(dir / "test.jsonl", corpus.test);
      TrainConfig config;
      config.model.encoder.manifest = corpus.manifest;
      save_train_config(dir / "config.json", config);
      std::printf("wrote %zu/%zu/%zu records to %s\n", corpus.train.size(),
                  corpus.valid.size(), corpus.test.size(), dir.string().c_str());
    }
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInvalid;
  }
  return kExitOk;
}
