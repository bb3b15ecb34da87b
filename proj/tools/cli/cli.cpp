#include "cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "trojanq/analysis.hpp"
#include "trojanq/atomic_file.hpp"
#include "trojanq/corpus.hpp"
#include "trojanq/error.hpp"
#include "trojanq/qtest.hpp"
#include "trojanq/weights_io.hpp"

namespace trojanq::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool verbose() {
  const char* flag = std::getenv("TROJANQ_VERBOSE");
  return flag != nullptr && *flag != '\0' && std::string(flag) != "0";
}

struct ScanArgs {
  std::vector<std::string> inputs;
  std::string format = "auto";
  std::string orientation = "auto";
  std::string tensor;
  std::optional<double> confidence;
  std::optional<double> threshold;
  std::string out;
  std::string histogram;
  std::size_t workers = 1;
};

struct ForgeArgs {
  std::size_t benign = 0;
  std::size_t trojan = 0;
  std::vector<double> poison = {0.3};
  std::vector<double> gamma = {0.0};
  std::vector<std::size_t> trigger_sizes = {2, 3, 4};
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "npy";
  std::size_t workers = 1;
  forge::ForgeSpec spec;
  forge::TrainConfig train;
};

struct SweepArgs {
  std::string corpus;
  std::string out;
  std::string format = "auto";
  std::size_t workers = 1;
};

struct QtableArgs {
  std::optional<std::size_t> n;
  double confidence = 0.90;
  bool all = false;
};

std::optional<DetectionPolicy> requested_policy(const ScanArgs& args) {
  if (args.confidence) {
    DixonTable::critical(DixonTable::kMinN, *args.confidence);  // rejects unsupported levels
    return TablePolicy{*args.confidence};
  }
  if (args.threshold) {
    if (!std::isfinite(*args.threshold)) throw Error(ErrorCode::InvalidConfig, "threshold must be finite");
    return FixedPolicy{*args.threshold};
  }
  return std::nullopt;
}

int cmd_scan(const ScanArgs& args, std::ostream& out, std::ostream& err) {
  analysis::ScanOptions options;
  options.policy = requested_policy(args);
  options.format = parse_format(args.format);
  options.selector.orientation = parse_orientation(args.orientation);
  if (!args.tensor.empty()) options.selector.tensor_name = args.tensor;
  options.workers = args.workers;

  const bool single_file = args.inputs.size() == 1 && !fs::is_directory(args.inputs.front());
  if (single_file) {
    const auto matrix = load_weight_matrix(args.inputs.front(), options.format, options.selector);
    const auto policy = options.policy.value_or(default_policy(matrix.rows()));
    const auto report = detect(matrix, policy);
    const auto payload = analysis::qreport_json(report, matrix);
    if (args.out.empty()) {
      out << payload;
    } else {
      write_file_atomic(args.out, payload);
    }
    if (!args.histogram.empty()) analysis::export_row_distributions(matrix, args.histogram);
    return report.verdict == Verdict::Trojaned ? kExitTrojanFound : kExitOk;
  }

  std::vector<fs::path> inputs(args.inputs.begin(), args.inputs.end());
  const auto result = analysis::batch_scan(inputs, options);
  const auto payload = analysis::scan_report_json(result, options);
  if (args.out.empty()) {
    out << payload;
  } else {
    write_file_atomic(args.out, payload);
  }
  const auto flagged = std::count_if(result.records.begin(), result.records.end(),
                                     [](const auto& r) { return r.verdict == Verdict::Trojaned; });
  err << "scanned " << result.records.size() << " models: " << flagged << " trojaned, "
      << result.errors.size() << " errors\n";
  for (const auto& e : result.errors) err << "  " << e.path << ": " << e.error << "\n";
  return result.any_trojaned() ? kExitTrojanFound : kExitOk;
}

int cmd_forge(const ForgeArgs& args, std::ostream& out, std::ostream& err) {
  forge::CorpusGrid grid;
  grid.benign = args.benign;
  grid.trojan = args.trojan;
  grid.poison_fractions = args.poison;
  grid.gammas = args.gamma;
  grid.trigger_sizes = args.trigger_sizes;
  grid.spec = args.spec;
  grid.train = args.train;
  grid.seed = args.seed;
  const auto jobs = forge::plan_corpus(grid);
  const Format format = parse_format(args.format);

  const bool chatty = verbose();
  std::size_t done = 0;
  const auto entries = forge::forge_corpus(args.out, jobs, args.workers, format, [&](const forge::ManifestEntry& e) {
    ++done;
    if (chatty) {
      err << "[" << done << "/" << jobs.size() << "] " << e.job.model_id << " acc=" << e.metrics.clean_accuracy
          << " asr=" << e.metrics.attack_success_rate << "\n";
    }
  });

  double accuracy = 0.0;
  double attack = 0.0;
  std::size_t trojaned = 0;
  for (const auto& e : entries) {
    accuracy += e.metrics.clean_accuracy;
    if (e.job.is_trojaned) {
      attack += e.metrics.attack_success_rate;
      ++trojaned;
    }
  }
  json summary = {{"out", args.out},
                  {"models", entries.size()},
                  {"benign", entries.size() - trojaned},
                  {"trojaned", trojaned},
                  {"mean_clean_accuracy", accuracy / static_cast<double>(entries.size())},
                  {"mean_attack_success_rate", trojaned ? json(attack / static_cast<double>(trojaned)) : json(nullptr)}};
  out << summary.dump(2) << "\n";
  return kExitOk;
}

int cmd_sweep(const SweepArgs& args, std::ostream& out, std::ostream& err) {
  analysis::ScanOptions options;
  options.format = parse_format(args.format);
  options.workers = args.workers;
  const std::vector<fs::path> inputs = {args.corpus};
  const auto result = analysis::batch_scan(inputs, options);
  for (const auto& e : result.errors) err << "skipped " << e.path << ": " << e.error << "\n";

  const auto report = analysis::sweep(result.records);
  const fs::path csv_path = args.out.empty() ? fs::path(args.corpus) / "sweep.csv" : fs::path(args.out);
  analysis::write_sweep_csv(report, csv_path);
  const auto best = analysis::best_threshold(report);

  json correlation = nullptr;
  try {
    correlation = analysis::poison_correlation(result.records);
  } catch (const Error&) {
    // Not every corpus varies the poison fraction.
  }
  json summary = {{"csv", csv_path.string()},
                  {"benign", report.benign_count},
                  {"trojaned", report.trojaned_count},
                  {"best_threshold", best.threshold},
                  {"fpr", best.fpr},
                  {"fnr", best.fnr},
                  {"poison_correlation", correlation}};
  out << summary.dump(2) << "\n";
  return kExitOk;
}

int cmd_qtable(const QtableArgs& args, std::ostream& out) {
  if (args.all) {
    out << "n,0.90,0.95,0.99\n";
    for (std::size_t n = DixonTable::kMinN; n <= DixonTable::kMaxN; ++n) {
      out << n;
      for (double level : DixonTable::kConfidenceLevels) out << "," << DixonTable::critical(n, level);
      out << "\n";
    }
    return kExitOk;
  }
  if (!args.n) throw Error(ErrorCode::InvalidConfig, "qtable needs -n or --all");
  out << DixonTable::critical(*args.n, args.confidence) << "\n";
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Data-free trojan detection from final-layer weights"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  ScanArgs scan;
  auto* scan_cmd = app.add_subcommand("scan", "Run the Q-test on weight files, manifests or corpus directories");
  scan_cmd->add_option("inputs", scan.inputs, "Weight files, manifests or directories")->required();
  scan_cmd->add_option("--format", scan.format, "auto, json, npy or safetensors")
      ->check(CLI::IsMember({"auto", "json", "npy", "safetensors"}));
  scan_cmd->add_option("--orientation", scan.orientation, "auto, rows (rows are classes) or cols")
      ->check(CLI::IsMember({"auto", "rows", "cols"}));
  scan_cmd->add_option("--tensor", scan.tensor, "Tensor name inside a safetensors container");
  auto* conf_opt = scan_cmd->add_option("--confidence", scan.confidence, "Dixon table mode: 0.90, 0.95 or 0.99");
  auto* thr_opt = scan_cmd->add_option("--threshold", scan.threshold, "Fixed Q threshold");
  conf_opt->excludes(thr_opt);
  thr_opt->excludes(conf_opt);
  scan_cmd->add_option("--out", scan.out, "Write the JSON report here instead of stdout");
  scan_cmd->add_option("--histogram", scan.histogram, "Single-file mode: write per-row weight histograms (CSV)");
  scan_cmd->add_option("--workers", scan.workers, "Files scanned concurrently")->check(CLI::PositiveNumber);

  ForgeArgs forge_args;
  auto* forge_cmd = app.add_subcommand("forge", "Train a corpus of synthetic benign and trojaned models");
  forge_cmd->add_option("--benign", forge_args.benign, "Number of benign models");
  forge_cmd->add_option("--trojan", forge_args.trojan, "Trojaned models per (poison, gamma) cell");
  forge_cmd->add_option("--poison", forge_args.poison, "Poison fractions")->delimiter(',');
  forge_cmd->add_option("--gamma", forge_args.gamma, "Target-row penalty strengths")->delimiter(',');
  forge_cmd->add_option("--trigger-sizes", forge_args.trigger_sizes, "Patch sizes to draw from")->delimiter(',');
  forge_cmd->add_option("--seed", forge_args.seed, "Master seed");
  forge_cmd->add_option("--out", forge_args.out, "Output directory")->required();
  forge_cmd->add_option("--format", forge_args.format, "Weight file format")->check(CLI::IsMember({"npy", "json"}));
  forge_cmd->add_option("--workers", forge_args.workers, "Models trained concurrently")->check(CLI::PositiveNumber);
  forge_cmd->add_option("--classes", forge_args.spec.num_classes, "Number of classes");
  forge_cmd->add_option("--side", forge_args.spec.image_side, "Image side length");
  forge_cmd->add_option("--hidden", forge_args.spec.hidden_dim, "Hidden layer width");
  forge_cmd->add_option("--samples-per-class", forge_args.spec.samples_per_class, "Samples generated per class");
  forge_cmd->add_option("--noise", forge_args.spec.noise_sigma, "Pixel noise sigma");
  forge_cmd->add_option("--class-weights", forge_args.spec.class_weights, "Per-class sample multipliers")->delimiter(',');
  forge_cmd->add_option("--lr", forge_args.train.learning_rate, "Learning rate");
  forge_cmd->add_option("--epochs", forge_args.train.epochs, "Training epochs");
  forge_cmd->add_option("--batch-size", forge_args.train.batch_size, "Minibatch size");

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "FPR/FNR as a function of the Q threshold over a forged corpus");
  sweep_cmd->add_option("corpus", sweep.corpus, "Corpus directory with manifests")->required();
  sweep_cmd->add_option("--out", sweep.out, "CSV output path (default <corpus>/sweep.csv)");
  sweep_cmd->add_option("--workers", sweep.workers, "Files scanned concurrently")->check(CLI::PositiveNumber);

  QtableArgs qtable;
  auto* qtable_cmd = app.add_subcommand("qtable", "Print Dixon r10 critical values");
  qtable_cmd->add_option("-n", qtable.n, "Sample size (number of classes)");
  qtable_cmd->add_option("-c,--confidence", qtable.confidence, "Confidence level: 0.90, 0.95 or 0.99");
  qtable_cmd->add_flag("--all", qtable.all, "Print the whole table as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitError;
  }

  try {
    if (*scan_cmd) return cmd_scan(scan, out, err);
    if (*forge_cmd) return cmd_forge(forge_args, out, err);
    if (*sweep_cmd) return cmd_sweep(sweep, out, err);
    if (*qtable_cmd) return cmd_qtable(qtable, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}

}  // namespace trojanq::cli
