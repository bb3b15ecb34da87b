#include <algorithm>
#include <set>

#include "trojanq/analysis.hpp"
#include "trojanq/corpus.hpp"
#include "trojanq/error.hpp"
#include "trojanq/parallel.hpp"

namespace trojanq::analysis {

namespace fs = std::filesystem;

namespace {

bool is_weight_extension(const fs::path& path) {
  const auto ext = path.extension().string();
  return ext == ".npy" || ext == ".safetensors" || ext == ".json";
}

std::vector<fs::path> expand_directory(const fs::path& dir) {
  std::vector<fs::path> manifests;
  std::vector<fs::path> weights;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (!entry.is_regular_file()) continue;
    const auto& path = entry.path();
    if (!is_weight_extension(path)) continue;
    if (path.extension() == ".json" && forge::is_manifest(path)) {
      manifests.push_back(path);
    } else {
      weights.push_back(path);
    }
  }
  if (ec) throw Error(ErrorCode::IoError, "cannot list " + dir.string() + ": " + ec.message());
  auto& chosen = manifests.empty() ? weights : manifests;
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

ScanRecord scan_manifest(const fs::path& path, const ScanOptions& options) {
  const auto entry = forge::read_manifest(path);
  ScanOptions weight_options = options;
  weight_options.format = Format::Auto;
  // Forge always writes one row per class, even when h < C.
  weight_options.selector.orientation = Orientation::RowsAreClasses;
  auto record = scan_file(path.parent_path() / entry.weights_file, weight_options);
  record.model_id = entry.job.model_id;
  GroundTruth truth;
  truth.is_trojaned = entry.job.is_trojaned;
  if (entry.job.is_trojaned) truth.target_class = entry.job.poison.target_class;
  record.ground_truth = truth;
  record.poison_fraction = entry.job.poison.poison_fraction;
  record.gamma = entry.job.train.gamma;
  return record;
}

}  // namespace

bool ScanResult::any_trojaned() const {
  return std::any_of(records.begin(), records.end(),
                     [](const ScanRecord& r) { return r.verdict == Verdict::Trojaned; });
}

ScanRecord scan_file(const fs::path& path, const ScanOptions& options) {
  const auto matrix = load_weight_matrix(path, options.format, options.selector);
  const auto policy = options.policy.value_or(default_policy(matrix.rows()));
  const auto report = detect(matrix, policy);
  ScanRecord record;
  record.model_id = path.stem().string();
  record.path = path.string();
  record.q = report.q;
  record.candidate_target = report.candidate_target;
  record.num_classes = matrix.rows();
  record.verdict = report.verdict;
  record.confidence = report.confidence;
  record.policy = report.policy;
  return record;
}

ScanResult batch_scan(std::span<const fs::path> inputs, const ScanOptions& options) {
  std::vector<fs::path> files;
  for (const auto& input : inputs) {
    std::error_code ec;
    if (fs::is_directory(input, ec)) {
      auto expanded = expand_directory(input);
      files.insert(files.end(), expanded.begin(), expanded.end());
    } else {
      files.push_back(input);
    }
  }
  if (files.empty()) throw Error(ErrorCode::EmptyCorpus, "nothing to scan");

  struct Outcome {
    std::optional<ScanRecord> record;
    std::optional<ScanError> error;
  };
  std::vector<Outcome> outcomes(files.size());
  parallel_for(files.size(), options.workers, [&](std::size_t i) {
    try {
      const bool manifest = files[i].extension() == ".json" && forge::is_manifest(files[i]);
      outcomes[i].record = manifest ? scan_manifest(files[i], options) : scan_file(files[i], options);
    } catch (const std::exception& e) {
      outcomes[i].error = ScanError{files[i].string(), e.what()};
    }
  });

  ScanResult result;
  for (auto& outcome : outcomes) {
    if (outcome.record) result.records.push_back(std::move(*outcome.record));
    if (outcome.error) result.errors.push_back(std::move(*outcome.error));
  }
  if (result.records.empty()) {
    throw Error(ErrorCode::ScanFailed, "all " + std::to_string(files.size()) + " files failed to scan; first: " +
                                           result.errors.front().error);
  }
  std::stable_sort(result.records.begin(), result.records.end(),
                   [](const ScanRecord& a, const ScanRecord& b) { return a.model_id < b.model_id; });
  std::stable_sort(result.errors.begin(), result.errors.end(),
                   [](const ScanError& a, const ScanError& b) { return a.path < b.path; });
  return result;
}

}  // namespace trojanq::analysis
