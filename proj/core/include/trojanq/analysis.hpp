#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trojanq/qtest.hpp"
#include "trojanq/weights_io.hpp"

namespace trojanq::analysis {

struct GroundTruth {
  bool is_trojaned = false;
  std::optional<std::size_t> target_class;
};

struct ScanRecord {
  std::string model_id;
  std::string path;
  double q = 0.0;
  std::size_t candidate_target = 0;
  std::size_t num_classes = 0;
  Verdict verdict = Verdict::Benign;
  std::optional<double> confidence;
  DetectionPolicy policy;
  // Joined from a forge manifest when the model came from one.
  std::optional<GroundTruth> ground_truth;
  std::optional<double> poison_fraction;
  std::optional<double> gamma;
};

struct ScanError {
  std::string path;
  std::string error;
};

struct ScanResult {
  std::vector<ScanRecord> records;  // sorted by model_id
  std::vector<ScanError> errors;    // sorted by path

  bool any_trojaned() const;
};

struct ScanOptions {
  // nullopt applies default_policy() per model.
  std::optional<DetectionPolicy> policy;
  Format format = Format::Auto;
  TensorSelector selector;
  std::size_t workers = 1;
};

// Inputs may be weight files, forge manifests, or directories. A directory
// that holds manifests is scanned through them; otherwise every .npy,
// .safetensors and .json file in it is scanned. Per-file failures are
// collected; throws EmptyCorpus when there is nothing to scan and ScanFailed
// when every file fails.
ScanResult batch_scan(std::span<const std::filesystem::path> inputs, const ScanOptions& options);

ScanRecord scan_file(const std::filesystem::path& path, const ScanOptions& options);

// False-positive and false-negative rates against a Q threshold, using the
// strict rule "flag iff q > threshold".
struct SweepReport {
  std::vector<double> thresholds;  // ascending: observed q values plus 0 and 1
  std::vector<double> fpr;
  std::vector<double> fnr;
  std::size_t benign_count = 0;
  std::size_t trojaned_count = 0;
};

struct OperatingPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double fnr = 0.0;
};

// Throws MissingGroundTruth if a record lacks labels, DegenerateCorpus if
// either class is absent.
SweepReport sweep(std::span<const ScanRecord> records);
SweepReport sweep_scores(std::span<const double> benign_q, std::span<const double> trojaned_q);

OperatingPoint rates_at(std::span<const double> benign_q, std::span<const double> trojaned_q, double threshold);

// Minimises fpr + fnr; ties go to the smallest threshold.
OperatingPoint best_threshold(const SweepReport& report);

std::string sweep_csv(const SweepReport& report);
void write_sweep_csv(const SweepReport& report, const std::filesystem::path& path);

// Pearson product-moment correlation. Throws InsufficientData below two
// points and ZeroVariance when either side is constant.
double pearson(std::span<const double> x, std::span<const double> y);

// Correlation between poison fraction and q over trojaned records that carry
// a poison fraction. Needs at least three such records.
double poison_correlation(std::span<const ScanRecord> records);

inline constexpr std::size_t kHistogramBins = 64;

// Two CSV sections separated by a blank line:
//   class_index,bin_left,bin_right,count   (64 bins over the global range)
//   class_index,mean
std::string row_distributions_csv(const WeightMatrix& matrix);
void export_row_distributions(const WeightMatrix& matrix, const std::filesystem::path& path);

// JSON payloads written by the CLI.
std::string qreport_json(const QReport& report, const WeightMatrix& matrix);
std::string scan_report_json(const ScanResult& result, const ScanOptions& options);
std::string policy_json(const std::optional<DetectionPolicy>& policy);

}  // namespace trojanq::analysis
