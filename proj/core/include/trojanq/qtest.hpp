#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "trojanq/weights_io.hpp"

namespace trojanq {

// Per-class mean of the final-layer weights, plus the ascending order of
// those means (ties broken by class index).
struct RowStats {
  std::vector<double> means;
  std::vector<std::size_t> sorted_order;
};

RowStats row_means(const WeightMatrix& matrix);
RowStats row_stats_from_means(std::vector<double> means);

// Dixon's r10 ratio for the largest value:
//   (top - second) / (top - bottom)
// A zero range yields 0. Throws TooFewClasses below three classes.
double q_statistic(const RowStats& stats);

// Tabulated r10 critical values, n = 3..30 at 90/95/99% confidence.
class DixonTable {
 public:
  static constexpr std::size_t kMinN = 3;
  static constexpr std::size_t kMaxN = 30;
  static constexpr std::array<double, 3> kConfidenceLevels = {0.90, 0.95, 0.99};

  // Throws OutOfTableRange or UnsupportedConfidence.
  static double critical(std::size_t n, double confidence);
};

inline double dixon_critical(std::size_t n, double confidence) {
  return DixonTable::critical(n, confidence);
}

struct TablePolicy {
  double confidence = 0.90;
};
struct FixedPolicy {
  double threshold = 0.38;
};
using DetectionPolicy = std::variant<TablePolicy, FixedPolicy>;

// TABLE(0.90) when the class count is inside the Dixon table, FIXED(0.38)
// otherwise.
DetectionPolicy default_policy(std::size_t num_classes);
std::string describe(const DetectionPolicy& policy);

enum class Verdict { Trojaned, Benign };
std::string_view to_string(Verdict verdict);

struct QReport {
  double q = 0.0;
  std::size_t candidate_target = 0;
  RowStats row_stats;
  Verdict verdict = Verdict::Benign;
  // Highest tabulated level whose critical value q exceeds; TABLE mode only.
  std::optional<double> confidence;
  DetectionPolicy policy;
  // The value q was compared against (Q_crit or the fixed threshold).
  double decision_threshold = 0.0;
};

// Verdict is Trojaned iff q strictly exceeds the policy's threshold.
QReport detect(const WeightMatrix& matrix, const DetectionPolicy& policy);
QReport detect(const RowStats& stats, const DetectionPolicy& policy);

}  // namespace trojanq
