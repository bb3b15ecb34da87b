#include "trojanq/qtest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "trojanq/error.hpp"

namespace trojanq {

namespace {

// r10 critical values from Dixon's tables as consolidated by Rorabacher
// (1991). Columns: 90%, 95%, 99%. Row k holds n = k + 3.
constexpr std::array<std::array<double, 3>, DixonTable::kMaxN - DixonTable::kMinN + 1> kR10 = {{
    {0.941, 0.970, 0.994},  // n = 3
    {0.765, 0.829, 0.926},
    {0.642, 0.710, 0.821},  // n = 5
    {0.560, 0.625, 0.740},
    {0.507, 0.568, 0.680},
    {0.468, 0.526, 0.634},  // n = 8
    {0.437, 0.493, 0.598},
    {0.412, 0.466, 0.568},  // n = 10
    {0.392, 0.444, 0.542},
    {0.376, 0.426, 0.522},
    {0.361, 0.410, 0.503},
    {0.349, 0.396, 0.488},
    {0.338, 0.384, 0.475},  // n = 15
    {0.329, 0.374, 0.463},
    {0.320, 0.365, 0.452},
    {0.313, 0.356, 0.442},
    {0.306, 0.349, 0.433},
    {0.300, 0.342, 0.425},  // n = 20
    {0.295, 0.337, 0.418},
    {0.290, 0.331, 0.411},
    {0.285, 0.326, 0.404},
    {0.281, 0.321, 0.399},
    {0.277, 0.317, 0.393},  // n = 25
    {0.273, 0.312, 0.388},
    {0.269, 0.308, 0.384},
    {0.266, 0.305, 0.380},
    {0.263, 0.301, 0.376},
    {0.260, 0.298, 0.372},  // n = 30
}};

std::optional<std::size_t> confidence_column(double confidence) {
  for (std::size_t i = 0; i < DixonTable::kConfidenceLevels.size(); ++i) {
    if (std::abs(confidence - DixonTable::kConfidenceLevels[i]) < 1e-9) return i;
  }
  return std::nullopt;
}

}  // namespace

RowStats row_stats_from_means(std::vector<double> means) {
  RowStats stats;
  stats.means = std::move(means);
  stats.sorted_order.resize(stats.means.size());
  std::iota(stats.sorted_order.begin(), stats.sorted_order.end(), std::size_t{0});
  std::stable_sort(stats.sorted_order.begin(), stats.sorted_order.end(),
                   [&](std::size_t a, std::size_t b) { return stats.means[a] < stats.means[b]; });
  return stats;
}

RowStats row_means(const WeightMatrix& matrix) {
  std::vector<double> means(matrix.rows());
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    const auto row = matrix.row(i);
    means[i] = std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(matrix.cols());
  }
  return row_stats_from_means(std::move(means));
}

double q_statistic(const RowStats& stats) {
  const std::size_t n = stats.sorted_order.size();
  if (n < 3) {
    throw Error(ErrorCode::TooFewClasses,
                "the Q statistic needs at least 3 classes, got " + std::to_string(n));
  }
  const double top = stats.means[stats.sorted_order[n - 1]];
  const double second = stats.means[stats.sorted_order[n - 2]];
  const double bottom = stats.means[stats.sorted_order[0]];
  const double range = top - bottom;
  if (range == 0.0) return 0.0;
  return std::clamp((top - second) / range, 0.0, 1.0);
}

double DixonTable::critical(std::size_t n, double confidence) {
  if (n < kMinN || n > kMaxN) {
    throw Error(ErrorCode::OutOfTableRange,
                "Dixon table covers n = 3..30, got n = " + std::to_string(n));
  }
  const auto column = confidence_column(confidence);
  if (!column) {
    std::ostringstream msg;
    msg << "confidence " << confidence << " is not one of 0.90, 0.95, 0.99";
    throw Error(ErrorCode::UnsupportedConfidence, msg.str());
  }
  return kR10[n - kMinN][*column];
}

DetectionPolicy default_policy(std::size_t num_classes) {
  if (num_classes >= DixonTable::kMinN && num_classes <= DixonTable::kMaxN) return TablePolicy{0.90};
  return FixedPolicy{0.38};
}

std::string describe(const DetectionPolicy& policy) {
  std::ostringstream out;
  if (const auto* table = std::get_if<TablePolicy>(&policy)) {
    out << "table(" << table->confidence << ")";
  } else {
    out << "fixed(" << std::get<FixedPolicy>(policy).threshold << ")";
  }
  return out.str();
}

std::string_view to_string(Verdict verdict) {
  return verdict == Verdict::Trojaned ? "TROJANED" : "BENIGN";
}

QReport detect(const RowStats& stats, const DetectionPolicy& policy) {
  QReport report;
  report.q = q_statistic(stats);
  report.candidate_target = stats.sorted_order.back();
  report.policy = policy;

  const std::size_t n = stats.means.size();
  if (const auto* table = std::get_if<TablePolicy>(&policy)) {
    report.decision_threshold = DixonTable::critical(n, table->confidence);
    for (double level : DixonTable::kConfidenceLevels) {
      if (report.q > DixonTable::critical(n, level)) report.confidence = level;
    }
  } else {
    report.decision_threshold = std::get<FixedPolicy>(policy).threshold;
  }
  report.verdict = report.q > report.decision_threshold ? Verdict::Trojaned : Verdict::Benign;
  report.row_stats = stats;
  return report;
}

QReport detect(const WeightMatrix& matrix, const DetectionPolicy& policy) {
  return detect(row_means(matrix), policy);
}

}  // namespace trojanq
