#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "../byte_io.hpp"
#include "trojanq/analysis.hpp"
#include "trojanq/error.hpp"

namespace trojanq::analysis {

namespace {

double fraction(std::size_t count, std::size_t total) {
  return static_cast<double>(count) / static_cast<double>(total);
}

std::string format_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace

OperatingPoint rates_at(std::span<const double> benign_q, std::span<const double> trojaned_q, double threshold) {
  const auto flagged = std::count_if(benign_q.begin(), benign_q.end(), [&](double q) { return q > threshold; });
  const auto missed = std::count_if(trojaned_q.begin(), trojaned_q.end(), [&](double q) { return q <= threshold; });
  return OperatingPoint{threshold, fraction(static_cast<std::size_t>(flagged), benign_q.size()),
                        fraction(static_cast<std::size_t>(missed), trojaned_q.size())};
}

SweepReport sweep_scores(std::span<const double> benign_q, std::span<const double> trojaned_q) {
  if (benign_q.empty() || trojaned_q.empty()) {
    throw Error(ErrorCode::DegenerateCorpus, "sweep needs both benign and trojaned models (got " +
                                                 std::to_string(benign_q.size()) + " benign, " +
                                                 std::to_string(trojaned_q.size()) + " trojaned)");
  }
  SweepReport report;
  report.benign_count = benign_q.size();
  report.trojaned_count = trojaned_q.size();
  report.thresholds = {0.0, 1.0};
  report.thresholds.insert(report.thresholds.end(), benign_q.begin(), benign_q.end());
  report.thresholds.insert(report.thresholds.end(), trojaned_q.begin(), trojaned_q.end());
  std::sort(report.thresholds.begin(), report.thresholds.end());
  report.thresholds.erase(std::unique(report.thresholds.begin(), report.thresholds.end()), report.thresholds.end());

  // Both score lists sorted once; each threshold then costs two binary searches.
  std::vector<double> benign(benign_q.begin(), benign_q.end());
  std::vector<double> trojaned(trojaned_q.begin(), trojaned_q.end());
  std::sort(benign.begin(), benign.end());
  std::sort(trojaned.begin(), trojaned.end());
  for (double t : report.thresholds) {
    const auto benign_at_or_below = std::upper_bound(benign.begin(), benign.end(), t) - benign.begin();
    const auto trojaned_at_or_below = std::upper_bound(trojaned.begin(), trojaned.end(), t) - trojaned.begin();
    report.fpr.push_back(fraction(benign.size() - static_cast<std::size_t>(benign_at_or_below), benign.size()));
    report.fnr.push_back(fraction(static_cast<std::size_t>(trojaned_at_or_below), trojaned.size()));
  }
  return report;
}

SweepReport sweep(std::span<const ScanRecord> records) {
  std::vector<double> benign;
  std::vector<double> trojaned;
  for (const auto& record : records) {
    if (!record.ground_truth) {
      throw Error(ErrorCode::MissingGroundTruth, "record '" + record.model_id + "' has no ground truth");
    }
    (record.ground_truth->is_trojaned ? trojaned : benign).push_back(record.q);
  }
  return sweep_scores(benign, trojaned);
}

OperatingPoint best_threshold(const SweepReport& report) {
  OperatingPoint best{report.thresholds.front(), report.fpr.front(), report.fnr.front()};
  for (std::size_t i = 1; i < report.thresholds.size(); ++i) {
    if (report.fpr[i] + report.fnr[i] < best.fpr + best.fnr) {
      best = OperatingPoint{report.thresholds[i], report.fpr[i], report.fnr[i]};
    }
  }
  return best;
}

std::string sweep_csv(const SweepReport& report) {
  std::string out = "threshold,fpr,fnr\n";
  for (std::size_t i = 0; i < report.thresholds.size(); ++i) {
    out += format_double(report.thresholds[i]) + "," + format_double(report.fpr[i]) + "," +
           format_double(report.fnr[i]) + "\n";
  }
  return out;
}

void write_sweep_csv(const SweepReport& report, const std::filesystem::path& path) {
  detail::atomic_write(path, sweep_csv(report));
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::InsufficientData, "pearson: mismatched lengths");
  if (x.size() < 2) throw Error(ErrorCode::InsufficientData, "pearson: need at least two points");
  const double n = static_cast<double>(x.size());
  const double mean_x = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double mean_y = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mean_x;
    const double dy = y[i] - mean_y;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::ZeroVariance, "pearson: a variable is constant");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double poison_correlation(std::span<const ScanRecord> records) {
  std::vector<double> fractions;
  std::vector<double> scores;
  for (const auto& record : records) {
    if (!record.ground_truth || !record.ground_truth->is_trojaned || !record.poison_fraction) continue;
    fractions.push_back(*record.poison_fraction);
    scores.push_back(record.q);
  }
  if (fractions.size() < 3) {
    throw Error(ErrorCode::InsufficientData, "poison correlation needs at least 3 trojaned records, got " +
                                                 std::to_string(fractions.size()));
  }
  return pearson(fractions, scores);
}

std::string row_distributions_csv(const WeightMatrix& matrix) {
  const auto values = matrix.values();
  const auto [min_it, max_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *min_it;
  const double hi = *max_it;
  const double width = (hi - lo) / static_cast<double>(kHistogramBins);

  std::string out = "class_index,bin_left,bin_right,count\n";
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    std::vector<std::size_t> counts(kHistogramBins, 0);
    for (double v : matrix.row(i)) {
      std::size_t bin = 0;
      if (hi > lo) {
        bin = static_cast<std::size_t>(std::floor((v - lo) / (hi - lo) * static_cast<double>(kHistogramBins)));
        bin = std::min(bin, kHistogramBins - 1);
      }
      ++counts[bin];
    }
    for (std::size_t b = 0; b < kHistogramBins; ++b) {
      const double left = lo + width * static_cast<double>(b);
      const double right = b + 1 == kHistogramBins ? hi : lo + width * static_cast<double>(b + 1);
      out += std::to_string(i) + "," + format_double(left) + "," + format_double(right) + "," +
             std::to_string(counts[b]) + "\n";
    }
  }
  out += "\nclass_index,mean\n";
  const auto stats = row_means(matrix);
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    out += std::to_string(i) + "," + format_double(stats.means[i]) + "\n";
  }
  return out;
}

void export_row_distributions(const WeightMatrix& matrix, const std::filesystem::path& path) {
  detail::atomic_write(path, row_distributions_csv(matrix));
}

}  // namespace trojanq::analysis
