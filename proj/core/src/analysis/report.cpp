#include <json.hpp>

#include "trojanq/analysis.hpp"

namespace trojanq::analysis {

namespace {

using nlohmann::json;

json policy_object(const DetectionPolicy& policy) {
  if (const auto* table = std::get_if<TablePolicy>(&policy)) {
    return {{"mode", "table"}, {"confidence", table->confidence}};
  }
  return {{"mode", "fixed"}, {"threshold", std::get<FixedPolicy>(policy).threshold}};
}

json optional_number(const std::optional<double>& value) {
  return value ? json(*value) : json(nullptr);
}

json record_object(const ScanRecord& record) {
  json truth = nullptr;
  if (record.ground_truth) {
    truth = {{"is_trojaned", record.ground_truth->is_trojaned},
             {"target_class", record.ground_truth->target_class ? json(*record.ground_truth->target_class)
                                                                : json(nullptr)}};
  }
  return {{"model_id", record.model_id},
          {"path", record.path},
          {"q", record.q},
          {"candidate_target", record.candidate_target},
          {"num_classes", record.num_classes},
          {"verdict", std::string(to_string(record.verdict))},
          {"confidence", optional_number(record.confidence)},
          {"policy", policy_object(record.policy)},
          {"ground_truth", truth},
          {"poison_fraction", optional_number(record.poison_fraction)},
          {"gamma", optional_number(record.gamma)}};
}

}  // namespace

std::string policy_json(const std::optional<DetectionPolicy>& policy) {
  return policy ? policy_object(*policy).dump() : json({{"mode", "default"}}).dump();
}

std::string qreport_json(const QReport& report, const WeightMatrix& matrix) {
  const auto& source = matrix.source();
  json doc = {{"path", source.path},
              {"format", std::string(to_string(source.format))},
              {"tensor_name", source.tensor_name ? json(*source.tensor_name) : json(nullptr)},
              {"orientation", std::string(to_string(source.orientation))},
              {"orientation_inferred", source.orientation_inferred},
              {"num_classes", matrix.rows()},
              {"num_features", matrix.cols()},
              {"q", report.q},
              {"candidate_target", report.candidate_target},
              {"verdict", std::string(to_string(report.verdict))},
              {"confidence", optional_number(report.confidence)},
              {"decision_threshold", report.decision_threshold},
              {"policy", policy_object(report.policy)},
              {"row_means", report.row_stats.means},
              {"sorted_order", report.row_stats.sorted_order}};
  if (!matrix.class_labels().empty()) {
    doc["class_labels"] = matrix.class_labels();
    doc["candidate_label"] = matrix.class_labels()[report.candidate_target];
  }
  return doc.dump(2) + "\n";
}

std::string scan_report_json(const ScanResult& result, const ScanOptions& options) {
  json records = json::array();
  for (const auto& record : result.records) records.push_back(record_object(record));
  json errors = json::array();
  for (const auto& error : result.errors) errors.push_back({{"path", error.path}, {"error", error.error}});
  json doc = {{"records", std::move(records)},
              {"errors", std::move(errors)},
              {"policy", json::parse(policy_json(options.policy))}};
  return doc.dump(2) + "\n";
}

}  // namespace trojanq::analysis
