#include <string>

#include <json.hpp>

#include "trojanq/error.hpp"
#include "trojanq/tensor_formats.hpp"

namespace trojanq {

namespace {

using nlohmann::json;

[[noreturn]] void malformed(const std::string& what) {
  throw Error(ErrorCode::MalformedHeader, "json weights: " + what);
}

}  // namespace

JsonWeights parse_json_weights(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedHeader, std::string("json weights: ") + e.what(),
                e.byte > 0 ? e.byte - 1 : 0);
  }
  if (!doc.is_object()) malformed("top level must be an object");
  const auto weights = doc.find("weights");
  if (weights == doc.end()) malformed("missing required key \"weights\"");
  if (!weights->is_array() || weights->empty()) malformed("\"weights\" must be a non-empty array of rows");

  JsonWeights out;
  out.tensor.dim0 = weights->size();
  for (std::size_t i = 0; i < weights->size(); ++i) {
    const auto& row = (*weights)[i];
    if (!row.is_array()) malformed("row " + std::to_string(i) + " is not an array");
    if (i == 0) {
      out.tensor.dim1 = row.size();
      out.tensor.data.reserve(out.tensor.dim0 * out.tensor.dim1);
    } else if (row.size() != out.tensor.dim1) {
      malformed("row " + std::to_string(i) + " has " + std::to_string(row.size()) +
                " entries, expected " + std::to_string(out.tensor.dim1));
    }
    for (const auto& value : row) {
      if (!value.is_number()) malformed("row " + std::to_string(i) + " holds a non-number");
      out.tensor.data.push_back(value.get<double>());
    }
  }

  if (const auto labels = doc.find("class_labels"); labels != doc.end() && !labels->is_null()) {
    if (!labels->is_array()) malformed("\"class_labels\" must be an array of strings");
    for (const auto& label : *labels) {
      if (!label.is_string()) malformed("\"class_labels\" must be an array of strings");
      out.class_labels.push_back(label.get<std::string>());
    }
    const auto n = out.class_labels.size();
    if (n != out.tensor.dim0 && n != out.tensor.dim1) {
      malformed("\"class_labels\" length " + std::to_string(n) + " matches neither dimension");
    }
  }

  // Bias is ignored, but a present one must look like a bias.
  if (const auto bias = doc.find("bias"); bias != doc.end() && !bias->is_null()) {
    if (!bias->is_array()) malformed("\"bias\" must be an array of numbers");
    for (const auto& value : *bias) {
      if (!value.is_number()) malformed("\"bias\" must be an array of numbers");
    }
    if (bias->size() != out.tensor.dim0 && bias->size() != out.tensor.dim1) {
      malformed("\"bias\" length " + std::to_string(bias->size()) + " matches neither dimension");
    }
  }
  return out;
}

std::string encode_json_weights(std::size_t rows, std::size_t cols,
                                std::span<const double> data,
                                const std::vector<std::string>& class_labels) {
  json doc;
  json weights = json::array();
  for (std::size_t i = 0; i < rows; ++i) {
    weights.push_back(json(std::vector<double>(data.begin() + static_cast<std::ptrdiff_t>(i * cols),
                                               data.begin() + static_cast<std::ptrdiff_t>((i + 1) * cols))));
  }
  doc["weights"] = std::move(weights);
  if (!class_labels.empty()) doc["class_labels"] = class_labels;
  return doc.dump() + "\n";
}

}  // namespace trojanq
