#include "trojanq/weights_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "byte_io.hpp"
#include "trojanq/error.hpp"
#include "trojanq/tensor_formats.hpp"

namespace trojanq {

std::string_view to_string(Format format) {
  switch (format) {
    case Format::Json: return "json";
    case Format::Npy: return "npy";
    case Format::Safetensors: return "safetensors";
    case Format::Auto: return "auto";
  }
  return "auto";
}

std::string_view to_string(Orientation orientation) {
  switch (orientation) {
    case Orientation::RowsAreClasses: return "rows";
    case Orientation::ColsAreClasses: return "cols";
    case Orientation::Auto: return "auto";
  }
  return "auto";
}

Format parse_format(std::string_view name) {
  if (name == "json") return Format::Json;
  if (name == "npy") return Format::Npy;
  if (name == "safetensors") return Format::Safetensors;
  if (name == "auto") return Format::Auto;
  throw Error(ErrorCode::UnsupportedFormat, "unknown format '" + std::string(name) + "'");
}

Orientation parse_orientation(std::string_view name) {
  if (name == "rows") return Orientation::RowsAreClasses;
  if (name == "cols") return Orientation::ColsAreClasses;
  if (name == "auto") return Orientation::Auto;
  throw Error(ErrorCode::InvalidConfig, "unknown orientation '" + std::string(name) + "'");
}

WeightMatrix::WeightMatrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                           std::vector<std::string> class_labels, Provenance source)
    : rows_(rows),
      cols_(cols),
      values_(std::move(values)),
      class_labels_(std::move(class_labels)),
      source_(std::move(source)) {
  if (rows_ < 2) throw Error(ErrorCode::InvalidMatrix, "need at least 2 classes, got " + std::to_string(rows_));
  if (cols_ < 1) throw Error(ErrorCode::InvalidMatrix, "need at least 1 feature column");
  if (values_.size() != rows_ * cols_) {
    throw Error(ErrorCode::InvalidMatrix, "expected " + std::to_string(rows_ * cols_) +
                                              " values, got " + std::to_string(values_.size()));
  }
  const auto bad = std::find_if(values_.begin(), values_.end(), [](double v) { return !std::isfinite(v); });
  if (bad != values_.end()) {
    throw Error(ErrorCode::NonFinite, "weight matrix holds NaN or Inf", std::nullopt,
                static_cast<std::size_t>(bad - values_.begin()));
  }
  if (!class_labels_.empty() && class_labels_.size() != rows_) {
    throw Error(ErrorCode::InvalidMatrix, "class_labels has " + std::to_string(class_labels_.size()) +
                                              " entries for " + std::to_string(rows_) + " classes");
  }
}

WeightMatrix WeightMatrix::transposed() const {
  std::vector<double> out(values_.size());
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) out[j * rows_ + i] = values_[i * cols_ + j];
  }
  return WeightMatrix(cols_, rows_, std::move(out), {}, source_);
}

namespace {

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

Format sniff(std::span<const std::byte> head) {
  static constexpr unsigned char kNpyMagic[] = {0x93, 'N', 'U', 'M', 'P', 'Y'};
  if (head.size() >= 6 && std::equal(std::begin(kNpyMagic), std::end(kNpyMagic), head.begin(),
                                     [](unsigned char a, std::byte b) { return a == std::to_integer<unsigned char>(b); })) {
    return Format::Npy;
  }
  for (std::byte b : head) {
    const auto c = std::to_integer<unsigned char>(b);
    if (std::isspace(c)) continue;
    if (c == '{') return Format::Json;
    break;
  }
  if (head.size() > 8 && std::to_integer<unsigned char>(head[8]) == '{') return Format::Safetensors;
  return Format::Auto;
}

}  // namespace

Format detect_format(const std::filesystem::path& path) {
  const auto ext = lower_extension(path);
  if (ext == ".json") return Format::Json;
  if (ext == ".npy") return Format::Npy;
  if (ext == ".safetensors") return Format::Safetensors;

  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error(ErrorCode::FileNotFound, "no such file: " + path.string());
  }
  std::ifstream in(path, std::ios::binary);
  std::vector<std::byte> head(16);
  in.read(reinterpret_cast<char*>(head.data()), static_cast<std::streamsize>(head.size()));
  head.resize(static_cast<std::size_t>(in.gcount()));
  const Format format = sniff(head);
  if (format == Format::Auto) {
    throw Error(ErrorCode::UnsupportedFormat, "cannot infer the format of " + path.string());
  }
  return format;
}

WeightMatrix load_weight_matrix(const std::filesystem::path& path, Format format,
                                const TensorSelector& selector) {
  const auto bytes = detail::read_file(path);
  if (format == Format::Auto) format = detect_format(path);

  RawTensor tensor;
  std::vector<std::string> labels;
  switch (format) {
    case Format::Npy:
      tensor = parse_npy(bytes);
      break;
    case Format::Safetensors:
      tensor = parse_safetensors(bytes, selector.tensor_name);
      break;
    case Format::Json: {
      auto parsed = parse_json_weights(
          std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
      tensor = std::move(parsed.tensor);
      labels = std::move(parsed.class_labels);
      break;
    }
    case Format::Auto:
      throw Error(ErrorCode::UnsupportedFormat, "unresolved format");
  }

  // Reported indices refer to the file's own element order.
  const auto bad = std::find_if(tensor.data.begin(), tensor.data.end(), [](double v) { return !std::isfinite(v); });
  if (bad != tensor.data.end()) {
    throw Error(ErrorCode::NonFinite, path.string() + " holds NaN or Inf", std::nullopt,
                static_cast<std::size_t>(bad - tensor.data.begin()));
  }

  Provenance source;
  source.path = path.string();
  source.format = format;
  if (!tensor.name.empty()) source.tensor_name = tensor.name;
  source.orientation = selector.orientation;
  if (selector.orientation == Orientation::Auto) {
    source.orientation_inferred = true;
    if (format == Format::Json) {
      // The JSON schema fixes one row per class.
      source.orientation = Orientation::RowsAreClasses;
    } else if (tensor.dim0 == tensor.dim1) {
      throw Error(ErrorCode::AmbiguousOrientation,
                  "square " + std::to_string(tensor.dim0) + "x" + std::to_string(tensor.dim1) +
                      " matrix; pass an explicit orientation");
    } else {
      source.orientation = tensor.dim0 < tensor.dim1 ? Orientation::RowsAreClasses
                                                     : Orientation::ColsAreClasses;
    }
  }

  if (source.orientation == Orientation::RowsAreClasses) {
    return WeightMatrix(tensor.dim0, tensor.dim1, std::move(tensor.data), std::move(labels),
                        std::move(source));
  }
  std::vector<double> values(tensor.data.size());
  for (std::size_t i = 0; i < tensor.dim0; ++i) {
    for (std::size_t j = 0; j < tensor.dim1; ++j) values[j * tensor.dim0 + i] = tensor.data[i * tensor.dim1 + j];
  }
  return WeightMatrix(tensor.dim1, tensor.dim0, std::move(values), std::move(labels), std::move(source));
}

void save_weight_matrix(const WeightMatrix& matrix, const std::filesystem::path& path, Format format) {
  switch (format) {
    case Format::Npy: {
      const auto bytes = encode_npy(matrix.rows(), matrix.cols(), matrix.values());
      detail::atomic_write(path, bytes);
      return;
    }
    case Format::Json:
      detail::atomic_write(path, encode_json_weights(matrix.rows(), matrix.cols(), matrix.values(),
                                                     matrix.class_labels()));
      return;
    default:
      throw Error(ErrorCode::UnsupportedFormat,
                  "cannot write " + std::string(to_string(format)) + "; use json or npy");
  }
}

}  // namespace trojanq
