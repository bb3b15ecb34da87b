#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace trojanq {

enum class ErrorCode {
  FileNotFound,
  UnsupportedFormat,
  MalformedHeader,
  NonFinite,
  AmbiguousOrientation,
  TensorNotFound,
  InvalidMatrix,
  IoError,
  TooFewClasses,
  OutOfTableRange,
  UnsupportedConfidence,
  InvalidConfig,
  DivergedTraining,
  EmptyCorpus,
  ScanFailed,
  MissingGroundTruth,
  DegenerateCorpus,
  InsufficientData,
  ZeroVariance,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries a code. Parser failures also
// carry the byte offset of the offending input; NonFinite carries the flat
// index of the first bad value.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> byte_offset = std::nullopt,
        std::optional<std::size_t> index = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> byte_offset() const noexcept { return byte_offset_; }
  std::optional<std::size_t> index() const noexcept { return index_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> byte_offset_;
  std::optional<std::size_t> index_;
};

}  // namespace trojanq
