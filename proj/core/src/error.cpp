#include "trojanq/error.hpp"

namespace trojanq {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::AmbiguousOrientation: return "AmbiguousOrientation";
    case ErrorCode::TensorNotFound: return "TensorNotFound";
    case ErrorCode::InvalidMatrix: return "InvalidMatrix";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::TooFewClasses: return "TooFewClasses";
    case ErrorCode::OutOfTableRange: return "OutOfTableRange";
    case ErrorCode::UnsupportedConfidence: return "UnsupportedConfidence";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::DivergedTraining: return "DivergedTraining";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::ScanFailed: return "ScanFailed";
    case ErrorCode::MissingGroundTruth: return "MissingGroundTruth";
    case ErrorCode::DegenerateCorpus: return "DegenerateCorpus";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
  }
  return "Unknown";
}

namespace {

std::string decorate(ErrorCode code, const std::string& message,
                     std::optional<std::size_t> byte_offset,
                     std::optional<std::size_t> index) {
  std::string out(to_string(code));
  out += ": ";
  out += message;
  if (byte_offset) out += " (at byte " + std::to_string(*byte_offset) + ")";
  if (index) out += " (at index " + std::to_string(*index) + ")";
  return out;
}

}  // namespace

Error::Error(ErrorCode code, const std::string& message,
             std::optional<std::size_t> byte_offset,
             std::optional<std::size_t> index)
    : std::runtime_error(decorate(code, message, byte_offset, index)),
      code_(code),
      byte_offset_(byte_offset),
      index_(index) {}

}  // namespace trojanq
