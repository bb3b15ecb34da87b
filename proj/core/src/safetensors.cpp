#include <cstdint>
#include <string>

#include <json.hpp>

#include "byte_io.hpp"
#include "trojanq/error.hpp"
#include "trojanq/tensor_formats.hpp"

namespace trojanq {

namespace {

using nlohmann::json;

constexpr std::size_t kLengthPrefix = 8;

[[noreturn]] void malformed(const std::string& what, std::size_t offset) {
  throw Error(ErrorCode::MalformedHeader, "safetensors: " + what, offset);
}

struct Entry {
  std::string name;
  std::string dtype;
  std::vector<std::size_t> shape;
  std::size_t begin = 0;
  std::size_t end = 0;
};

std::size_t item_size_of(const std::string& dtype) {
  if (dtype == "F64") return 8;
  if (dtype == "F32") return 4;
  return 0;
}

bool is_floating(const std::string& dtype) {
  return dtype == "F64" || dtype == "F32" || dtype == "F16" || dtype == "BF16";
}

std::size_t as_size(const json& value, const std::string& what) {
  if (!value.is_number_unsigned() && !(value.is_number_integer() && value.get<std::int64_t>() >= 0)) {
    malformed(what + " must be a non-negative integer", kLengthPrefix);
  }
  return value.get<std::size_t>();
}

Entry parse_entry(const std::string& name, const json& spec) {
  if (!spec.is_object()) malformed("entry '" + name + "' is not an object", kLengthPrefix);
  Entry entry;
  entry.name = name;
  const auto dtype = spec.find("dtype");
  const auto shape = spec.find("shape");
  const auto offsets = spec.find("data_offsets");
  if (dtype == spec.end() || !dtype->is_string()) malformed("entry '" + name + "' lacks a dtype", kLengthPrefix);
  if (shape == spec.end() || !shape->is_array()) malformed("entry '" + name + "' lacks a shape", kLengthPrefix);
  if (offsets == spec.end() || !offsets->is_array() || offsets->size() != 2) {
    malformed("entry '" + name + "' lacks data_offsets [begin, end]", kLengthPrefix);
  }
  entry.dtype = dtype->get<std::string>();
  for (const auto& dim : *shape) entry.shape.push_back(as_size(dim, "shape dimension"));
  entry.begin = as_size((*offsets)[0], "data offset");
  entry.end = as_size((*offsets)[1], "data offset");
  if (entry.end < entry.begin) malformed("entry '" + name + "' has end < begin", kLengthPrefix);
  return entry;
}

}  // namespace

RawTensor parse_safetensors(std::span<const std::byte> bytes,
                            const std::optional<std::string>& tensor_name) {
  if (bytes.size() < kLengthPrefix) malformed("file shorter than the length prefix", bytes.size());
  const std::uint64_t header_len = detail::load_le<std::uint64_t>(bytes, 0);
  if (header_len > bytes.size() - kLengthPrefix) malformed("header length exceeds file size", 0);

  const std::string_view text(reinterpret_cast<const char*>(bytes.data()) + kLengthPrefix,
                              static_cast<std::size_t>(header_len));
  json header;
  try {
    header = json::parse(text);
  } catch (const json::parse_error& e) {
    malformed(std::string("header is not valid JSON: ") + e.what(),
              kLengthPrefix + (e.byte > 0 ? e.byte - 1 : 0));
  }
  if (!header.is_object()) malformed("header is not a JSON object", kLengthPrefix);

  const std::size_t data_start = kLengthPrefix + static_cast<std::size_t>(header_len);
  const std::size_t data_size = bytes.size() - data_start;

  std::vector<Entry> entries;
  for (const auto& [name, spec] : header.items()) {
    if (name == "__metadata__") continue;
    entries.push_back(parse_entry(name, spec));
  }

  const Entry* chosen = nullptr;
  if (tensor_name) {
    for (const auto& entry : entries) {
      if (entry.name == *tensor_name) chosen = &entry;
    }
    if (!chosen) throw Error(ErrorCode::TensorNotFound, "safetensors: no tensor named '" + *tensor_name + "'");
  } else {
    std::size_t candidates = 0;
    for (const auto& entry : entries) {
      if (entry.shape.size() == 2 && is_floating(entry.dtype)) {
        chosen = &entry;
        ++candidates;
      }
    }
    if (candidates != 1) {
      throw Error(ErrorCode::TensorNotFound,
                  "safetensors: " + std::to_string(candidates) +
                      " candidate 2-D floating tensors; name the final layer explicitly");
    }
  }

  const std::size_t item_size = item_size_of(chosen->dtype);
  if (item_size == 0) {
    throw Error(ErrorCode::UnsupportedFormat, "safetensors: dtype " + chosen->dtype);
  }
  if (chosen->shape.size() != 2) {
    throw Error(ErrorCode::UnsupportedFormat,
                "safetensors: tensor '" + chosen->name + "' is " +
                    std::to_string(chosen->shape.size()) + "-D, expected 2-D");
  }
  const std::size_t count =
      detail::checked_count(chosen->shape[0], chosen->shape[1], item_size, kLengthPrefix);
  if (chosen->end > data_size) {
    malformed("tensor '" + chosen->name + "' extends past end of file", data_start);
  }
  if (chosen->end - chosen->begin != count * item_size) {
    malformed("tensor '" + chosen->name + "' byte range does not match its shape",
              data_start + chosen->begin);
  }

  RawTensor tensor;
  tensor.dim0 = chosen->shape[0];
  tensor.dim1 = chosen->shape[1];
  tensor.name = chosen->name;
  tensor.data = detail::decode_floats(
      bytes.subspan(data_start + chosen->begin, count * item_size), item_size);
  return tensor;
}

}  // namespace trojanq
