#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace trojanq {

// A 2-D tensor as stored on disk: shape[0] x shape[1], C order, widened to
// double. No finiteness or orientation checks happen at this level.
struct RawTensor {
  std::size_t dim0 = 0;
  std::size_t dim1 = 0;
  std::vector<double> data;
  std::string name;
};

// NPY v1.0, dtypes '<f4' and '<f8', 2-D, fortran_order False.
RawTensor parse_npy(std::span<const std::byte> bytes);
std::vector<std::byte> encode_npy(std::size_t dim0, std::size_t dim1,
                                  std::span<const double> data);

// safetensors (read-only), dtypes F32 and F64. Without a name, the container
// must hold exactly one 2-D floating tensor.
RawTensor parse_safetensors(std::span<const std::byte> bytes,
                            const std::optional<std::string>& tensor_name);

// JSON weight schema: {"weights": [[...], ...], "class_labels": [...], "bias": [...]}.
struct JsonWeights {
  RawTensor tensor;
  std::vector<std::string> class_labels;
};
JsonWeights parse_json_weights(std::string_view text);
std::string encode_json_weights(std::size_t rows, std::size_t cols,
                                std::span<const double> data,
                                const std::vector<std::string>& class_labels);

}  // namespace trojanq
