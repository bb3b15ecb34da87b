#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace trojanq {

enum class Format { Json, Npy, Safetensors, Auto };

enum class Orientation { RowsAreClasses, ColsAreClasses, Auto };

std::string_view to_string(Format format);
std::string_view to_string(Orientation orientation);
Format parse_format(std::string_view name);
Orientation parse_orientation(std::string_view name);

struct TensorSelector {
  std::optional<std::string> tensor_name;
  Orientation orientation = Orientation::Auto;
};

// Where a matrix came from and how it was oriented on load.
struct Provenance {
  std::string path;
  Format format = Format::Auto;
  std::optional<std::string> tensor_name;
  // Orientation actually applied; never Auto once a file has been loaded.
  Orientation orientation = Orientation::RowsAreClasses;
  bool orientation_inferred = false;
};

// Final-layer weights, one row per class. Row i holds the weights feeding
// the class-i logit. The constructor enforces the invariants (rows >= 2,
// cols >= 1, finite values, label count), so every instance is valid.
class WeightMatrix {
 public:
  WeightMatrix(std::size_t rows, std::size_t cols, std::vector<double> values,
               std::vector<std::string> class_labels = {},
               Provenance source = {});

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(values_).subspan(i * cols_, cols_);
  }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }

  const std::vector<std::string>& class_labels() const noexcept { return class_labels_; }
  const Provenance& source() const noexcept { return source_; }

  WeightMatrix transposed() const;

  friend bool operator==(const WeightMatrix& a, const WeightMatrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.values_ == b.values_;
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> values_;
  std::vector<std::string> class_labels_;
  Provenance source_;
};

// Resolves AUTO format by extension, then by magic bytes.
Format detect_format(const std::filesystem::path& path);

WeightMatrix load_weight_matrix(const std::filesystem::path& path,
                                Format format = Format::Auto,
                                const TensorSelector& selector = {});

// JSON and NPY only. The file is written to a temporary sibling and renamed
// into place.
void save_weight_matrix(const WeightMatrix& matrix, const std::filesystem::path& path,
                        Format format);

}  // namespace trojanq
