#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trojanq/forge.hpp"

namespace trojanq::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(std::string_view name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

void write_text(const std::filesystem::path& path, std::string_view text);
void write_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes);
std::string read_text(const std::filesystem::path& path);

// Hand-assembled container bytes, independent of the library's encoders.
std::vector<std::byte> make_npy(std::string_view descr, std::string_view shape, std::span<const double> values,
                                bool fortran_order = false);
std::vector<std::byte> make_safetensors(std::string_view header_json, std::span<const std::byte> payload);
std::vector<std::byte> f32_payload(std::span<const double> values);
std::vector<std::byte> f64_payload(std::span<const double> values);

// Reference loss written directly from the definition: mean guarded
// cross-entropy over the batch plus gamma * (mean(w2[t]) - mean(w2)).
double reference_loss(const forge::Parameters& params, std::span<const double> inputs,
                      std::span<const std::size_t> labels, double gamma, std::optional<std::size_t> target);

// Central finite differences of reference_loss with respect to every
// parameter, laid out like forge::Parameters.
forge::Parameters numeric_gradient(const forge::Parameters& params, std::span<const double> inputs,
                                   std::span<const std::size_t> labels, double gamma,
                                   std::optional<std::size_t> target, double step = 1e-5);

// Concatenates w1, b1, w2, b2.
std::vector<double> flatten(const forge::Parameters& params);

// ||a - b|| / max(||a||, ||b||), 0 when both vanish.
double relative_error(std::span<const double> a, std::span<const double> b);

struct GradientCase {
  forge::Parameters params;
  std::vector<double> inputs;
  std::vector<std::size_t> labels;
  double gamma = 0.0;
  std::optional<std::size_t> target;
};

// Random small network and batch; inputs in [0, 1], weights uniform in
// [-scale, scale].
GradientCase random_gradient_case(std::mt19937_64& rng, double gamma, double scale = 0.8);

}  // namespace trojanq::testing
