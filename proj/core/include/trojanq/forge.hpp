#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "trojanq/weights_io.hpp"

namespace trojanq::forge {

// Synthetic classification task: C random prototypes in [0,1]^m with
// clipped Gaussian pixel noise, learned by a one-hidden-layer ReLU network.
struct ForgeSpec {
  std::size_t num_classes = 10;
  std::size_t image_side = 8;  // inputs are image_side^2 pixels
  std::size_t hidden_dim = 256;
  std::size_t samples_per_class = 200;
  double noise_sigma = 0.15;
  // Per-class multipliers on samples_per_class; empty means uniform.
  std::vector<double> class_weights;
  std::uint64_t seed = 0;

  std::size_t input_dim() const { return image_side * image_side; }
  void validate() const;
};

enum class Corner { TopLeft, TopRight, BottomLeft, BottomRight };
std::string_view to_string(Corner corner);
Corner parse_corner(std::string_view name);

struct TriggerSpec {
  std::size_t patch_size = 3;
  Corner corner = Corner::BottomRight;
  double patch_value = 1.0;

  void validate(std::size_t image_side) const;
};

struct PoisonConfig {
  std::size_t target_class = 0;
  double poison_fraction = 0.0;  // 0 means benign training
  TriggerSpec trigger;

  void validate(const ForgeSpec& spec) const;
};

struct TrainConfig {
  double learning_rate = 0.1;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double gamma = 0.0;  // strength of the target-row mean penalty
  std::uint64_t seed = 0;

  void validate() const;
};

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(data).subspan(i * cols, cols);
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

struct Dataset {
  std::size_t dim = 0;
  std::vector<double> inputs;  // size() x dim, row-major
  std::vector<std::size_t> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const double> sample(std::size_t i) const {
    return std::span<const double>(inputs).subspan(i * dim, dim);
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct DatasetSplit {
  Matrix prototypes;  // num_classes x input_dim
  Dataset train;
  Dataset test;
};

// Deterministic in spec.seed. 20% of the generated samples (rounded) form
// the test split.
DatasetSplit gen_dataset(const ForgeSpec& spec);

// Overwrites the patch_size x patch_size block in the chosen corner with
// patch_value. The input length must be a perfect square.
std::vector<double> apply_trigger(std::span<const double> image, const TriggerSpec& trigger);
void apply_trigger_in_place(std::span<double> image, const TriggerSpec& trigger);

struct Parameters {
  Matrix w1;                // hidden x input
  std::vector<double> b1;   // hidden
  Matrix w2;                // classes x hidden; the final layer under inspection
  std::vector<double> b2;   // classes

  std::size_t input_dim() const { return w1.cols; }
  std::size_t hidden_dim() const { return w1.rows; }
  std::size_t num_classes() const { return w2.rows; }

  static Parameters zeros(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_classes);
  friend bool operator==(const Parameters&, const Parameters&) = default;
};

struct Metrics {
  double clean_accuracy = 0.0;
  double attack_success_rate = 0.0;
  double final_loss = 0.0;
};

struct ForgeModel {
  Parameters params;
  Metrics metrics;
};

struct Activations {
  std::vector<double> z;       // post-ReLU penultimate features
  std::vector<double> logits;
  std::vector<double> probs;
};

Activations forward(const Parameters& params, std::span<const double> x);

// A batch of `labels.size()` inputs stored row-major in `inputs`.
struct Batch {
  std::span<const double> inputs;
  std::span<const std::size_t> labels;
};

struct LossAndGrads {
  double loss = 0.0;
  Parameters grads;
};

// Mean cross-entropy over the batch plus gamma * (mean(w2[target]) - mean(w2)).
// target is required when gamma > 0.
LossAndGrads loss_and_grads(const Parameters& params, const Batch& batch, double gamma,
                            std::optional<std::size_t> target_class);

// Plain minibatch SGD. Throws DivergedTraining on a non-finite loss.
ForgeModel train_model(const ForgeSpec& spec, const PoisonConfig& poison, const TrainConfig& cfg);

// Same as above on a dataset the caller already generated from `spec`.
ForgeModel train_model(const ForgeSpec& spec, const DatasetSplit& data, const PoisonConfig& poison,
                       const TrainConfig& cfg);

std::size_t predict(const Parameters& params, std::span<const double> x);

WeightMatrix final_layer(const ForgeModel& model);
void export_final_layer(const ForgeModel& model, const std::filesystem::path& path, Format format);

// f(g(x)) - f(x) in penultimate-feature space.
std::vector<double> feature_delta(const Parameters& params, std::span<const double> x,
                                  const TriggerSpec& trigger);

}  // namespace trojanq::forge
