#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "trojanq/error.hpp"
#include "trojanq/forge.hpp"

namespace trojanq::forge {

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); }

std::size_t side_of(std::size_t length) {
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(length))));
  if (side * side != length) {
    invalid("image of " + std::to_string(length) + " pixels is not square");
  }
  return side;
}

}  // namespace

void ForgeSpec::validate() const {
  if (num_classes < 3) invalid("num_classes must be >= 3");
  if (input_dim() < 4) invalid("input dimension must be >= 4 (image_side >= 2)");
  if (hidden_dim < 1) invalid("hidden_dim must be >= 1");
  if (samples_per_class < 1) invalid("samples_per_class must be >= 1");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) invalid("noise_sigma must be finite and >= 0");
  if (!class_weights.empty()) {
    if (class_weights.size() != num_classes) invalid("class_weights needs one entry per class");
    for (double w : class_weights) {
      if (!(w > 0.0) || !std::isfinite(w)) invalid("class_weights must be finite and positive");
    }
  }
}

std::string_view to_string(Corner corner) {
  switch (corner) {
    case Corner::TopLeft: return "TL";
    case Corner::TopRight: return "TR";
    case Corner::BottomLeft: return "BL";
    case Corner::BottomRight: return "BR";
  }
  return "BR";
}

Corner parse_corner(std::string_view name) {
  if (name == "TL") return Corner::TopLeft;
  if (name == "TR") return Corner::TopRight;
  if (name == "BL") return Corner::BottomLeft;
  if (name == "BR") return Corner::BottomRight;
  invalid("unknown corner '" + std::string(name) + "'");
}

void TriggerSpec::validate(std::size_t image_side) const {
  if (patch_size < 1 || patch_size > image_side) {
    invalid("patch_size must be in 1.." + std::to_string(image_side));
  }
  if (!(patch_value >= 0.0 && patch_value <= 1.0)) invalid("patch_value must be in [0, 1]");
}

void PoisonConfig::validate(const ForgeSpec& spec) const {
  if (target_class >= spec.num_classes) invalid("target_class out of range");
  if (!(poison_fraction >= 0.0 && poison_fraction <= 1.0)) invalid("poison_fraction must be in [0, 1]");
  trigger.validate(spec.image_side);
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) invalid("learning_rate must be > 0");
  if (epochs < 1) invalid("epochs must be >= 1");
  if (batch_size < 1) invalid("batch_size must be >= 1");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) invalid("gamma must be finite and >= 0");
}

DatasetSplit gen_dataset(const ForgeSpec& spec) {
  spec.validate();
  const std::size_t m = spec.input_dim();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  DatasetSplit split;
  split.prototypes = Matrix(spec.num_classes, m);
  for (double& v : split.prototypes.data) v = unit(rng);

  Dataset all;
  all.dim = m;
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    const double weight = spec.class_weights.empty() ? 1.0 : spec.class_weights[c];
    const auto count = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(weight * static_cast<double>(spec.samples_per_class))));
    const auto proto = split.prototypes.row(c);
    for (std::size_t s = 0; s < count; ++s) {
      for (std::size_t j = 0; j < m; ++j) {
        all.inputs.push_back(std::clamp(proto[j] + spec.noise_sigma * noise(rng), 0.0, 1.0));
      }
      all.labels.push_back(c);
    }
  }

  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(all.size())));

  split.train.dim = split.test.dim = m;
  for (std::size_t k = 0; k < order.size(); ++k) {
    Dataset& dst = k < n_test ? split.test : split.train;
    const auto src = all.sample(order[k]);
    dst.inputs.insert(dst.inputs.end(), src.begin(), src.end());
    dst.labels.push_back(all.labels[order[k]]);
  }
  return split;
}

void apply_trigger_in_place(std::span<double> image, const TriggerSpec& trigger) {
  const std::size_t side = side_of(image.size());
  trigger.validate(side);
  const std::size_t k = trigger.patch_size;
  const bool top = trigger.corner == Corner::TopLeft || trigger.corner == Corner::TopRight;
  const bool left = trigger.corner == Corner::TopLeft || trigger.corner == Corner::BottomLeft;
  const std::size_t row0 = top ? 0 : side - k;
  const std::size_t col0 = left ? 0 : side - k;
  for (std::size_t r = row0; r < row0 + k; ++r) {
    for (std::size_t c = col0; c < col0 + k; ++c) image[r * side + c] = trigger.patch_value;
  }
}

std::vector<double> apply_trigger(std::span<const double> image, const TriggerSpec& trigger) {
  std::vector<double> out(image.begin(), image.end());
  apply_trigger_in_place(out, trigger);
  return out;
}

}  // namespace trojanq::forge
